#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fedflex/metrics.hpp"
#include "test_support.hpp"

namespace fedflex {
namespace {

SessionRecord session(std::vector<int> a_positions, std::vector<int> b_positions = {}, Variant v = Variant::Svd) {
  SessionRecord r;
  r.participant_id = "u";
  r.variant = v;
  r.timestamp = 1;
  r.list_a = {1, 2, 3, 4, 5};
  r.list_b = {1, 6, 7, 8, 9};
  for (int p : a_positions) r.clicks.push_back({r.list_a[p - 1], ListSide::A, p, 2});
  for (int p : b_positions) r.clicks.push_back({r.list_b[p - 1], ListSide::B, p, 2});
  return r;
}

TEST(Ctr, Examples) {
  const std::vector<SessionRecord> all{session({1, 2, 3, 4, 5})};
  EXPECT_EQ(ctr(all, ListSide::A), 1.0);
  const std::vector<SessionRecord> none{session({})};
  EXPECT_EQ(ctr(none, ListSide::A), 0.0);
  const std::vector<SessionRecord> three{session({1, 2}), session({4})};
  EXPECT_DOUBLE_EQ(ctr(three, ListSide::A), 0.3);
  EXPECT_THROW(ctr({}, ListSide::A), std::invalid_argument);
}

TEST(PrecisionAt5, Examples) {
  const std::vector<SessionRecord> all{session({1, 2, 3, 4, 5}), session({1, 2, 3, 4, 5})};
  EXPECT_EQ(precision_at_5(all, ListSide::A), 1.0);
  const std::vector<SessionRecord> two{session({2, 5})};
  EXPECT_DOUBLE_EQ(precision_at_5(two, ListSide::A), 0.4);
  const std::vector<SessionRecord> dup{session({3, 3, 3})};
  EXPECT_DOUBLE_EQ(precision_at_5(dup, ListSide::A), 0.2);
  EXPECT_DOUBLE_EQ(ctr(dup, ListSide::A), 0.2);
  EXPECT_THROW(precision_at_5({}, ListSide::A), std::invalid_argument);
}

TEST(NdcgAt5, Examples) {
  const std::vector<SessionRecord> prefix{session({1, 2})};
  EXPECT_EQ(ndcg_at_5(prefix, ListSide::A), 1.0);
  const std::vector<SessionRecord> second{session({2})};
  EXPECT_NEAR(ndcg_at_5(second, ListSide::A), testing::ndcg_formula({2}), 1e-12);
  EXPECT_NEAR(ndcg_at_5(second, ListSide::A), 0.6309, 1e-4);
  const std::vector<SessionRecord> one_three{session({1, 3})};
  EXPECT_NEAR(ndcg_at_5(one_three, ListSide::A), testing::ndcg_formula({1, 3}), 1e-12);
  EXPECT_NEAR(ndcg_at_5(one_three, ListSide::A), 0.9197, 1e-4);
}

TEST(NdcgAt5, ZeroClickSessionsAreSkipped) {
  const std::vector<SessionRecord> mixed{session({2}), session({})};
  EXPECT_NEAR(ndcg_at_5(mixed, ListSide::A), testing::ndcg_formula({2}), 1e-12);
  const std::vector<SessionRecord> none{session({}), session({}, {1})};
  EXPECT_THROW(ndcg_at_5(none, ListSide::A), std::domain_error);
}

TEST(Mrr, Examples) {
  const std::vector<SessionRecord> first{session({1}), session({1, 4})};
  EXPECT_EQ(mrr(first, ListSide::A), 1.0);
  const std::vector<SessionRecord> fourth{session({4})};
  EXPECT_EQ(mrr(fourth, ListSide::A), 0.25);
  const std::vector<SessionRecord> half{session({1}), session({})};
  EXPECT_EQ(mrr(half, ListSide::A), 0.5);
  // Best position counts even when clicked later.
  const std::vector<SessionRecord> order{session({4, 2})};
  EXPECT_EQ(mrr(order, ListSide::A), 0.5);
  EXPECT_THROW(mrr({}, ListSide::A), std::invalid_argument);
}

TEST(Ild, Examples) {
  EmbeddingTable t(3);
  t.insert(1, {1, 0, 0});
  t.insert(2, {1, 0, 0});
  t.insert(3, {0, 1, 0});
  t.insert(4, {2, 0, 0});
  const std::vector<ItemId> same{1, 2, 4};
  EXPECT_EQ(ild(same, t), 0.0);
  const std::vector<ItemId> ortho{1, 3};
  EXPECT_EQ(ild(ortho, t), 1.0);
  const std::vector<ItemId> mixed{1, 2, 3};  // cosines 1, 0, 0
  EXPECT_DOUBLE_EQ(ild(mixed, t), 2.0 / 3.0);
  const std::vector<ItemId> single{3};
  EXPECT_EQ(ild(single, t), 0.0);
  const std::vector<ItemId> missing{1, 55};
  try {
    ild(missing, t);
    FAIL();
  } catch (const UnknownItemError& e) {
    EXPECT_EQ(e.id(), 55);
  }
}

TEST(Coverage, ReproducesReportedRatios) {
  const std::pair<std::size_t, std::size_t> counts[] = {{14, 35}, {22, 43}, {17, 46}, {19, 58}};
  const double expected[] = {0.4000, 0.5116, 0.3696, 0.3276};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(coverage_ratio(counts[i].first, counts[i].second), expected[i], 0.0005) << i;
  }
}

TEST(Coverage, FromSessions) {
  std::vector<SessionRecord> s{session({1, 2, 3, 4, 5})};
  EXPECT_EQ(coverage_ratio(s, ListSide::A), 1.0);
  s.push_back(session({}));
  s[1].list_a = {10, 11, 12, 13, 14};
  EXPECT_EQ(coverage_ratio(s, ListSide::A), 0.5);
  EXPECT_THROW(coverage_ratio({}, ListSide::A), std::invalid_argument);
}

TEST(GenreDistribution, CountsPerGenre) {
  Catalog catalog({testing::series(1, "a"), testing::series(2, "b"), testing::series(3, "c"),
                   testing::series(4, "d"), testing::series(5, "e"),
                   testing::series(6, "f", {"Drama", "Comedy"})});
  std::vector<SessionRecord> s{session({})};
  s[0].list_b = {6, 99};
  const auto rows = genre_distribution(s, catalog);
  auto count = [&](ListSide side, const std::string& g) -> std::size_t {
    for (const auto& r : rows) {
      if (r.list == side && r.genre == g) return r.count;
    }
    return 0;
  };
  EXPECT_EQ(count(ListSide::A, "Drama"), 5u);
  EXPECT_EQ(count(ListSide::B, "Drama"), 1u);
  EXPECT_EQ(count(ListSide::B, "Comedy"), 1u);
  EXPECT_EQ(count(ListSide::B, "Unknown"), 1u);
  EXPECT_TRUE(genre_distribution({}, catalog).empty());

  std::ostringstream csv;
  write_genre_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "variant,list,genre,count");
  EXPECT_NE(csv.str().find("svd,A,Drama,5\n"), std::string::npos);
}

// Random telemetry over a 20-item pool with duplicate and out-of-order clicks.
std::vector<SessionRecord> random_sessions(std::mt19937_64& rng, std::size_t n) {
  std::vector<SessionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    SessionRecord r;
    r.participant_id = "u" + std::to_string(i % 3);
    r.variant = (i % 2) ? Variant::Bpr : Variant::Svd;
    r.timestamp = static_cast<std::int64_t>(i);
    std::vector<ItemId> pool(20);
    for (ItemId k = 0; k < 20; ++k) pool[static_cast<std::size_t>(k)] = k;
    std::shuffle(pool.begin(), pool.end(), rng);
    r.list_a.assign(pool.begin(), pool.begin() + 5);
    std::shuffle(pool.begin(), pool.end(), rng);
    r.list_b.assign(pool.begin(), pool.begin() + 5);
    const int clicks = std::uniform_int_distribution<int>(0, 8)(rng);
    for (int c = 0; c < clicks; ++c) {
      const auto side = std::bernoulli_distribution(0.5)(rng) ? ListSide::A : ListSide::B;
      const int pos = std::uniform_int_distribution<int>(1, 5)(rng);
      r.clicks.push_back({r.list(side)[static_cast<std::size_t>(pos - 1)], side, pos, c});
    }
    out.push_back(std::move(r));
  }
  return out;
}

EmbeddingTable random_embeddings(std::mt19937_64& rng) {
  EmbeddingTable t(4);
  for (ItemId k = 0; k < 20; ++k) t.insert(k, testing::random_vector(rng, 4));
  return t;
}

TEST(MetricsProperty, RangesHoldOnRandomTelemetry) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto sessions = random_sessions(rng, 1 + trial % 9);
    const auto report = compute_report(sessions, random_embeddings(rng));
    for (const auto& [key, m] : report.entries) {
      for (double v : {m.ctr, m.p_at_5, m.mrr, m.coverage_ratio}) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
      if (!std::isnan(m.ndcg_at_5)) {
        ASSERT_GE(m.ndcg_at_5, 0.0);
        ASSERT_LE(m.ndcg_at_5, 1.0 + 1e-12);
      }
      ASSERT_GE(m.ild, 0.0);
      ASSERT_LE(m.ild, 2.0);
      ASSERT_NEAR(m.ctr, m.p_at_5, 1e-12);
    }
  }
}

TEST(MetricsProperty, SessionOrderDoesNotMatter) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    auto sessions = random_sessions(rng, 8);
    const auto emb = random_embeddings(rng);
    const auto before = report_to_json(compute_report(sessions, emb));
    std::shuffle(sessions.begin(), sessions.end(), rng);
    const auto after = report_to_json(compute_report(sessions, emb));
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      for (const char* key : {"ctr", "p_at_5", "ndcg_at_5", "mrr", "ild", "coverage_ratio"}) {
        if (before[i][key].is_null()) {
          ASSERT_TRUE(after[i][key].is_null());
        } else {
          ASSERT_NEAR(before[i][key].get<double>(), after[i][key].get<double>(), 1e-12) << key;
        }
      }
    }
  }
}

TEST(MetricsProperty, NdcgIsOneExactlyForPrefixes) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> positions;
    for (int p = 1; p <= 5; ++p) {
      if (std::bernoulli_distribution(0.5)(rng)) positions.push_back(p);
    }
    if (positions.empty()) continue;
    const std::vector<SessionRecord> s{session(positions)};
    const bool is_prefix = positions.back() == static_cast<int>(positions.size());
    const double v = ndcg_at_5(s, ListSide::A);
    if (is_prefix) {
      ASSERT_EQ(v, 1.0);
    } else {
      ASSERT_LT(v, 1.0);
    }
    ASSERT_NEAR(v, testing::ndcg_formula(positions), 1e-12);
  }
}

TEST(Report, SplitsByVariantAndList) {
  EmbeddingTable t(2);
  for (ItemId k = 0; k < 10; ++k) t.insert(k, {1.0, static_cast<double>(k)});
  const std::vector<SessionRecord> s{session({1}, {}, Variant::Svd), session({}, {2}, Variant::Bpr)};
  const auto report = compute_report(s, t);
  ASSERT_EQ(report.entries.size(), 4u);
  const auto& svd_a = report.entries.at({Variant::Svd, ListSide::A});
  EXPECT_EQ(svd_a.sessions, 1u);
  EXPECT_EQ(svd_a.mrr, 1.0);
  EXPECT_EQ(svd_a.unique_recommended, 5u);
  EXPECT_EQ(svd_a.unique_clicked, 1u);
  EXPECT_TRUE(std::isnan(report.entries.at({Variant::Svd, ListSide::B}).ndcg_at_5));
  const auto j = report_to_json(report);
  ASSERT_EQ(j.size(), 4u);
  bool saw_null = false;
  for (const auto& e : j) saw_null |= e.at("ndcg_at_5").is_null();
  EXPECT_TRUE(saw_null);
}

}  // namespace
}  // namespace fedflex
