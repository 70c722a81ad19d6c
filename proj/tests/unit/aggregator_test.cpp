#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "fedflex/aggregator.hpp"
#include "test_support.hpp"

namespace fedflex {
namespace {

AggregatorConfig config(int k = 2, std::size_t items = 10, std::uint64_t seed = 5) {
  AggregatorConfig c;
  for (std::size_t i = 0; i < items; ++i) c.item_ids.push_back(static_cast<ItemId>(i));
  c.k = k;
  c.seed = seed;
  return c;
}

UpdateMessage update(std::string who, ItemDeltas d, std::uint64_t round = 0, Variant v = Variant::Svd) {
  return {std::move(who), v, round, std::move(d), {1.0, 0.0}};
}

SessionRecord session(std::string who, std::int64_t ts) {
  SessionRecord r;
  r.participant_id = std::move(who);
  r.timestamp = ts;
  r.list_a = {1, 2, 3, 4, 5};
  r.list_b = {5, 6, 7, 8, 9};
  return r;
}

TEST(Aggregator, FreshModelIsTheSeededInit) {
  Aggregator agg(config(3, 10, 77));
  EXPECT_EQ(agg.model(Variant::Svd), init_model(10, 3, 77));
  EXPECT_EQ(agg.serve_model(Variant::Bpr).to_model(), init_model(10, 3, 77));
}

TEST(Aggregator, RepeatedFetchIsIdentical) {
  Aggregator agg(config());
  EXPECT_EQ(encode(agg.serve_model(Variant::Svd)), encode(agg.serve_model(Variant::Svd)));
}

TEST(Aggregator, RoundAdvancesByOne) {
  Aggregator agg(config());
  const auto before = agg.serve_model(Variant::Svd).round;
  EXPECT_EQ(agg.submit_update(update("a", {{1, {0.1, 0.1}}})).status, AckStatus::Accepted);
  EXPECT_EQ(agg.aggregate_round(Variant::Svd), before + 1);
  EXPECT_EQ(agg.serve_model(Variant::Svd).round, before + 1);
  EXPECT_EQ(agg.serve_model(Variant::Bpr).round, 0u);
}

TEST(Aggregator, AckStatuses) {
  Aggregator agg(config());
  EXPECT_EQ(agg.submit_update(update("a", {{1, {0.1, 0.1}}})).status, AckStatus::Accepted);
  agg.aggregate_round(Variant::Svd);

  const auto stale = agg.submit_update(update("a", {{1, {0.1, 0.1}}}, 0));
  EXPECT_EQ(stale.status, AckStatus::Stale);
  EXPECT_EQ(stale.round, 1u);
  EXPECT_EQ(agg.pending_updates(Variant::Svd), 0u);

  const auto wide = agg.submit_update(update("a", {{1, {0.1, 0.1, 0.1}}}, 1));
  EXPECT_EQ(wide.status, AckStatus::Invalid);
  EXPECT_NE(wide.reason.find("dimension mismatch"), std::string::npos);

  const auto unknown = agg.submit_update(update("a", {{99, {0.1, 0.1}}}, 1));
  EXPECT_EQ(unknown.status, AckStatus::Invalid);
  EXPECT_NE(unknown.reason.find("99"), std::string::npos);

  EXPECT_EQ(agg.submit_update(update("a", {{1, {NAN, 0.0}}}, 1)).status, AckStatus::Invalid);
  EXPECT_EQ(agg.submit_update(update("a", {{1, {0.0, 0.0}}}, 7)).status, AckStatus::Invalid);
  EXPECT_EQ(agg.submit_update(update("", {{1, {0.0, 0.0}}}, 1)).status, AckStatus::Invalid);
  EXPECT_EQ(agg.pending_updates(Variant::Svd), 0u);
}

TEST(Aggregator, NothingToAggregate) {
  Aggregator agg(config());
  try {
    agg.aggregate_round(Variant::Svd);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "nothing to aggregate");
  }
}

TEST(Aggregator, SingleUpdateAppliedExactly) {
  Aggregator agg(config());
  const auto before = agg.model(Variant::Svd);
  agg.submit_update(update("a", {{3, {0.25, -0.5}}}));
  agg.aggregate_round(Variant::Svd);
  const auto after = agg.model(Variant::Svd);
  EXPECT_EQ(after.factors(3)[0], before.factors(3)[0] + 0.25);
  EXPECT_EQ(after.factors(3)[1], before.factors(3)[1] - 0.5);
  for (ItemId id = 0; id < 10; ++id) {
    if (id == 3) continue;
    EXPECT_EQ(std::vector<double>(after.factors(id).begin(), after.factors(id).end()),
              std::vector<double>(before.factors(id).begin(), before.factors(id).end()));
  }
}

TEST(Aggregator, OppositeDeltasCancel) {
  Aggregator agg(config());
  const auto before = agg.model(Variant::Svd);
  agg.submit_update(update("a", {{4, {0.5, -2.0}}}));
  agg.submit_update(update("b", {{4, {-0.5, 2.0}}}));
  agg.aggregate_round(Variant::Svd);
  auto q = agg.model(Variant::Svd).factors(4);
  EXPECT_EQ(q[0], before.factors(4)[0]);
  EXPECT_EQ(q[1], before.factors(4)[1]);
}

TEST(Aggregator, MeanOverContributorsOnly) {
  AggregatorConfig c = config();
  Aggregator agg(c);
  const auto before = agg.model(Variant::Svd);
  agg.submit_update(update("A", {{3, {1.0, 1.0}}}));
  agg.submit_update(update("B", {{3, {3.0, 3.0}}, {5, {2.0, 0.0}}}));
  agg.aggregate_round(Variant::Svd);
  const auto after = agg.model(Variant::Svd);
  EXPECT_DOUBLE_EQ(after.factors(3)[0] - before.factors(3)[0], 2.0);
  EXPECT_DOUBLE_EQ(after.factors(3)[1] - before.factors(3)[1], 2.0);
  EXPECT_DOUBLE_EQ(after.factors(5)[0] - before.factors(5)[0], 2.0);
  EXPECT_DOUBLE_EQ(after.factors(5)[1] - before.factors(5)[1], 0.0);
}

TEST(Aggregator, LatestUpdatePerParticipantWins) {
  Aggregator agg(config());
  const auto before = agg.model(Variant::Svd);
  agg.submit_update(update("a", {{1, {9.0, 9.0}}}));
  agg.submit_update(update("a", {{1, {1.0, 1.0}}}));
  EXPECT_EQ(agg.pending_updates(Variant::Svd), 1u);
  agg.aggregate_round(Variant::Svd);
  EXPECT_EQ(agg.model(Variant::Svd).factors(1)[0], before.factors(1)[0] + 1.0);
}

TEST(AggregatorProperty, LinearityAgainstBruteForceMean) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + trial % 4;
    Aggregator agg(config(k, 6, static_cast<std::uint64_t>(trial)));
    const auto before = agg.model(Variant::Bpr);
    const int clients = std::uniform_int_distribution<int>(1, 8)(rng);
    std::map<ItemId, std::vector<std::vector<double>>> sent;
    for (int c = 0; c < clients; ++c) {
      ItemDeltas d;
      for (ItemId id = 0; id < 6; ++id) {
        if (std::bernoulli_distribution(0.5)(rng)) {
          d[id] = testing::random_vector(rng, static_cast<std::size_t>(k));
          sent[id].push_back(d[id]);
        }
      }
      agg.submit_update(update("c" + std::to_string(c), d, 0, Variant::Bpr));
    }
    if (agg.pending_updates(Variant::Bpr) == 0) continue;
    agg.aggregate_round(Variant::Bpr);
    const auto after = agg.model(Variant::Bpr);
    for (ItemId id = 0; id < 6; ++id) {
      for (int f = 0; f < k; ++f) {
        double expect = before.factors(id)[f];
        if (sent.contains(id)) {
          double s = 0.0;
          for (const auto& v : sent[id]) s += v[f];
          expect += s / static_cast<double>(sent[id].size());
        }
        ASSERT_NEAR(after.factors(id)[f], expect, 1e-12);
      }
    }
  }
}

TEST(Aggregator, ServerSideNoiseIsSeededAndApplied) {
  auto c = config();
  c.dp.aggregator_side = true;
  c.dp.clip_norm = 1.0;
  c.dp.noise_sigma = 0.5;
  c.dp.rng_seed = 3;
  auto run = [&] {
    Aggregator agg(c);
    agg.submit_update(update("a", {{1, {10.0, 0.0}}}));
    agg.aggregate_round(Variant::Svd);
    return agg.model(Variant::Svd);
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  const auto base = init_model(10, 2, 5);
  // Clipped to norm 1 before noise, so nowhere near the raw +10.
  EXPECT_LT(std::abs(a.factors(1)[0] - base.factors(1)[0]), 5.0);
  EXPECT_NE(a.factors(1)[1], base.factors(1)[1]);
}

TEST(Aggregator, ConcurrentSubmitsAndServes) {
  Aggregator agg(config(4, 50));
  std::vector<std::thread> threads;
  std::atomic<int> accepted{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) {
        agg.serve_model(Variant::Svd);
        ItemDeltas d{{static_cast<ItemId>((t * 25 + i) % 50), {0.01, 0.01, 0.01, 0.01}}};
        if (agg.submit_update(update("p" + std::to_string(t) + "-" + std::to_string(i), d)).status ==
            AckStatus::Accepted) {
          ++accepted;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(accepted.load(), 200);
  EXPECT_EQ(agg.pending_updates(Variant::Svd), 200u);
  EXPECT_EQ(agg.aggregate_round(Variant::Svd), 1u);
}

TEST(Telemetry, AcceptsRejectsAndDedupes) {
  Aggregator agg(config());
  EXPECT_EQ(agg.submit_telemetry(session("a", 1)).status, AckStatus::Accepted);
  EXPECT_EQ(agg.submit_telemetry(session("a", 1)).status, AckStatus::Accepted);
  EXPECT_EQ(agg.telemetry().size(), 1u);

  auto bad = session("a", 2);
  bad.clicks.push_back({42, ListSide::A, 1, 0});
  EXPECT_EQ(agg.submit_telemetry(bad).status, AckStatus::Invalid);
  EXPECT_EQ(agg.telemetry().size(), 1u);
}

TEST(Telemetry, LogSurvivesRestart) {
  const auto dir = std::filesystem::temp_directory_path() / "fedflex-telemetry-test";
  std::filesystem::remove_all(dir);
  auto c = config();
  c.telemetry_log = dir / "log.ndjson";
  {
    Aggregator agg(c);
    agg.submit_telemetry(session("a", 1));
    agg.submit_telemetry(session("b", 1));
  }
  Aggregator again(c);
  EXPECT_EQ(again.telemetry().size(), 2u);
  again.submit_telemetry(session("a", 1));
  EXPECT_EQ(again.telemetry().size(), 2u);
  std::ifstream in(c.telemetry_log);
  EXPECT_EQ(read_telemetry_log(in).size(), 2u);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace fedflex
