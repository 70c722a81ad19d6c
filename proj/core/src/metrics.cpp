#include "fedflex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

#include "csv.hpp"

namespace fedflex {

namespace {

constexpr double kCutoff = 5.0;

void require_sessions(std::span<const SessionRecord> sessions) {
  if (sessions.empty()) throw std::invalid_argument("metric needs at least one session");
}

// Distinct clicked positions on `side` within the top 5, ascending.
std::vector<int> clicked_positions(const SessionRecord& rec, ListSide side) {
  std::set<ItemId> seen;
  std::vector<int> out;
  for (const auto& c : rec.clicks) {
    if (c.source_list != side || c.position < 1 || c.position > static_cast<int>(kCutoff)) continue;
    if (seen.insert(c.item_id).second) out.push_back(c.position);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double ctr(std::span<const SessionRecord> sessions, ListSide side) {
  require_sessions(sessions);
  std::size_t clicks = 0;
  for (const auto& s : sessions) clicks += clicked_positions(s, side).size();
  return static_cast<double>(clicks) / (kCutoff * static_cast<double>(sessions.size()));
}

double precision_at_5(std::span<const SessionRecord> sessions, ListSide side) {
  require_sessions(sessions);
  double sum = 0.0;
  for (const auto& s : sessions) sum += static_cast<double>(clicked_positions(s, side).size()) / kCutoff;
  return sum / static_cast<double>(sessions.size());
}

double ndcg_at_5(std::span<const SessionRecord> sessions, ListSide side) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& s : sessions) {
    const auto positions = clicked_positions(s, side);
    if (positions.empty()) continue;
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      dcg += 1.0 / std::log2(static_cast<double>(positions[i]) + 1.0);
      idcg += 1.0 / std::log2(static_cast<double>(i + 1) + 1.0);
    }
    sum += dcg / idcg;
    ++counted;
  }
  if (counted == 0) throw std::domain_error("nDCG@5 undefined: no session has a click");
  return sum / static_cast<double>(counted);
}

double mrr(std::span<const SessionRecord> sessions, ListSide side) {
  require_sessions(sessions);
  double sum = 0.0;
  for (const auto& s : sessions) {
    const auto positions = clicked_positions(s, side);
    if (!positions.empty()) sum += 1.0 / static_cast<double>(positions.front());
  }
  return sum / static_cast<double>(sessions.size());
}

double ild(std::span<const ItemId> list, const EmbeddingTable& embeddings) {
  if (list.empty()) throw std::invalid_argument("ILD needs a non-empty list");
  std::vector<std::span<const double>> emb;
  for (ItemId id : list) emb.push_back(embeddings.at(id));
  if (list.size() == 1) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    for (std::size_t j = i + 1; j < emb.size(); ++j) sum += 1.0 - cosine_sim(emb[i], emb[j]);
  }
  const double n = static_cast<double>(list.size());
  return 2.0 * sum / (n * (n - 1.0));
}

double coverage_ratio(std::size_t unique_clicked, std::size_t unique_shown) {
  if (unique_shown == 0) throw std::invalid_argument("coverage ratio needs at least one shown item");
  return static_cast<double>(unique_clicked) / static_cast<double>(unique_shown);
}

namespace {

std::pair<std::set<ItemId>, std::set<ItemId>> shown_and_clicked(std::span<const SessionRecord> sessions,
                                                                  ListSide side) {
  std::set<ItemId> shown, clicked;
  for (const auto& s : sessions) {
    const auto& list = s.list(side);
    shown.insert(list.begin(), list.end());
    for (const auto& c : s.clicks) {
      if (c.source_list == side) clicked.insert(c.item_id);
    }
  }
  return {shown, clicked};
}

}  // namespace

double coverage_ratio(std::span<const SessionRecord> sessions, ListSide side) {
  require_sessions(sessions);
  auto [shown, clicked] = shown_and_clicked(sessions, side);
  return coverage_ratio(clicked.size(), shown.size());
}

MetricReport compute_report(std::span<const SessionRecord> sessions, const EmbeddingTable& embeddings) {
  MetricReport report;
  for (auto variant : kAllVariants) {
    std::vector<SessionRecord> subset;
    for (const auto& s : sessions) {
      if (s.variant == variant) subset.push_back(s);
    }
    if (subset.empty()) continue;
    for (auto side : {ListSide::A, ListSide::B}) {
      ListMetrics m;
      m.sessions = subset.size();
      m.ctr = ctr(subset, side);
      m.p_at_5 = precision_at_5(subset, side);
      try {
        m.ndcg_at_5 = ndcg_at_5(subset, side);
      } catch (const std::domain_error&) {
        m.ndcg_at_5 = std::numeric_limits<double>::quiet_NaN();
      }
      m.mrr = mrr(subset, side);
      auto [shown, clicked] = shown_and_clicked(subset, side);
      m.unique_recommended = shown.size();
      m.unique_clicked = clicked.size();
      m.coverage_ratio = shown.empty() ? 0.0 : coverage_ratio(clicked.size(), shown.size());
      double ild_sum = 0.0;
      std::size_t ild_n = 0;
      for (const auto& s : subset) {
        const auto& list = s.list(side);
        if (list.empty()) continue;
        ild_sum += ild(list, embeddings);
        ++ild_n;
      }
      m.ild = ild_n ? ild_sum / static_cast<double>(ild_n) : 0.0;
      report.entries.emplace(std::make_pair(variant, side), m);
    }
  }
  return report;
}

Json report_to_json(const MetricReport& report) {
  Json out = Json::array();
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  for (const auto& [key, m] : report.entries) {
    out.push_back({{"variant", to_string(key.first)},
                   {"list", to_string(key.second)},
                   {"ctr", num(m.ctr)},
                   {"p_at_5", num(m.p_at_5)},
                   {"ndcg_at_5", num(m.ndcg_at_5)},
                   {"mrr", num(m.mrr)},
                   {"ild", num(m.ild)},
                   {"coverage_ratio", num(m.coverage_ratio)},
                   {"sessions", m.sessions},
                   {"unique_recommended", m.unique_recommended},
                   {"unique_clicked", m.unique_clicked}});
  }
  return out;
}

std::vector<GenreCount> genre_distribution(std::span<const SessionRecord> sessions, const Catalog& catalog) {
  std::map<std::tuple<Variant, ListSide, std::string>, std::size_t> counts;
  for (const auto& s : sessions) {
    for (auto side : {ListSide::A, ListSide::B}) {
      for (ItemId id : s.list(side)) {
        const auto* item = catalog.find(id);
        if (!item) {
          ++counts[{s.variant, side, "Unknown"}];
          continue;
        }
        for (const auto& g : item->genres) ++counts[{s.variant, side, g}];
      }
    }
  }
  std::vector<GenreCount> out;
  for (const auto& [key, n] : counts) out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), n});
  return out;
}

void write_genre_csv(std::ostream& out, std::span<const GenreCount> rows) {
  out << "variant,list,genre,count\n";
  for (const auto& r : rows) {
    out << to_string(r.variant) << ',' << to_string(r.list) << ',' << csv::quote(r.genre) << ',' << r.count << '\n';
  }
}

}  // namespace fedflex
