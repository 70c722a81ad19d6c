#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedflex/catalog.hpp"
#include "fedflex/embedding.hpp"
#include "fedflex/protocol.hpp"

namespace fedflex {

// Clicks are de-duplicated per (session, item, list) throughout. Lists are
// scored against a fixed cutoff of 5 shown items.

/// Clicks on `side` / (5 * sessions). Throws std::invalid_argument on no sessions.
double ctr(std::span<const SessionRecord> sessions, ListSide side);
/// Mean over sessions of distinct clicked / 5.
double precision_at_5(std::span<const SessionRecord> sessions, ListSide side);
/// Mean binary-gain nDCG@5 over sessions with at least one click. Throws
/// std::domain_error if no session has a click on `side`.
double ndcg_at_5(std::span<const SessionRecord> sessions, ListSide side);
/// Mean reciprocal of the best clicked position; zero-click sessions add 0.
double mrr(std::span<const SessionRecord> sessions, ListSide side);
/// Mean pairwise (1 - cosine); 0 for a single item.
double ild(std::span<const ItemId> list, const EmbeddingTable& embeddings);
/// Unique items clicked / unique items shown on `side` across sessions.
double coverage_ratio(std::span<const SessionRecord> sessions, ListSide side);
double coverage_ratio(std::size_t unique_clicked, std::size_t unique_shown);

struct ListMetrics {
  double ctr = 0.0;
  double p_at_5 = 0.0;
  double ndcg_at_5 = 0.0;  // NaN when undefined (no clicks)
  double mrr = 0.0;
  double ild = 0.0;
  double coverage_ratio = 0.0;
  std::size_t sessions = 0;
  std::size_t unique_recommended = 0;
  std::size_t unique_clicked = 0;
};

struct MetricReport {
  std::map<std::pair<Variant, ListSide>, ListMetrics> entries;
};

/// Metrics for every (variant, list) pair present in `sessions`.
MetricReport compute_report(std::span<const SessionRecord> sessions, const EmbeddingTable& embeddings);
Json report_to_json(const MetricReport& report);

struct GenreCount {
  Variant variant;
  ListSide list;
  std::string genre;
  std::size_t count;
};

/// Counts every shown (item, genre) pair per variant and list. Items not in
/// the catalog count under "Unknown".
std::vector<GenreCount> genre_distribution(std::span<const SessionRecord> sessions, const Catalog& catalog);
/// `variant,list,genre,count`
void write_genre_csv(std::ostream& out, std::span<const GenreCount> rows);

}  // namespace fedflex
