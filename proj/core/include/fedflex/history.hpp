#pragma once

#include <chrono>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fedflex/catalog.hpp"

namespace fedflex {

/// One row of a viewing-activity export.
struct ViewingEvent {
  std::string raw_title;
  std::chrono::year_month_day watch_date;
};

struct HistoryParseResult {
  std::vector<ViewingEvent> events;
  std::size_t failures = 0;
};

/// Parses a `Title,Date` export. The header row is skipped, malformed rows
/// are counted in `failures`. Throws ParseError if the stream is unreadable.
HistoryParseResult parse_history(std::istream& in);
HistoryParseResult parse_history_file(const std::filesystem::path& path);

/// MM/DD/YYYY first, DD-MM-YYYY as a fallback.
std::optional<std::chrono::year_month_day> parse_watch_date(std::string_view text);
std::string format_watch_date(std::chrono::year_month_day date);

struct TitleMatch {
  ItemId item_id = 0;
  bool is_episode = false;
};

/// Exact, case-insensitive title lookup over a catalog. When two catalog
/// titles collide the lower item_id wins.
class TitleIndex {
 public:
  explicit TitleIndex(const Catalog& catalog);
  std::optional<TitleMatch> resolve(std::string_view raw_title) const;

 private:
  std::unordered_map<std::string, ItemId> by_title_;
};

std::optional<TitleMatch> resolve_title(std::string_view raw_title, const Catalog& catalog);

/// Private star ratings derived from viewing history. Deliberately has no
/// JSON conversion: it must never be placed in a wire message.
struct RatingVector {
  std::string owner;
  std::map<ItemId, int> ratings;

  bool empty() const { return ratings.empty(); }
  std::size_t size() const { return ratings.size(); }
};

inline constexpr int kMovieRating = 1;
inline constexpr int kWindowDays = 7;

/// Largest number of events falling in any window of `window_days`
/// consecutive calendar days (both ends inclusive).
int max_events_in_window(std::vector<std::chrono::sys_days> dates, int window_days = kWindowDays);

/// Maps series engagement to stars: >=3 in a week -> 5, 2 -> 4,
/// 1 per week but >=2 overall -> 3, a single episode ever -> 2.
int series_rating(int max_in_window, int total_episodes);

RatingVector derive_ratings(std::span<const ViewingEvent> events, const Catalog& catalog,
                            std::string owner = {});

/// Number of events whose title does not resolve against the catalog.
std::size_t count_unresolved(std::span<const ViewingEvent> events, const Catalog& catalog);

}  // namespace fedflex
