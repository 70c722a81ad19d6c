#include "fedflex/history.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "csv.hpp"

namespace fedflex {

namespace chr = std::chrono;

namespace {

// Splits `text` on `sep` into exactly three integer fields.
bool split_date(std::string_view text, char sep, int& a, int& b, int& c) {
  int* out[3] = {&a, &b, &c};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    std::size_t end = (i == 2) ? text.size() : text.find(sep, start);
    if (end == std::string_view::npos || end == start) return false;
    auto part = text.substr(start, end - start);
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), *out[i]);
    if (ec != std::errc() || ptr != part.data() + part.size()) return false;
    start = end + 1;
  }
  return true;
}

std::optional<chr::year_month_day> make_date(int y, int m, int d) {
  if (y < 1000 || y > 9999) return std::nullopt;
  chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)}, chr::day{static_cast<unsigned>(d)}};
  if (m < 1 || d < 1 || !ymd.ok()) return std::nullopt;
  return ymd;
}

bool has_episode_marker(std::string_view suffix) {
  const std::string lower = csv::to_lower(suffix);
  return lower.find("season") != std::string::npos || lower.find("episode") != std::string::npos;
}

}  // namespace

std::optional<chr::year_month_day> parse_watch_date(std::string_view text) {
  const std::string t = csv::trim(text);
  int a = 0, b = 0, c = 0;
  if (split_date(t, '/', a, b, c)) return make_date(c, a, b);
  if (split_date(t, '-', a, b, c)) return make_date(c, b, a);
  return std::nullopt;
}

std::string format_watch_date(chr::year_month_day date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", static_cast<unsigned>(date.month()),
                static_cast<unsigned>(date.day()), static_cast<int>(date.year()));
  return buf;
}

HistoryParseResult parse_history(std::istream& in) {
  if (!in) throw ParseError("history stream is not readable");
  HistoryParseResult result;
  std::vector<std::string> fields;
  auto status = csv::read_record(in, fields);
  if (status == csv::ReadStatus::End) return result;
  while ((status = csv::read_record(in, fields)) != csv::ReadStatus::End) {
    if (status == csv::ReadStatus::Malformed) {
      ++result.failures;
      continue;
    }
    if (fields.size() == 1 && csv::trim(fields[0]).empty()) continue;
    if (fields.size() != 2 || fields[0].empty()) {
      ++result.failures;
      continue;
    }
    auto date = parse_watch_date(fields[1]);
    if (!date) {
      ++result.failures;
      continue;
    }
    result.events.push_back({fields[0], *date});
  }
  if (in.bad()) throw ParseError("error while reading history stream");
  return result;
}

HistoryParseResult parse_history_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open viewing history " + path.string());
  return parse_history(in);
}

TitleIndex::TitleIndex(const Catalog& catalog) {
  // Catalog is id-ordered, so try_emplace keeps the lowest id on collisions.
  for (const auto& item : catalog.items()) by_title_.try_emplace(csv::to_lower(item.title), item.item_id);
}

std::optional<TitleMatch> TitleIndex::resolve(std::string_view raw_title) const {
  std::string_view name = raw_title;
  bool episode = false;
  if (auto sep = raw_title.find(": "); sep != std::string_view::npos && has_episode_marker(raw_title.substr(sep + 2))) {
    name = raw_title.substr(0, sep);
    episode = true;
  }
  auto it = by_title_.find(csv::to_lower(csv::trim(name)));
  if (it == by_title_.end()) return std::nullopt;
  return TitleMatch{it->second, episode};
}

std::optional<TitleMatch> resolve_title(std::string_view raw_title, const Catalog& catalog) {
  return TitleIndex(catalog).resolve(raw_title);
}

int max_events_in_window(std::vector<chr::sys_days> dates, int window_days) {
  std::sort(dates.begin(), dates.end());
  int best = 0;
  std::size_t lo = 0;
  for (std::size_t hi = 0; hi < dates.size(); ++hi) {
    while ((dates[hi] - dates[lo]).count() >= window_days) ++lo;
    best = std::max(best, static_cast<int>(hi - lo + 1));
  }
  return best;
}

int series_rating(int max_in_window, int total_episodes) {
  if (max_in_window >= 3) return 5;
  if (max_in_window == 2) return 4;
  if (total_episodes >= 2) return 3;
  return 2;
}

RatingVector derive_ratings(std::span<const ViewingEvent> events, const Catalog& catalog, std::string owner) {
  const TitleIndex index(catalog);
  std::map<ItemId, std::vector<chr::sys_days>> watched;
  for (const auto& ev : events) {
    if (auto match = index.resolve(ev.raw_title)) watched[match->item_id].push_back(chr::sys_days{ev.watch_date});
  }
  RatingVector out{std::move(owner), {}};
  for (auto& [id, dates] : watched) {
    if (catalog.at(id).kind == ItemKind::Movie) {
      out.ratings[id] = kMovieRating;
    } else {
      const int total = static_cast<int>(dates.size());
      out.ratings[id] = series_rating(max_events_in_window(std::move(dates)), total);
    }
  }
  return out;
}

std::size_t count_unresolved(std::span<const ViewingEvent> events, const Catalog& catalog) {
  const TitleIndex index(catalog);
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [&](const auto& ev) { return !index.resolve(ev.raw_title); }));
}

}  // namespace fedflex
