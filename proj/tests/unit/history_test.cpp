#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <type_traits>

#include "fedflex/history.hpp"
#include "fedflex/json.hpp"
#include "test_support.hpp"

namespace fedflex {
namespace {

using testing::episode;
using testing::jan;

const std::filesystem::path kFixtures{FEDFLEX_FIXTURES_DIR};

// Ratings must not be convertible to a JSON value under any overload.
static_assert(!std::is_constructible_v<Json, const RatingVector&>);
static_assert(!std::is_constructible_v<Json, const ViewingEvent&>);

TEST(ParseHistory, HeaderOnly) {
  std::istringstream in("Title,Date\n");
  const auto r = parse_history(in);
  EXPECT_TRUE(r.events.empty());
  EXPECT_EQ(r.failures, 0u);
}

TEST(ParseHistory, TitleKeptVerbatim) {
  std::istringstream in("Title,Date\n\"Show A: Season 1: Pilot\",\"01/02/2024\"\n");
  const auto r = parse_history(in);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].raw_title, "Show A: Season 1: Pilot");
  EXPECT_EQ(r.events[0].watch_date, testing::day(2024, 1, 2));
}

TEST(ParseHistory, BadDateCountsAsFailure) {
  std::istringstream in("Title,Date\n\"X\",\"yesterday\"\n");
  const auto r = parse_history(in);
  EXPECT_TRUE(r.events.empty());
  EXPECT_EQ(r.failures, 1u);
}

TEST(ParseHistory, Fixture) {
  const auto r = parse_history_file(kFixtures / "history.csv");
  ASSERT_EQ(r.events.size(), 6u);
  EXPECT_EQ(r.failures, 1u);
  EXPECT_EQ(r.events[3].raw_title, "Show B, The Sequel: Season 2: Finale");
  EXPECT_EQ(r.events[3].watch_date, testing::day(2024, 3, 15));  // DD-MM-YYYY fallback
}

TEST(ParseHistory, MissingFileThrows) {
  EXPECT_THROW(parse_history_file(kFixtures / "no-such-file.csv"), ParseError);
}

TEST(WatchDate, Formats) {
  EXPECT_EQ(parse_watch_date("12/31/2023"), testing::day(2023, 12, 31));
  EXPECT_EQ(parse_watch_date("31-12-2023"), testing::day(2023, 12, 31));
  EXPECT_FALSE(parse_watch_date("02/30/2024"));
  EXPECT_FALSE(parse_watch_date("13/01/2024"));
  EXPECT_FALSE(parse_watch_date(""));
  EXPECT_EQ(format_watch_date(testing::day(2024, 2, 9)), "02/09/2024");
}

TEST(ResolveTitle, EpisodeSuffixIsStripped) {
  const Catalog cat({testing::series(4, "X"), testing::movie(5, "Standalone Film")});
  const auto m = resolve_title("X: Season 2: Finale", cat);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->item_id, 4);
  EXPECT_TRUE(m->is_episode);

  const auto film = resolve_title("Standalone Film", cat);
  ASSERT_TRUE(film);
  EXPECT_EQ(film->item_id, 5);
  EXPECT_FALSE(film->is_episode);

  EXPECT_FALSE(resolve_title("Nonexistent", cat));
}

TEST(ResolveTitle, CaseInsensitiveAndColonInName) {
  const Catalog cat({testing::series(1, "Star Trek: Discovery")});
  EXPECT_EQ(resolve_title("star trek: discovery", cat)->item_id, 1);
  // The split happens at the first separator only, so a colon inside the
  // series name leaves its episodes unmatched.
  EXPECT_FALSE(resolve_title("Star Trek: Discovery: Episode 3", cat));
}

TEST(DeriveRatings, ThreeEpisodesInAWeek) {
  const Catalog cat({testing::series(0, "S")});
  const std::vector<ViewingEvent> ev{episode("S", 1, 0), episode("S", 2, 2), episode("S", 3, 5)};
  EXPECT_EQ(derive_ratings(ev, cat).ratings.at(0), 5);
}

TEST(DeriveRatings, MovieGetsLowDefault) {
  const Catalog cat({testing::movie(9, "Film")});
  const std::vector<ViewingEvent> ev{{"Film", jan(0)}};
  EXPECT_EQ(derive_ratings(ev, cat).ratings.at(9), kMovieRating);
  EXPECT_EQ(kMovieRating, 1);
}

TEST(DeriveRatings, SpreadOutEpisodes) {
  const Catalog cat({testing::series(0, "S")});
  const std::vector<ViewingEvent> ev{episode("S", 1, 0), episode("S", 2, 9), episode("S", 3, 19)};
  const std::vector<int> days{1, 10, 20};
  ASSERT_EQ(testing::brute_force_window(days), 1);
  EXPECT_EQ(derive_ratings(ev, cat).ratings.at(0), 3);
}

TEST(DeriveRatings, BucketTable) {
  EXPECT_EQ(series_rating(3, 3), 5);
  EXPECT_EQ(series_rating(7, 9), 5);
  EXPECT_EQ(series_rating(2, 2), 4);
  EXPECT_EQ(series_rating(1, 2), 3);
  EXPECT_EQ(series_rating(1, 1), 2);
}

TEST(DeriveRatings, WindowEndsAreInclusive) {
  EXPECT_EQ(max_events_in_window({std::chrono::sys_days{jan(0)}, std::chrono::sys_days{jan(6)}}), 2);
  EXPECT_EQ(max_events_in_window({std::chrono::sys_days{jan(0)}, std::chrono::sys_days{jan(7)}}), 1);
}

TEST(DeriveRatings, UnresolvedEventsAreCountedNotRated) {
  const Catalog cat({testing::series(0, "S")});
  const std::vector<ViewingEvent> ev{episode("S", 1, 0), {"Other", jan(1)}, {"Another: Season 1: Episode 1", jan(2)}};
  const auto r = derive_ratings(ev, cat, "p1");
  EXPECT_EQ(r.owner, "p1");
  EXPECT_EQ(r.size(), 1u);
  EXPECT_EQ(count_unresolved(ev, cat), 2u);
}

TEST(DeriveRatings, Fixture) {
  const auto cat = load_catalog_file(kFixtures / "catalog.csv");
  const auto hist = parse_history_file(kFixtures / "history.csv");
  const auto r = derive_ratings(hist.events, cat);
  EXPECT_EQ(r.ratings, (std::map<ItemId, int>{{0, 5}, {1, 2}, {2, 1}}));
}

TEST(DeriveRatingsProperty, WindowMatchesBruteForce) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = std::uniform_int_distribution<int>(0, 100)(rng);
    const int span = std::uniform_int_distribution<int>(1, 400)(rng);
    std::vector<int> days;
    std::vector<std::chrono::sys_days> dates;
    for (int i = 0; i < n; ++i) {
      days.push_back(std::uniform_int_distribution<int>(0, span)(rng));
      dates.push_back(std::chrono::sys_days{jan(days.back())});
    }
    ASSERT_EQ(max_events_in_window(dates), testing::brute_force_window(days)) << "trial " << trial;
  }
}

TEST(DeriveRatingsProperty, AddingAnEpisodeNeverLowersTheRating) {
  const Catalog cat({testing::series(0, "S"), testing::series(1, "T")});
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ViewingEvent> ev;
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    for (int i = 0; i < n; ++i) ev.push_back(episode("S", i, std::uniform_int_distribution<int>(0, 60)(rng)));
    const int before = derive_ratings(ev, cat).ratings.at(0);
    ev.push_back(episode("S", n, std::uniform_int_distribution<int>(0, 60)(rng)));
    const int after = derive_ratings(ev, cat).ratings.at(0);
    ASSERT_GE(after, before);
    ASSERT_GE(after, 1);
    ASSERT_LE(after, 5);
  }
}

}  // namespace
}  // namespace fedflex
