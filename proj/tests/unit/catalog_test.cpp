#include <gtest/gtest.h>

#include <sstream>

#include "fedflex/catalog.hpp"
#include "test_support.hpp"

namespace fedflex {
namespace {

const std::filesystem::path kFixtures{FEDFLEX_FIXTURES_DIR};

TEST(Catalog, HeaderOnlyStreamIsEmpty) {
  std::istringstream in("item_id,title,genres,kind,image_url\n");
  EXPECT_TRUE(load_catalog(in, CatalogFormat::Csv).empty());
  std::istringstream json("[]");
  EXPECT_TRUE(load_catalog(json, CatalogFormat::Json).empty());
}

TEST(Catalog, RowsAreOrderedById) {
  std::istringstream in(
      "item_id,title,genres,kind,image_url\n"
      "2,C,Drama,series,\n"
      "0,A,Drama,series,\n"
      "1,B,Drama,movie,\n");
  const auto ids = load_catalog(in, CatalogFormat::Csv).ids();
  EXPECT_EQ(ids, (std::vector<ItemId>{0, 1, 2}));
}

TEST(Catalog, DuplicateIdNamesTheId) {
  std::istringstream in(
      "item_id,title,genres,kind,image_url\n"
      "7,A,Drama,series,\n"
      "7,B,Drama,series,\n");
  try {
    load_catalog(in, CatalogFormat::Csv);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_STREQ(e.what(), "duplicate item_id 7");
  }
}

TEST(Catalog, UnknownKindIsRejected) {
  std::istringstream in("item_id,title,genres,kind,image_url\n1,A,Drama,documentary,\n");
  EXPECT_THROW(load_catalog(in, CatalogFormat::Csv), ParseError);
}

TEST(Catalog, NegativeIdIsRejected) {
  std::istringstream in("item_id,title,genres,kind,image_url\n-1,A,Drama,series,\n");
  EXPECT_THROW(load_catalog(in, CatalogFormat::Csv), ParseError);
}

TEST(Catalog, MissingGenresFallBackToUnknown) {
  std::istringstream in("item_id,title,genres,kind,image_url\n3,A,,series,\n");
  const auto cat = load_catalog(in, CatalogFormat::Csv);
  EXPECT_EQ(cat.at(3).genres, std::vector<std::string>{"Unknown"});
}

TEST(Catalog, CsvAndJsonFixturesAgree) {
  const auto csv = load_catalog_file(kFixtures / "catalog.csv");
  const auto json = load_catalog_file(kFixtures / "catalog.json");
  ASSERT_EQ(csv.size(), 3u);
  ASSERT_EQ(json.size(), 3u);
  for (std::size_t i = 0; i < csv.size(); ++i) {
    const auto& a = csv.items()[i];
    const auto& b = json.items()[i];
    EXPECT_EQ(a.item_id, b.item_id);
    EXPECT_EQ(a.title, b.title);
    EXPECT_EQ(a.genres, b.genres);
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.image_url, b.image_url);
  }
  EXPECT_EQ(csv.at(0).genres, (std::vector<std::string>{"Drama", "Comedy"}));
  EXPECT_EQ(csv.at(2).genres, std::vector<std::string>{"Thriller"});
  EXPECT_EQ(csv.at(1).title, "Show B, The Sequel");
  EXPECT_EQ(csv.at(2).kind, ItemKind::Movie);
}

TEST(Catalog, CsvRoundTrip) {
  const auto original = load_catalog_file(kFixtures / "catalog.csv");
  std::stringstream buf;
  write_catalog_csv(buf, original);
  const auto again = load_catalog(buf, CatalogFormat::Csv);
  ASSERT_EQ(again.size(), original.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again.items()[i].title, original.items()[i].title);
    EXPECT_EQ(again.items()[i].genres, original.items()[i].genres);
  }
}

TEST(Catalog, LookupOfMissingIdThrows) {
  const auto cat = testing::numbered_catalog(3);
  EXPECT_EQ(cat.find(9), nullptr);
  EXPECT_THROW(cat.at(9), UnknownItemError);
}

}  // namespace
}  // namespace fedflex
