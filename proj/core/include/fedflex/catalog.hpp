#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedflex/types.hpp"

namespace fedflex {

enum class ItemKind { Series, Movie };

std::string_view to_string(ItemKind kind);
/// Accepts "series"/"movie" in any letter case; throws ParseError otherwise.
ItemKind parse_item_kind(std::string_view text);

struct CatalogItem {
  ItemId item_id = 0;
  std::string title;
  std::vector<std::string> genres;
  ItemKind kind = ItemKind::Series;
  std::string image_url;
};

enum class CatalogFormat { Csv, Json };

/// Immutable, id-ordered collection of catalog items.
class Catalog {
 public:
  Catalog() = default;
  /// Sorts by item_id. Throws ParseError on a duplicate id.
  explicit Catalog(std::vector<CatalogItem> items);

  std::span<const CatalogItem> items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  const CatalogItem* find(ItemId id) const;
  const CatalogItem& at(ItemId id) const;
  std::vector<ItemId> ids() const;

 private:
  std::vector<CatalogItem> items_;
};

/// Columns/fields: item_id, title, genres, kind, image_url. CSV genres are
/// '|'-separated; JSON genres are an array.
Catalog load_catalog(std::istream& in, CatalogFormat format);
/// Format is picked from the extension (.json, anything else is CSV).
Catalog load_catalog_file(const std::filesystem::path& path);

void write_catalog_csv(std::ostream& out, const Catalog& catalog);

}  // namespace fedflex
