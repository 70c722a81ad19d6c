#include "fedflex/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "fedflex/json.hpp"

namespace fedflex {

std::string_view to_string(ItemKind kind) { return kind == ItemKind::Series ? "series" : "movie"; }

ItemKind parse_item_kind(std::string_view text) {
  const std::string k = csv::to_lower(csv::trim(text));
  if (k == "series") return ItemKind::Series;
  if (k == "movie") return ItemKind::Movie;
  throw ParseError("unknown kind '" + std::string(text) + "'");
}

Catalog::Catalog(std::vector<CatalogItem> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(),
            [](const CatalogItem& a, const CatalogItem& b) { return a.item_id < b.item_id; });
  auto dup = std::adjacent_find(items_.begin(), items_.end(), [](const auto& a, const auto& b) {
    return a.item_id == b.item_id;
  });
  if (dup != items_.end()) throw ParseError("duplicate item_id " + std::to_string(dup->item_id));
}

const CatalogItem* Catalog::find(ItemId id) const {
  auto it = std::lower_bound(items_.begin(), items_.end(), id,
                             [](const CatalogItem& item, ItemId v) { return item.item_id < v; });
  return (it != items_.end() && it->item_id == id) ? &*it : nullptr;
}

const CatalogItem& Catalog::at(ItemId id) const {
  if (const auto* item = find(id)) return *item;
  throw UnknownItemError(id, "catalog");
}

std::vector<ItemId> Catalog::ids() const {
  std::vector<ItemId> out;
  out.reserve(items_.size());
  for (const auto& item : items_) out.push_back(item.item_id);
  return out;
}

namespace {

ItemId parse_id(std::string_view text) {
  const std::string t = csv::trim(text);
  ItemId id = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), id);
  if (ec != std::errc() || ptr != t.data() + t.size() || id < 0) {
    throw ParseError("invalid item_id '" + std::string(text) + "'");
  }
  return id;
}

std::vector<std::string> normalize_genres(std::vector<std::string> raw) {
  std::vector<std::string> out;
  for (auto& g : raw) {
    std::string t = csv::trim(g);
    if (!t.empty()) out.push_back(std::move(t));
  }
  if (out.empty()) out.emplace_back("Unknown");
  return out;
}

std::vector<std::string> split_genres(std::string_view text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('|', start);
    if (end == std::string_view::npos) end = text.size();
    parts.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

Catalog load_csv(std::istream& in) {
  std::vector<std::string> fields;
  auto status = csv::read_record(in, fields);
  if (status == csv::ReadStatus::End) return {};
  if (status == csv::ReadStatus::Malformed) throw ParseError("malformed catalog header");

  const std::vector<std::string> expected{"item_id", "title", "genres", "kind", "image_url"};
  std::vector<std::size_t> column(expected.size(), fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    auto name = csv::to_lower(csv::trim(fields[i]));
    for (std::size_t e = 0; e < expected.size(); ++e) {
      if (name == expected[e]) column[e] = i;
    }
  }
  for (std::size_t e = 0; e < 4; ++e) {
    if (column[e] == fields.size()) throw ParseError("catalog header lacks column " + expected[e]);
  }

  std::vector<CatalogItem> items;
  std::size_t line = 1;
  while ((status = csv::read_record(in, fields)) != csv::ReadStatus::End) {
    ++line;
    if (status == csv::ReadStatus::Malformed) throw ParseError("malformed catalog row " + std::to_string(line));
    if (fields.size() == 1 && csv::trim(fields[0]).empty()) continue;
    auto get = [&](std::size_t e) -> std::string {
      return column[e] < fields.size() ? fields[column[e]] : std::string{};
    };
    CatalogItem item;
    item.item_id = parse_id(get(0));
    item.title = csv::trim(get(1));
    item.genres = normalize_genres(split_genres(get(2)));
    item.kind = parse_item_kind(get(3));
    item.image_url = csv::trim(get(4));
    items.push_back(std::move(item));
  }
  return Catalog(std::move(items));
}

Catalog load_json(std::istream& in) {
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed catalog JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("catalog JSON must be an array");
  std::vector<CatalogItem> items;
  for (const auto& obj : doc) {
    try {
      CatalogItem item;
      const auto& id = obj.at("item_id");
      if (!id.is_number_integer() || id.get<ItemId>() < 0) throw ParseError("invalid item_id " + id.dump());
      item.item_id = id.get<ItemId>();
      item.title = csv::trim(obj.at("title").get<std::string>());
      const auto& genres = obj.at("genres");
      item.genres = normalize_genres(genres.is_string() ? split_genres(genres.get<std::string>())
                                                        : genres.get<std::vector<std::string>>());
      item.kind = parse_item_kind(obj.at("kind").get<std::string>());
      item.image_url = obj.value("image_url", std::string{});
      items.push_back(std::move(item));
    } catch (const Json::exception& e) {
      throw ParseError(std::string("malformed catalog entry: ") + e.what());
    }
  }
  return Catalog(std::move(items));
}

}  // namespace

Catalog load_catalog(std::istream& in, CatalogFormat format) {
  if (!in) throw ParseError("catalog stream is not readable");
  return format == CatalogFormat::Json ? load_json(in) : load_csv(in);
}

Catalog load_catalog_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open catalog " + path.string());
  auto ext = csv::to_lower(path.extension().string());
  return load_catalog(in, ext == ".json" ? CatalogFormat::Json : CatalogFormat::Csv);
}

void write_catalog_csv(std::ostream& out, const Catalog& catalog) {
  out << "item_id,title,genres,kind,image_url\n";
  for (const auto& item : catalog.items()) {
    std::string genres;
    for (std::size_t i = 0; i < item.genres.size(); ++i) {
      if (i) genres.push_back('|');
      genres += item.genres[i];
    }
    out << item.item_id << ',' << csv::quote(item.title) << ',' << csv::quote(genres) << ','
        << to_string(item.kind) << ',' << csv::quote(item.image_url) << '\n';
  }
}

}  // namespace fedflex
