#include "fedflex/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "csv.hpp"
#include "fedflex/json.hpp"
#include "fedflex/privacy.hpp"

namespace fedflex {

EmbeddingTable::EmbeddingTable(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
}

void EmbeddingTable::insert(ItemId id, std::vector<double> v) {
  if (v.size() != static_cast<std::size_t>(dim_)) {
    throw std::invalid_argument("embedding for item " + std::to_string(id) + " has length " +
                                std::to_string(v.size()) + ", expected " + std::to_string(dim_));
  }
  const double norm = l2_norm(v);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("embedding for item " + std::to_string(id) + " is zero or not finite");
  }
  for (auto& x : v) x /= norm;
  vectors_.insert_or_assign(id, std::move(v));
}

std::span<const double> EmbeddingTable::at(ItemId id) const {
  auto it = vectors_.find(id);
  if (it == vectors_.end()) throw UnknownItemError(id, "embedding table");
  return it->second;
}

std::vector<double> embed_fallback(std::string_view title, int dim) {
  if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  const std::string padded = " " + csv::to_lower(title) + " ";
  if (!title.empty()) {
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      v[fnv1a(std::string_view(padded).substr(i, 3)) % static_cast<std::uint64_t>(dim)] += 1.0;
    }
  }
  const double norm = l2_norm(v);
  if (norm == 0.0) {
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= norm;
  return v;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_sim: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw std::invalid_argument("cosine_sim: zero vector");
  const double c = ab / (std::sqrt(aa) * std::sqrt(bb));
  return std::clamp(c, -1.0, 1.0);
}

EmbeddingTable load_embeddings(std::istream& in) {
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed embeddings JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("dim") || !doc["dim"].is_number_integer()) {
    throw ParseError("embeddings JSON needs an integer \"dim\" field");
  }
  EmbeddingTable table(doc["dim"].get<int>());
  for (const auto& [key, value] : doc.items()) {
    if (key == "dim") continue;
    ItemId id = 0;
    auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    if (ec != std::errc() || ptr != key.data() + key.size()) throw ParseError("embedding key '" + key + "' is not an item id");
    try {
      table.insert(id, value.get<std::vector<double>>());
    } catch (const Json::exception&) {
      throw ParseError("embedding for item " + key + " is not an array of numbers");
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what());
    }
  }
  return table;
}

EmbeddingTable fallback_embeddings(const Catalog& catalog, int dim) {
  EmbeddingTable table(dim);
  for (const auto& item : catalog.items()) table.insert(item.item_id, embed_fallback(item.title, dim));
  return table;
}

EmbeddingTable resolve_embeddings(const Catalog& catalog, const std::filesystem::path& path) {
  if (path.empty()) return fallback_embeddings(catalog);
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open embeddings " + path.string());
  EmbeddingTable table = load_embeddings(in);
  for (const auto& item : catalog.items()) {
    if (!table.contains(item.item_id)) table.insert(item.item_id, embed_fallback(item.title, table.dim()));
  }
  return table;
}

}  // namespace fedflex
