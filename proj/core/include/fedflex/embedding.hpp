#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "fedflex/catalog.hpp"
#include "fedflex/types.hpp"

namespace fedflex {

inline constexpr int kFallbackEmbeddingDim = 256;

/// Unit-length embedding per item.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim = kFallbackEmbeddingDim);

  int dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(ItemId id) const { return vectors_.contains(id); }

  /// L2-normalizes `v`. Throws std::invalid_argument on a length mismatch
  /// or a zero/non-finite vector.
  void insert(ItemId id, std::vector<double> v);
  /// Throws UnknownItemError.
  std::span<const double> at(ItemId id) const;

 private:
  int dim_;
  std::map<ItemId, std::vector<double>> vectors_;
};

/// Hashed character-trigram counts of the lower-cased, space-padded title,
/// L2-normalized. A title with no trigrams maps to e_0.
std::vector<double> embed_fallback(std::string_view title, int dim);

/// Throws std::invalid_argument on length mismatch or a zero vector.
double cosine_sim(std::span<const double> a, std::span<const double> b);

/// {"dim": d, "<item_id>": [..d reals..], ...}
EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable fallback_embeddings(const Catalog& catalog, int dim = kFallbackEmbeddingDim);
/// The file at `path` when given, else fallback embeddings. Catalog items
/// missing from the file are filled in from the fallback embedder only if
/// the dimensions agree.
EmbeddingTable resolve_embeddings(const Catalog& catalog, const std::filesystem::path& path);

}  // namespace fedflex
