#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedflex {

using ItemId = std::int64_t;

/// Per-item factor deltas keyed by catalog id. Ordered so that iteration,
/// noise draws and serialization are deterministic.
using ItemDeltas = std::map<ItemId, std::vector<double>>;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or stream.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Lookup of an item id that is not part of the model, catalog or table.
class UnknownItemError : public Error {
 public:
  explicit UnknownItemError(ItemId id, const std::string& where)
      : Error("unknown item_id " + std::to_string(id) + " in " + where), id_(id) {}
  ItemId id() const { return id_; }

 private:
  ItemId id_;
};

/// Mixes a base seed with a sequence of stream identifiers (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (auto p : parts) h = mix(h ^ mix(p));
  return h;
}

/// FNV-1a, 64-bit. Stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fedflex
