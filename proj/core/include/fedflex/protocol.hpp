#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedflex/factor_model.hpp"
#include "fedflex/json.hpp"
#include "fedflex/privacy.hpp"
#include "fedflex/types.hpp"

namespace fedflex {

/// Malformed or semantically invalid wire message.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

enum class Variant { Svd, Bpr };
inline constexpr Variant kAllVariants[] = {Variant::Svd, Variant::Bpr};

std::string_view to_string(Variant v);
/// "svd" | "bpr" (case-insensitive). Throws ProtocolError.
Variant parse_variant(std::string_view text);

enum class ListSide { A, B };
std::string_view to_string(ListSide side);
ListSide parse_list_side(std::string_view text);

inline constexpr std::size_t kStudyListSize = 5;

/// GET /v1/model response.
struct ModelSnapshot {
  Variant variant = Variant::Svd;
  std::uint64_t round = 0;
  int k = 0;
  std::vector<ItemId> item_ids;
  std::vector<std::vector<double>> q;

  static ModelSnapshot from_model(Variant variant, const FactorModel& model);
  FactorModel to_model() const;
};

/// Privacy posture the client applied before sending.
struct DpPosture {
  double clip_norm = 0.0;
  double noise_sigma = 0.0;
};

/// POST /v1/update body. Carries item factor deltas only.
struct UpdateMessage {
  std::string participant_id;
  Variant variant = Variant::Svd;
  std::uint64_t base_round = 0;
  ItemDeltas item_deltas;
  DpPosture dp;
};

struct Click {
  ItemId item_id = 0;
  ListSide source_list = ListSide::A;
  int position = 0;  // 1-based
  std::int64_t click_time = 0;  // unix milliseconds
};

/// POST /v1/telemetry body: one study impression and its clicks.
struct SessionRecord {
  std::string participant_id;
  Variant variant = Variant::Svd;
  std::int64_t timestamp = 0;  // unix milliseconds
  std::vector<ItemId> list_a;
  std::vector<ItemId> list_b;
  std::vector<Click> clicks;

  const std::vector<ItemId>& list(ListSide side) const { return side == ListSide::A ? list_a : list_b; }
};

/// Reason text if the record violates its invariants.
std::optional<std::string> validate_session(const SessionRecord& rec);

enum class AckStatus { Accepted, Stale, Invalid };
std::string_view to_string(AckStatus s);

struct Ack {
  AckStatus status = AckStatus::Accepted;
  std::string reason;
  std::uint64_t round = 0;
};

void to_json(Json& j, const ModelSnapshot& m);
void from_json(const Json& j, ModelSnapshot& m);
void to_json(Json& j, const DpPosture& d);
void from_json(const Json& j, DpPosture& d);
void to_json(Json& j, const UpdateMessage& m);
void from_json(const Json& j, UpdateMessage& m);
void to_json(Json& j, const Click& c);
void from_json(const Json& j, Click& c);
void to_json(Json& j, const SessionRecord& r);
void from_json(const Json& j, SessionRecord& r);
void to_json(Json& j, const Ack& a);
void from_json(const Json& j, Ack& a);

/// Parses a JSON body into T, mapping any json error to ProtocolError.
template <typename T>
T decode(std::string_view body) {
  try {
    return Json::parse(body).get<T>();
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
}

template <typename T>
std::string encode(const T& msg) {
  return Json(msg).dump();
}

/// Newline-delimited SessionRecord JSON. Blank lines are ignored; a bad
/// line throws ParseError naming the line number.
std::vector<SessionRecord> read_telemetry_log(std::istream& in);

}  // namespace fedflex
