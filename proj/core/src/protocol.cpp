#include "fedflex/protocol.hpp"

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <istream>
#include <limits>
#include <set>

#include "csv.hpp"

namespace fedflex {

std::string_view to_string(Variant v) { return v == Variant::Svd ? "svd" : "bpr"; }

Variant parse_variant(std::string_view text) {
  const auto t = csv::to_lower(text);
  if (t == "svd") return Variant::Svd;
  if (t == "bpr") return Variant::Bpr;
  throw ProtocolError("unknown variant '" + std::string(text) + "'");
}

std::string_view to_string(ListSide side) { return side == ListSide::A ? "A" : "B"; }

ListSide parse_list_side(std::string_view text) {
  if (text == "A" || text == "a") return ListSide::A;
  if (text == "B" || text == "b") return ListSide::B;
  throw ProtocolError("unknown list '" + std::string(text) + "'");
}

std::string_view to_string(AckStatus s) {
  switch (s) {
    case AckStatus::Accepted: return "accepted";
    case AckStatus::Stale: return "stale";
    case AckStatus::Invalid: return "invalid";
  }
  return "invalid";
}

namespace {

AckStatus parse_ack_status(std::string_view text) {
  if (text == "accepted") return AckStatus::Accepted;
  if (text == "stale") return AckStatus::Stale;
  if (text == "invalid") return AckStatus::Invalid;
  throw ProtocolError("unknown ack status '" + std::string(text) + "'");
}

// Wire messages are closed schemas: an unexpected field is an error, so a
// client cannot smuggle private data through an extension field.
void require_fields(const Json& j, std::initializer_list<std::string_view> allowed, const char* type) {
  if (!j.is_object()) throw ProtocolError(std::string(type) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ProtocolError(std::string(type) + " has unexpected field '" + key + "'");
  }
}

ItemId parse_item_key(const std::string& key) {
  ItemId id = 0;
  auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
  if (ec != std::errc() || ptr != key.data() + key.size()) throw ProtocolError("item key '" + key + "' is not an id");
  return id;
}

}  // namespace

ModelSnapshot ModelSnapshot::from_model(Variant variant, const FactorModel& model) {
  ModelSnapshot s;
  s.variant = variant;
  s.round = model.round();
  s.k = model.k();
  s.item_ids = model.item_ids();
  s.q.reserve(model.rows());
  for (std::size_t r = 0; r < model.rows(); ++r) {
    auto row = model.row(r);
    s.q.emplace_back(row.begin(), row.end());
  }
  return s;
}

FactorModel ModelSnapshot::to_model() const {
  if (q.size() != item_ids.size()) throw ProtocolError("snapshot row count does not match item_ids");
  std::vector<double> flat;
  flat.reserve(item_ids.size() * static_cast<std::size_t>(std::max(k, 0)));
  for (const auto& row : q) {
    if (row.size() != static_cast<std::size_t>(k)) throw ProtocolError("snapshot row length != k");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  try {
    return FactorModel(k, item_ids, std::move(flat), round);
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(e.what());
  }
}

void to_json(Json& j, const ModelSnapshot& m) {
  j = Json{{"variant", to_string(m.variant)}, {"round", m.round}, {"k", m.k}, {"item_ids", m.item_ids}, {"Q", m.q}};
}

void from_json(const Json& j, ModelSnapshot& m) {
  require_fields(j, {"variant", "round", "k", "item_ids", "Q"}, "model snapshot");
  m.variant = parse_variant(j.at("variant").get<std::string>());
  m.round = j.at("round").get<std::uint64_t>();
  m.k = j.at("k").get<int>();
  m.item_ids = j.at("item_ids").get<std::vector<ItemId>>();
  m.q = j.at("Q").get<std::vector<std::vector<double>>>();
}

void to_json(Json& j, const DpPosture& d) {
  // JSON has no infinity; an unbounded clip norm travels as null.
  j = Json{{"clip_norm", std::isfinite(d.clip_norm) ? Json(d.clip_norm) : Json(nullptr)},
           {"noise_sigma", d.noise_sigma}};
}

void from_json(const Json& j, DpPosture& d) {
  require_fields(j, {"clip_norm", "noise_sigma"}, "dp");
  const auto& c = j.at("clip_norm");
  d.clip_norm = c.is_null() ? std::numeric_limits<double>::infinity() : c.get<double>();
  d.noise_sigma = j.at("noise_sigma").get<double>();
}

void to_json(Json& j, const UpdateMessage& m) {
  Json deltas = Json::object();
  for (const auto& [id, v] : m.item_deltas) deltas[std::to_string(id)] = v;
  j = Json{{"participant_id", m.participant_id},
           {"variant", to_string(m.variant)},
           {"base_round", m.base_round},
           {"item_deltas", std::move(deltas)},
           {"dp", m.dp}};
}

void from_json(const Json& j, UpdateMessage& m) {
  require_fields(j, {"participant_id", "variant", "base_round", "item_deltas", "dp"}, "update");
  m.participant_id = j.at("participant_id").get<std::string>();
  m.variant = parse_variant(j.at("variant").get<std::string>());
  m.base_round = j.at("base_round").get<std::uint64_t>();
  m.item_deltas.clear();
  const auto& deltas = j.at("item_deltas");
  if (!deltas.is_object()) throw ProtocolError("item_deltas must be an object");
  for (const auto& [key, value] : deltas.items()) {
    m.item_deltas.emplace(parse_item_key(key), value.get<std::vector<double>>());
  }
  m.dp = j.at("dp").get<DpPosture>();
}

void to_json(Json& j, const Click& c) {
  j = Json{{"item_id", c.item_id},
           {"source_list", to_string(c.source_list)},
           {"position", c.position},
           {"click_time", c.click_time}};
}

void from_json(const Json& j, Click& c) {
  require_fields(j, {"item_id", "source_list", "position", "click_time"}, "click");
  c.item_id = j.at("item_id").get<ItemId>();
  c.source_list = parse_list_side(j.at("source_list").get<std::string>());
  c.position = j.at("position").get<int>();
  c.click_time = j.at("click_time").get<std::int64_t>();
}

void to_json(Json& j, const SessionRecord& r) {
  j = Json{{"participant_id", r.participant_id},
           {"variant", to_string(r.variant)},
           {"timestamp", r.timestamp},
           {"list_a", r.list_a},
           {"list_b", r.list_b},
           {"clicks", r.clicks}};
}

void from_json(const Json& j, SessionRecord& r) {
  require_fields(j, {"participant_id", "variant", "timestamp", "list_a", "list_b", "clicks"}, "session record");
  r.participant_id = j.at("participant_id").get<std::string>();
  r.variant = parse_variant(j.at("variant").get<std::string>());
  r.timestamp = j.at("timestamp").get<std::int64_t>();
  r.list_a = j.at("list_a").get<std::vector<ItemId>>();
  r.list_b = j.at("list_b").get<std::vector<ItemId>>();
  r.clicks = j.at("clicks").get<std::vector<Click>>();
}

void to_json(Json& j, const Ack& a) {
  j = Json{{"status", to_string(a.status)}, {"reason", a.reason}, {"round", a.round}};
}

void from_json(const Json& j, Ack& a) {
  require_fields(j, {"status", "reason", "round"}, "ack");
  a.status = parse_ack_status(j.at("status").get<std::string>());
  a.reason = j.value("reason", std::string{});
  a.round = j.value("round", std::uint64_t{0});
}

std::optional<std::string> validate_session(const SessionRecord& rec) {
  if (rec.participant_id.empty()) return "participant_id is empty";
  for (auto side : {ListSide::A, ListSide::B}) {
    const auto& list = rec.list(side);
    if (list.size() > kStudyListSize) return "list " + std::string(to_string(side)) + " has more than 5 items";
    std::set<ItemId> unique(list.begin(), list.end());
    if (unique.size() != list.size()) return "list " + std::string(to_string(side)) + " repeats an item";
  }
  for (const auto& c : rec.clicks) {
    const auto& list = rec.list(c.source_list);
    if (c.position < 1 || static_cast<std::size_t>(c.position) > list.size()) {
      return "click on item " + std::to_string(c.item_id) + " has position " + std::to_string(c.position) +
             " outside list " + std::string(to_string(c.source_list));
    }
    if (list[static_cast<std::size_t>(c.position - 1)] != c.item_id) {
      return "clicked item " + std::to_string(c.item_id) + " is not at position " + std::to_string(c.position) +
             " of list " + std::string(to_string(c.source_list));
    }
  }
  return std::nullopt;
}

std::vector<SessionRecord> read_telemetry_log(std::istream& in) {
  std::vector<SessionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    try {
      out.push_back(Json::parse(line).get<SessionRecord>());
    } catch (const std::exception& e) {
      throw ParseError("telemetry line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace fedflex
