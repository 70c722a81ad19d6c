#include "fedflex/transport.hpp"

#include <httplib.h>

namespace fedflex {

namespace {

HttpResponse from_result(const httplib::Result& res, const std::string& host, int port) {
  if (!res) {
    throw TransportError("aggregator at " + host + ":" + std::to_string(port) +
                         " unreachable: " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

}  // namespace

HttpTransport::HttpTransport(std::string host, int port) : host_(std::move(host)), port_(port) {}

HttpResponse HttpTransport::get(const std::string& target) {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(5);
  cli.set_read_timeout(30);
  return from_result(cli.Get(target), host_, port_);
}

HttpResponse HttpTransport::post(const std::string& target, const std::string& body) {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(5);
  cli.set_read_timeout(30);
  return from_result(cli.Post(target, body, "application/json"), host_, port_);
}

HttpResponse InProcessTransport::get(const std::string& target) {
  auto [path, query] = split_target(target);
  return handle_aggregator_request(aggregator_, "GET", path, query, {});
}

HttpResponse InProcessTransport::post(const std::string& target, const std::string& body) {
  auto [path, query] = split_target(target);
  return handle_aggregator_request(aggregator_, "POST", path, query, body);
}

HttpResponse CapturingTransport::get(const std::string& target) {
  auto res = inner_.get(target);
  std::lock_guard lock(mu_);
  log_.push_back({"GET", target, {}, res.body});
  return res;
}

HttpResponse CapturingTransport::post(const std::string& target, const std::string& body) {
  auto res = inner_.post(target, body);
  std::lock_guard lock(mu_);
  log_.push_back({"POST", target, body, res.body});
  return res;
}

std::vector<CapturingTransport::Exchange> CapturingTransport::exchanges() const {
  std::lock_guard lock(mu_);
  return log_;
}

namespace {

std::string error_text(const HttpResponse& res) {
  try {
    auto j = Json::parse(res.body);
    if (j.contains("error")) return j["error"].get<std::string>();
  } catch (const Json::exception&) {
  }
  return res.body;
}

}  // namespace

ModelSnapshot AggregatorClient::fetch_model(Variant variant) {
  auto res = transport_.get("/v1/model?variant=" + std::string(to_string(variant)));
  if (res.status != 200) throw ProtocolError("model fetch failed (" + std::to_string(res.status) + "): " + error_text(res));
  return decode<ModelSnapshot>(res.body);
}

Ack AggregatorClient::submit_update(const UpdateMessage& msg) {
  auto res = transport_.post("/v1/update", encode(msg));
  if (res.status != 200 && res.status != 400) {
    throw ProtocolError("update failed (" + std::to_string(res.status) + "): " + error_text(res));
  }
  return decode<Ack>(res.body);
}

Ack AggregatorClient::submit_telemetry(const SessionRecord& rec) {
  auto res = transport_.post("/v1/telemetry", encode(rec));
  if (res.status != 200 && res.status != 400) {
    throw ProtocolError("telemetry failed (" + std::to_string(res.status) + "): " + error_text(res));
  }
  return decode<Ack>(res.body);
}

std::uint64_t AggregatorClient::trigger_aggregation(Variant variant) {
  auto res = transport_.post("/v1/aggregate?variant=" + std::string(to_string(variant)), {});
  if (res.status != 200) throw ProtocolError("aggregation failed (" + std::to_string(res.status) + "): " + error_text(res));
  return Json::parse(res.body).at("round").get<std::uint64_t>();
}

}  // namespace fedflex
