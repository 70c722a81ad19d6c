#include "fedflex/server.hpp"

#include <httplib.h>

#include <thread>

namespace fedflex {

namespace {

HttpResponse error_response(int status, const std::string& message) {
  return {status, Json{{"error", message}}.dump()};
}

HttpResponse ack_response(const Ack& ack) {
  return {ack.status == AckStatus::Invalid ? 400 : 200, encode(ack)};
}

Variant variant_param(const QueryParams& query) {
  auto it = query.find("variant");
  if (it == query.end()) throw ProtocolError("missing variant parameter");
  return parse_variant(it->second);
}

}  // namespace

std::pair<std::string, QueryParams> split_target(std::string_view target) {
  QueryParams params;
  auto qpos = target.find('?');
  std::string path(target.substr(0, qpos));
  if (qpos != std::string_view::npos) {
    httplib::Params parsed;
    httplib::detail::parse_query_text(std::string(target.substr(qpos + 1)), parsed);
    for (auto& [k, v] : parsed) params.insert_or_assign(k, v);
  }
  return {path, params};
}

HttpResponse handle_aggregator_request(Aggregator& aggregator, std::string_view method, std::string_view path,
                                       const QueryParams& query, std::string_view body) {
  try {
    if (path == "/v1/model") {
      if (method != "GET") return error_response(405, "use GET");
      return {200, encode(aggregator.serve_model(variant_param(query)))};
    }
    if (path == "/v1/update") {
      if (method != "POST") return error_response(405, "use POST");
      Ack ack;
      try {
        ack = aggregator.submit_update(decode<UpdateMessage>(body));
      } catch (const ProtocolError& e) {
        ack = {AckStatus::Invalid, e.what(), 0};
      }
      return ack_response(ack);
    }
    if (path == "/v1/telemetry") {
      if (method != "POST") return error_response(405, "use POST");
      Ack ack;
      try {
        ack = aggregator.submit_telemetry(decode<SessionRecord>(body));
      } catch (const ProtocolError& e) {
        ack = {AckStatus::Invalid, e.what(), 0};
      }
      return ack_response(ack);
    }
    if (path == "/v1/aggregate") {
      if (method != "POST") return error_response(405, "use POST");
      const auto variant = variant_param(query);
      if (aggregator.pending_updates(variant) == 0) return error_response(409, "nothing to aggregate");
      return {200, Json{{"round", aggregator.aggregate_round(variant)}}.dump()};
    }
    return error_response(404, "no such endpoint");
  } catch (const ProtocolError& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

struct AggregatorServer::Impl {
  Aggregator& aggregator;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Aggregator& a) : aggregator(a) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      QueryParams query(req.params.begin(), req.params.end());
      auto out = handle_aggregator_request(aggregator, req.method, req.path, query, req.body);
      res.status = out.status;
      res.set_content(out.body, "application/json");
    };
    server.Get(R"(/v1/.*)", handler);
    server.Post(R"(/v1/.*)", handler);
  }
};

AggregatorServer::AggregatorServer(Aggregator& aggregator, std::string host, int port)
    : impl_(std::make_unique<Impl>(aggregator)), host_(std::move(host)), port_(port) {}

AggregatorServer::~AggregatorServer() { stop(); }

void AggregatorServer::start() {
  if (port_ == 0) {
    port_ = impl_->server.bind_to_any_port(host_);
  } else if (!impl_->server.bind_to_port(host_, port_)) {
    throw Error("cannot bind " + host_ + ":" + std::to_string(port_));
  }
  if (port_ < 0) throw Error("cannot bind " + host_);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void AggregatorServer::run() {
  if (!impl_->server.bind_to_port(host_, port_)) throw Error("cannot bind " + host_ + ":" + std::to_string(port_));
  impl_->server.listen_after_bind();
}

void AggregatorServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace fedflex
