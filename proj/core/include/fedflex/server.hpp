#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "fedflex/aggregator.hpp"

namespace fedflex {

struct HttpResponse {
  int status = 200;
  std::string body;
};

using QueryParams = std::map<std::string, std::string>;

/// Dispatches one aggregator request:
///   GET  /v1/model?variant=svd|bpr
///   POST /v1/update
///   POST /v1/telemetry
///   POST /v1/aggregate?variant=svd|bpr   (operator trigger)
/// Shared by the HTTP server and the in-process transport.
HttpResponse handle_aggregator_request(Aggregator& aggregator, std::string_view method,
                                       std::string_view path, const QueryParams& query,
                                       std::string_view body);

/// Splits "path?a=b&c=d" into path and decoded parameters.
std::pair<std::string, QueryParams> split_target(std::string_view target);

/// HTTP front end for an Aggregator.
class AggregatorServer {
 public:
  AggregatorServer(Aggregator& aggregator, std::string host, int port);
  ~AggregatorServer();
  AggregatorServer(const AggregatorServer&) = delete;
  AggregatorServer& operator=(const AggregatorServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  void start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string host_;
  int port_;
};

}  // namespace fedflex
