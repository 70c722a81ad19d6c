#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "fedflex/aggregator.hpp"
#include "fedflex/protocol.hpp"
#include "fedflex/server.hpp"

namespace fedflex {

/// The aggregator could not be reached. Safe to retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Moves request/response bodies between a client and an aggregator.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse get(const std::string& target) = 0;
  virtual HttpResponse post(const std::string& target, const std::string& body) = 0;
};

class HttpTransport : public Transport {
 public:
  HttpTransport(std::string host, int port);
  HttpResponse get(const std::string& target) override;
  HttpResponse post(const std::string& target, const std::string& body) override;

 private:
  std::string host_;
  int port_;
};

/// Calls the request router directly; same bytes as HTTP, no sockets.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(Aggregator& aggregator) : aggregator_(aggregator) {}
  HttpResponse get(const std::string& target) override;
  HttpResponse post(const std::string& target, const std::string& body) override;

 private:
  Aggregator& aggregator_;
};

/// Records every request and response body passing through `inner`.
class CapturingTransport : public Transport {
 public:
  struct Exchange {
    std::string method;
    std::string target;
    std::string request_body;
    std::string response_body;
  };

  explicit CapturingTransport(Transport& inner) : inner_(inner) {}
  HttpResponse get(const std::string& target) override;
  HttpResponse post(const std::string& target, const std::string& body) override;

  std::vector<Exchange> exchanges() const;

 private:
  Transport& inner_;
  mutable std::mutex mu_;
  std::vector<Exchange> log_;
};

/// Typed wrapper over a Transport. Non-2xx responses other than update and
/// telemetry acks throw ProtocolError.
class AggregatorClient {
 public:
  explicit AggregatorClient(Transport& transport) : transport_(transport) {}

  ModelSnapshot fetch_model(Variant variant);
  Ack submit_update(const UpdateMessage& msg);
  Ack submit_telemetry(const SessionRecord& rec);
  std::uint64_t trigger_aggregation(Variant variant);

 private:
  Transport& transport_;
};

}  // namespace fedflex
