#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedflex/catalog.hpp"
#include "fedflex/embedding.hpp"
#include "fedflex/history.hpp"
#include "fedflex/mmr.hpp"
#include "fedflex/privacy.hpp"
#include "fedflex/protocol.hpp"
#include "fedflex/training.hpp"
#include "fedflex/transport.hpp"

namespace fedflex {

struct ClientConfig {
  std::string participant_id;
  Variant variant = Variant::Svd;
  std::string server_host = "127.0.0.1";
  int server_port = 8080;
  std::filesystem::path store_dir;
  std::filesystem::path history_path;
  std::filesystem::path catalog_path;
  std::filesystem::path embeddings_path;
  int ui_port = 8765;
  TrainingConfig training;
  DpConfig dp;
  MmrConfig mmr;

  void validate() const;
};

void to_json(Json& j, const ClientConfig& c);
void from_json(const Json& j, ClientConfig& c);
ClientConfig load_client_config(const std::filesystem::path& path);

/// Rejected click or session operation.
class SessionError : public Error {
 public:
  using Error::Error;
};

/// Participant-local files: derived ratings, user factors, clicked items and
/// session records. Nothing here is ever sent to the aggregator except the
/// session records themselves. An empty root keeps everything in memory.
class PrivateStore {
 public:
  explicit PrivateStore(std::filesystem::path root = {});

  const std::filesystem::path& root() const { return root_; }
  bool in_memory() const { return root_.empty(); }

  void save_ratings(const RatingVector& ratings);
  void save_user_factors(const UserFactors& user);
  std::optional<UserFactors> load_user_factors() const;

  std::set<ItemId> clicked_items() const;
  void add_clicked(ItemId id);

  void save_current_session(const SessionRecord& rec);
  void clear_current_session();
  std::optional<SessionRecord> load_current_session() const;

  /// Closed sessions kept locally; `pending` marks ones still to be sent.
  void retain_session(const SessionRecord& rec, bool pending);
  std::vector<SessionRecord> pending_sessions() const;
  std::size_t retained_count() const;

 private:
  std::filesystem::path root_;
  std::set<ItemId> clicked_;
  std::optional<SessionRecord> current_;
  std::vector<std::pair<SessionRecord, bool>> retained_;
};

struct RoundReport {
  std::uint64_t model_round = 0;
  std::size_t rated_items = 0;
  std::size_t trained_items = 0;
  std::size_t unresolved_events = 0;
  std::optional<Ack> update_ack;
  bool retried_after_stale = false;
  std::vector<ItemId> list_a;
  std::vector<ItemId> list_b;
};

using Clock = std::function<std::int64_t()>;
std::int64_t unix_millis_now();

/// Participant-side pipeline: derive ratings, train on the fetched global
/// model, privatize and submit the delta, then build List A (top-N by score)
/// and List B (MMR re-ranked) for a study session.
class ClientNode {
 public:
  ClientNode(ClientConfig cfg, Catalog catalog, std::vector<ViewingEvent> history,
             EmbeddingTable embeddings, Transport& transport, Clock clock = unix_millis_now);

  /// Throws TransportError if the aggregator is unreachable.
  RoundReport run_round();

  /// Throws SessionError if no session is open or the item is not at
  /// `position` of `side`. Repeats of an (item, list) click are ignored.
  SessionRecord record_click(ItemId item, ListSide side, int position, std::int64_t click_time);

  /// Submits the open session. On a transport failure the record is kept
  /// locally with a retry flag and std::nullopt is returned.
  std::optional<Ack> close_session();
  /// Resubmits retained sessions; returns how many were delivered.
  std::size_t retry_pending();

  std::optional<SessionRecord> current_session() const;
  /// Session view for the study page: lists with titles and image urls.
  Json session_payload() const;

  const ClientConfig& config() const { return cfg_; }
  const Catalog& catalog() const { return catalog_; }
  const PrivateStore& store() const { return store_; }
  const UserFactors& user_factors() const { return user_; }
  /// Locally fine-tuned copy of the model from the last round.
  const FactorModel& local_model() const { return local_model_; }
  const RatingVector& ratings() const { return ratings_; }

 private:
  struct Trained {
    UserFactors user;
    FactorModel model;
    LocalDelta delta;
  };
  Trained train(const FactorModel& global) const;
  void open_session(std::vector<ItemId> list_a, std::vector<ItemId> list_b);

  ClientConfig cfg_;
  Catalog catalog_;
  std::vector<ViewingEvent> history_;
  EmbeddingTable embeddings_;
  AggregatorClient aggregator_;
  Clock clock_;
  PrivateStore store_;

  RatingVector ratings_;
  UserFactors user_;
  FactorModel local_model_;

  mutable std::mutex session_mu_;
  std::optional<SessionRecord> session_;
};

/// Loopback HTTP API for the study page:
///   GET /session/current, POST /session/click, POST /session/close
class StudyUiServer {
 public:
  StudyUiServer(ClientNode& node, int port);
  ~StudyUiServer();
  StudyUiServer(const StudyUiServer&) = delete;
  StudyUiServer& operator=(const StudyUiServer&) = delete;

  void start();
  void run();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_;
};

/// Request handler behind StudyUiServer, exposed for tests.
HttpResponse handle_session_request(ClientNode& node, std::string_view method, std::string_view path,
                                    std::string_view body);

}  // namespace fedflex
