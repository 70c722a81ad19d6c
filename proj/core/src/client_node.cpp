#include "fedflex/client_node.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace fedflex {

std::int64_t unix_millis_now() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------
// Config

void ClientConfig::validate() const {
  if (participant_id.empty()) throw std::invalid_argument("participant_id must not be empty");
  training.validate();
  dp.validate();
  mmr.validate();
  if (mmr.list_size > kStudyListSize) throw std::invalid_argument("study lists hold at most 5 items");
}

namespace {

Json clip_to_json(double c) { return std::isfinite(c) ? Json(c) : Json(nullptr); }

}  // namespace

void to_json(Json& j, const ClientConfig& c) {
  j = Json{{"participant_id", c.participant_id},
           {"variant", to_string(c.variant)},
           {"server", {{"host", c.server_host}, {"port", c.server_port}}},
           {"store_dir", c.store_dir.string()},
           {"history_path", c.history_path.string()},
           {"catalog_path", c.catalog_path.string()},
           {"embeddings_path", c.embeddings_path.string()},
           {"ui_port", c.ui_port},
           {"training",
            {{"learning_rate", c.training.learning_rate},
             {"regularization", c.training.regularization},
             {"epochs", c.training.epochs},
             {"rng_seed", c.training.rng_seed},
             {"negatives_per_positive", c.training.negatives_per_positive}}},
           {"dp",
            {{"clip_norm", clip_to_json(c.dp.clip_norm)},
             {"noise_sigma", c.dp.noise_sigma},
             {"rng_seed", c.dp.rng_seed},
             {"aggregator_side", c.dp.aggregator_side}}},
           {"mmr",
            {{"lambda", c.mmr.lambda},
             {"list_size", c.mmr.list_size},
             {"normalize_relevance", c.mmr.normalize_relevance},
             {"candidate_pool", c.mmr.candidate_pool}}}};
}

void from_json(const Json& j, ClientConfig& c) {
  c = ClientConfig{};
  c.participant_id = j.at("participant_id").get<std::string>();
  c.variant = parse_variant(j.value("variant", std::string("svd")));
  if (j.contains("server")) {
    c.server_host = j["server"].value("host", c.server_host);
    c.server_port = j["server"].value("port", c.server_port);
  }
  c.store_dir = j.value("store_dir", std::string{});
  c.history_path = j.value("history_path", std::string{});
  c.catalog_path = j.value("catalog_path", std::string{});
  c.embeddings_path = j.value("embeddings_path", std::string{});
  c.ui_port = j.value("ui_port", c.ui_port);
  if (j.contains("training")) {
    const auto& t = j["training"];
    c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
    c.training.regularization = t.value("regularization", c.training.regularization);
    c.training.epochs = t.value("epochs", c.training.epochs);
    c.training.rng_seed = t.value("rng_seed", c.training.rng_seed);
    c.training.negatives_per_positive = t.value("negatives_per_positive", c.training.negatives_per_positive);
  }
  if (j.contains("dp")) {
    const auto& d = j["dp"];
    if (d.contains("clip_norm") && !d["clip_norm"].is_null()) c.dp.clip_norm = d["clip_norm"].get<double>();
    c.dp.noise_sigma = d.value("noise_sigma", c.dp.noise_sigma);
    c.dp.rng_seed = d.value("rng_seed", c.dp.rng_seed);
    c.dp.aggregator_side = d.value("aggregator_side", c.dp.aggregator_side);
  }
  if (j.contains("mmr")) {
    const auto& m = j["mmr"];
    c.mmr.lambda = m.value("lambda", c.mmr.lambda);
    c.mmr.list_size = m.value("list_size", c.mmr.list_size);
    c.mmr.normalize_relevance = m.value("normalize_relevance", c.mmr.normalize_relevance);
    c.mmr.candidate_pool = m.value("candidate_pool", c.mmr.candidate_pool);
  }
}

ClientConfig load_client_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open client config " + path.string());
  ClientConfig cfg;
  try {
    cfg = Json::parse(in).get<ClientConfig>();
  } catch (const Json::exception& e) {
    throw ParseError("invalid client config " + path.string() + ": " + e.what());
  }
  // Relative paths are taken relative to the config file.
  const auto base = path.parent_path();
  for (auto* p : {&cfg.store_dir, &cfg.history_path, &cfg.catalog_path, &cfg.embeddings_path}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// PrivateStore

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << content;
    if (!out) throw Error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

PrivateStore::PrivateStore(std::filesystem::path root) : root_(std::move(root)) {
  if (root_.empty()) return;
  std::filesystem::create_directories(root_);
  if (std::ifstream in(root_ / "clicked_items.txt"); in) {
    ItemId id;
    while (in >> id) clicked_.insert(id);
  }
  if (std::ifstream in(root_ / "current_session.json"); in) {
    current_ = Json::parse(in).get<SessionRecord>();
  }
  if (std::ifstream in(root_ / "sessions.ndjson"); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = Json::parse(line);
      retained_.emplace_back(j.at("record").get<SessionRecord>(), j.at("pending").get<bool>());
    }
  }
}

void PrivateStore::save_ratings(const RatingVector& ratings) {
  if (in_memory()) return;
  std::ostringstream out;
  out << "item_id,stars\n";
  for (const auto& [id, stars] : ratings.ratings) out << id << ',' << stars << '\n';
  write_file(root_ / "ratings.csv", out.str());
}

void PrivateStore::save_user_factors(const UserFactors& user) {
  if (in_memory()) return;
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < user.p.size(); ++i) out << (i ? " " : "") << user.p[i];
  out << '\n';
  write_file(root_ / "user_factors.txt", out.str());
}

std::optional<UserFactors> PrivateStore::load_user_factors() const {
  if (in_memory()) return std::nullopt;
  std::ifstream in(root_ / "user_factors.txt");
  if (!in) return std::nullopt;
  UserFactors u;
  double x;
  while (in >> x) u.p.push_back(x);
  return u;
}

std::set<ItemId> PrivateStore::clicked_items() const { return clicked_; }

void PrivateStore::add_clicked(ItemId id) {
  if (!clicked_.insert(id).second || in_memory()) return;
  std::ofstream out(root_ / "clicked_items.txt", std::ios::app);
  out << id << '\n';
}

void PrivateStore::save_current_session(const SessionRecord& rec) {
  current_ = rec;
  if (!in_memory()) write_file(root_ / "current_session.json", encode(rec));
}

void PrivateStore::clear_current_session() {
  current_.reset();
  if (!in_memory()) std::filesystem::remove(root_ / "current_session.json");
}

std::optional<SessionRecord> PrivateStore::load_current_session() const { return current_; }

void PrivateStore::retain_session(const SessionRecord& rec, bool pending) {
  auto it = std::find_if(retained_.begin(), retained_.end(), [&](const auto& e) {
    return e.first.participant_id == rec.participant_id && e.first.timestamp == rec.timestamp;
  });
  if (it != retained_.end()) {
    it->second = pending;
  } else {
    retained_.emplace_back(rec, pending);
  }
  if (in_memory()) return;
  std::string content;
  for (const auto& [r, p] : retained_) content += Json{{"record", r}, {"pending", p}}.dump() + "\n";
  write_file(root_ / "sessions.ndjson", content);
}

std::vector<SessionRecord> PrivateStore::pending_sessions() const {
  std::vector<SessionRecord> out;
  for (const auto& [r, p] : retained_) {
    if (p) out.push_back(r);
  }
  return out;
}

std::size_t PrivateStore::retained_count() const { return retained_.size(); }

// ---------------------------------------------------------------------------
// ClientNode

ClientNode::ClientNode(ClientConfig cfg, Catalog catalog, std::vector<ViewingEvent> history,
                       EmbeddingTable embeddings, Transport& transport, Clock clock)
    : cfg_(std::move(cfg)),
      catalog_(std::move(catalog)),
      history_(std::move(history)),
      embeddings_(std::move(embeddings)),
      aggregator_(transport),
      clock_(std::move(clock)),
      store_(cfg_.store_dir) {
  cfg_.validate();
  session_ = store_.load_current_session();
}

ClientNode::Trained ClientNode::train(const FactorModel& global) const {
  Trained t{UserFactors::zeros(global.k()), global, {}};
  TrainingConfig tc = cfg_.training;
  tc.rng_seed = derive_seed(cfg_.training.rng_seed, {global.round()});

  if (cfg_.variant == Variant::Svd) {
    RatingVector usable{ratings_.owner, {}};
    for (const auto& [id, stars] : ratings_.ratings) {
      if (global.contains(id)) usable.ratings.emplace(id, stars);
    }
    if (!usable.empty()) t.delta = train_svd(t.user, t.model, usable, tc);
  } else {
    std::set<ItemId> positives;
    for (ItemId id : bpr_positives(ratings_, store_.clicked_items())) {
      if (global.contains(id)) positives.insert(id);
    }
    if (!positives.empty() && positives.size() < global.rows()) t.delta = train_bpr(t.user, t.model, positives, tc);
  }
  t.delta.user = t.user;
  return t;
}

RoundReport ClientNode::run_round() {
  RoundReport report;
  ratings_ = derive_ratings(history_, catalog_, cfg_.participant_id);
  report.rated_items = ratings_.size();
  report.unresolved_events = count_unresolved(history_, catalog_);
  store_.save_ratings(ratings_);

  for (int attempt = 0; attempt < 2; ++attempt) {
    const FactorModel global = aggregator_.fetch_model(cfg_.variant).to_model();
    Trained t = train(global);
    report.model_round = global.round();
    report.trained_items = t.delta.item_deltas.size();
    user_ = std::move(t.user);
    local_model_ = std::move(t.model);
    if (t.delta.item_deltas.empty()) break;

    DpConfig dp = cfg_.dp;
    dp.rng_seed = derive_seed(cfg_.dp.rng_seed, {global.round()});
    UpdateMessage msg{cfg_.participant_id, cfg_.variant, global.round(), clip_and_noise(t.delta.item_deltas, dp),
                      {cfg_.dp.clip_norm, cfg_.dp.noise_sigma}};
    report.update_ack = aggregator_.submit_update(msg);
    if (report.update_ack->status != AckStatus::Stale || attempt == 1) break;
    report.retried_after_stale = true;
  }
  store_.save_user_factors(user_);

  std::set<ItemId> watched;
  for (const auto& [id, stars] : ratings_.ratings) watched.insert(id);
  const auto ranking = rank_items(user_, local_model_, watched, /*series_only=*/true, catalog_);

  const std::size_t n = std::min(cfg_.mmr.list_size, ranking.size());
  for (std::size_t i = 0; i < n; ++i) report.list_a.push_back(ranking[i].item_id);
  const std::size_t pool = std::min(cfg_.mmr.candidate_pool, ranking.size());
  report.list_b = mmr_rerank(std::span(ranking).first(pool), embeddings_, cfg_.mmr);

  open_session(report.list_a, report.list_b);
  return report;
}

void ClientNode::open_session(std::vector<ItemId> list_a, std::vector<ItemId> list_b) {
  bool unclosed = false;
  {
    std::lock_guard lock(session_mu_);
    unclosed = session_.has_value();
  }
  // An earlier session that was never closed is submitted rather than lost.
  if (unclosed) close_session();

  std::lock_guard lock(session_mu_);
  SessionRecord rec;
  rec.participant_id = cfg_.participant_id;
  rec.variant = cfg_.variant;
  rec.timestamp = clock_();
  rec.list_a = std::move(list_a);
  rec.list_b = std::move(list_b);
  session_ = rec;
  store_.save_current_session(rec);
}

SessionRecord ClientNode::record_click(ItemId item, ListSide side, int position, std::int64_t click_time) {
  std::lock_guard lock(session_mu_);
  if (!session_) throw SessionError("no open session");
  const auto& list = session_->list(side);
  if (position < 1 || static_cast<std::size_t>(position) > list.size() ||
      list[static_cast<std::size_t>(position - 1)] != item) {
    throw SessionError("item " + std::to_string(item) + " is not at position " + std::to_string(position) +
                       " of list " + std::string(to_string(side)));
  }
  const bool repeat = std::any_of(session_->clicks.begin(), session_->clicks.end(),
                                  [&](const Click& c) { return c.item_id == item && c.source_list == side; });
  if (!repeat) {
    session_->clicks.push_back({item, side, position, click_time});
    store_.save_current_session(*session_);
  }
  return *session_;
}

std::optional<Ack> ClientNode::close_session() {
  std::lock_guard lock(session_mu_);
  if (!session_) throw SessionError("no open session");
  const SessionRecord rec = *session_;
  for (const auto& c : rec.clicks) store_.add_clicked(c.item_id);
  session_.reset();
  store_.clear_current_session();
  try {
    Ack ack = aggregator_.submit_telemetry(rec);
    store_.retain_session(rec, false);
    return ack;
  } catch (const TransportError&) {
    store_.retain_session(rec, true);
    return std::nullopt;
  }
}

std::size_t ClientNode::retry_pending() {
  std::size_t delivered = 0;
  for (const auto& rec : store_.pending_sessions()) {
    try {
      aggregator_.submit_telemetry(rec);
      store_.retain_session(rec, false);
      ++delivered;
    } catch (const TransportError&) {
      break;
    }
  }
  return delivered;
}

std::optional<SessionRecord> ClientNode::current_session() const {
  std::lock_guard lock(session_mu_);
  return session_;
}

Json ClientNode::session_payload() const {
  std::lock_guard lock(session_mu_);
  if (!session_) return Json{{"open", false}};
  auto entries = [&](const std::vector<ItemId>& list) {
    Json arr = Json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto* item = catalog_.find(list[i]);
      arr.push_back({{"item_id", list[i]},
                     {"title", item ? item->title : std::string{}},
                     {"image_url", item ? item->image_url : std::string{}},
                     {"position", i + 1}});
    }
    return arr;
  };
  return Json{{"open", true},
              {"participant_id", session_->participant_id},
              {"variant", to_string(session_->variant)},
              {"timestamp", session_->timestamp},
              {"list_a", entries(session_->list_a)},
              {"list_b", entries(session_->list_b)},
              {"clicks", session_->clicks}};
}

// ---------------------------------------------------------------------------
// Loopback study API

HttpResponse handle_session_request(ClientNode& node, std::string_view method, std::string_view path,
                                    std::string_view body) {
  auto error = [](int status, const std::string& msg) { return HttpResponse{status, Json{{"error", msg}}.dump()}; };
  try {
    if (path == "/session/current" && method == "GET") {
      auto payload = node.session_payload();
      if (!payload.at("open").get<bool>()) return error(404, "no open session");
      return {200, payload.dump()};
    }
    if (path == "/session/click" && method == "POST") {
      auto click = decode<Click>(body);
      auto rec = node.record_click(click.item_id, click.source_list, click.position, click.click_time);
      return {200, Json{{"clicks", rec.clicks.size()}}.dump()};
    }
    if (path == "/session/close" && method == "POST") {
      auto ack = node.close_session();
      if (!ack) return {202, Json{{"status", "retained"}}.dump()};
      return {200, Json{{"status", "submitted"}, {"ack", *ack}}.dump()};
    }
    return error(404, "no such endpoint");
  } catch (const SessionError& e) {
    return error(path == "/session/close" ? 409 : 400, e.what());
  } catch (const ProtocolError& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

struct StudyUiServer::Impl {
  httplib::Server server;
  std::thread thread;
};

StudyUiServer::StudyUiServer(ClientNode& node, int port) : impl_(std::make_unique<Impl>()), port_(port) {
  auto handler = [&node](const httplib::Request& req, httplib::Response& res) {
    auto out = handle_session_request(node, req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  impl_->server.Get("/session/current", handler);
  impl_->server.Post("/session/click", handler);
  impl_->server.Post("/session/close", handler);
}

StudyUiServer::~StudyUiServer() { stop(); }

void StudyUiServer::start() {
  if (port_ == 0) {
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
  } else if (!impl_->server.bind_to_port("127.0.0.1", port_)) {
    throw Error("cannot bind 127.0.0.1:" + std::to_string(port_));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void StudyUiServer::run() {
  if (!impl_->server.bind_to_port("127.0.0.1", port_)) throw Error("cannot bind 127.0.0.1:" + std::to_string(port_));
  impl_->server.listen_after_bind();
}

void StudyUiServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace fedflex
