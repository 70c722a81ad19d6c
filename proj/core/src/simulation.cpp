#include "fedflex/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "csv.hpp"
#include "fedflex/aggregator.hpp"
#include "fedflex/client_node.hpp"
#include "fedflex/transport.hpp"

namespace fedflex {

namespace chr = std::chrono;

void SimConfig::validate() const {
  if (clients < 1) throw std::invalid_argument("clients must be >= 1");
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (catalog_size < 2) throw std::invalid_argument("catalog_size must be >= 2");
  if (true_dim < 1 || model_dim < 1) throw std::invalid_argument("latent dimensions must be >= 1");
  if (!(click_temperature > 0.0)) throw std::invalid_argument("click temperature must be > 0");
  if (!(watch_fraction > 0.0 && watch_fraction <= 1.0)) throw std::invalid_argument("watch_fraction must be in (0, 1]");
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
    throw std::invalid_argument("heldout_fraction must be in [0, 1)");
  }
  if (!(item_noise >= 0.0)) throw std::invalid_argument("item_noise must be >= 0");
  if (!(movie_fraction >= 0.0 && movie_fraction < 1.0)) throw std::invalid_argument("movie_fraction must be in [0, 1)");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  training.validate();
  dp.validate();
  mmr.validate();
}

int World::true_rating(std::size_t client, ItemId item) const {
  const auto items = catalog.items();
  auto it = std::lower_bound(items.begin(), items.end(), item,
                             [](const CatalogItem& c, ItemId v) { return c.item_id < v; });
  if (it == items.end() || it->item_id != item) throw UnknownItemError(item, "simulated world");
  return true_ratings.at(client).at(static_cast<std::size_t>(it - items.begin()));
}

namespace {

struct GenreSpec {
  const char* name;
  const char* words[6];
};

// Title vocabulary is shared within a genre so that title embeddings carry
// genre similarity, the way real franchise and genre titles do.
constexpr GenreSpec kGenres[] = {
    {"Drama", {"Hearts", "Promise", "Letters", "Family", "Tides", "Homecoming"}},
    {"Comedy", {"Laughs", "Roommates", "Office", "Chaos", "Party", "Weekend"}},
    {"Crime", {"Murder", "Detective", "Heist", "Cartel", "Case", "Killer"}},
    {"Documentary", {"Planet", "Untold", "Story", "Inside", "Wild", "History"}},
    {"Reality", {"Love", "Island", "Bake", "Challenge", "Dating", "Makeover"}},
    {"Sci-Fi", {"Galaxy", "Star", "Quantum", "Android", "Orbit", "Future"}},
    {"Anime", {"Blade", "Spirit", "Titan", "Ninja", "Dragon", "Academy"}},
    {"Thriller", {"Shadow", "Silent", "Night", "Stranger", "Fear", "Escape"}},
};
constexpr std::size_t kGenreCount = std::size(kGenres);

std::vector<double> gaussian_vector(int dim, double scale, Rng& rng) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (auto& x : v) x = n(rng);
  return v;
}

ViewingEvent episode(const std::string& title, int season, int ep, chr::sys_days day) {
  return {title + ": Season " + std::to_string(season) + ": Episode " + std::to_string(ep), chr::year_month_day{day}};
}

// Events that make derive_ratings reproduce `stars` for a series (ratings
// below 2 are not expressible by a series and come out as 2).
void append_series_events(std::vector<ViewingEvent>& out, const std::string& title, int stars, chr::sys_days start) {
  switch (stars) {
    case 5:
      for (int e : {0, 1, 3}) out.push_back(episode(title, 1, e + 1, start + chr::days{e}));
      break;
    case 4:
      out.push_back(episode(title, 1, 1, start));
      out.push_back(episode(title, 1, 2, start + chr::days{3}));
      break;
    case 3:
      out.push_back(episode(title, 1, 1, start));
      out.push_back(episode(title, 1, 2, start + chr::days{14}));
      break;
    default:
      out.push_back(episode(title, 1, 1, start));
  }
}

}  // namespace

World generate_world(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, {0x776f726cULL}));
  World world;

  std::vector<std::vector<double>> centers;
  for (std::size_t g = 0; g < kGenreCount; ++g) centers.push_back(gaussian_vector(cfg.true_dim, 1.0, rng));

  std::vector<CatalogItem> items;
  std::vector<std::vector<double>> item_factors;
  std::set<std::string> used_titles;
  std::uniform_int_distribution<std::size_t> genre_pick(0, kGenreCount - 1);
  std::uniform_int_distribution<int> word_pick(0, 5);
  std::bernoulli_distribution is_movie(cfg.movie_fraction);
  std::bernoulli_distribution second_genre(0.3);
  for (std::size_t i = 0; i < cfg.catalog_size; ++i) {
    const std::size_t g = genre_pick(rng);
    CatalogItem item;
    item.item_id = static_cast<ItemId>(i);
    item.genres.push_back(kGenres[g].name);
    if (second_genre(rng)) {
      const std::size_t g2 = genre_pick(rng);
      if (g2 != g) item.genres.push_back(kGenres[g2].name);
    }
    item.kind = is_movie(rng) ? ItemKind::Movie : ItemKind::Series;
    std::string title = std::string(kGenres[g].words[word_pick(rng)]) + " " + kGenres[g].words[word_pick(rng)];
    for (int n = 2; used_titles.contains(csv::to_lower(title)); ++n) {
      title = std::string(kGenres[g].words[word_pick(rng)]) + " " + kGenres[g].words[word_pick(rng)] + " " +
              std::to_string(n);
    }
    used_titles.insert(csv::to_lower(title));
    item.title = std::move(title);

    auto q = gaussian_vector(cfg.true_dim, cfg.item_noise, rng);
    for (int f = 0; f < cfg.true_dim; ++f) q[f] += centers[g][f];
    if (cfg.nonnegative_factors) {
      for (auto& x : q) x = std::abs(x);
    }
    item_factors.push_back(std::move(q));
    items.push_back(std::move(item));
  }
  world.catalog = Catalog(std::move(items));

  std::vector<std::vector<double>> scores(cfg.clients);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t c = 0; c < cfg.clients; ++c) {
    SimClient client;
    client.participant_id = "sim-" + std::to_string(c);
    client.true_factors = gaussian_vector(cfg.true_dim, 1.0, rng);
    if (cfg.nonnegative_factors) {
      for (auto& x : client.true_factors) x = std::abs(x);
    }
    client.training_seed = derive_seed(cfg.seed, {0x747261696eULL, c});
    client.dp_seed = derive_seed(cfg.seed, {0x6470ULL, c});
    for (const auto& q : item_factors) {
      const double s = dot(client.true_factors, q);
      scores[c].push_back(s);
      sum += s;
      sum_sq += s * s;
    }
    world.clients.push_back(std::move(client));
  }
  const double count = static_cast<double>(cfg.clients * cfg.catalog_size);
  const double mean = sum / count;
  const double sd = std::sqrt(std::max(sum_sq / count - mean * mean, 1e-12));
  for (const auto& row : scores) {
    std::vector<int> stars;
    for (double s : row) stars.push_back(static_cast<int>(std::clamp(std::round(3.0 + 1.25 * (s - mean) / sd), 1.0, 5.0)));
    world.true_ratings.push_back(std::move(stars));
  }

  const auto catalog_items = world.catalog.items();
  const auto watch_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(cfg.watch_fraction * static_cast<double>(cfg.catalog_size))));
  const chr::sys_days base = chr::sys_days{chr::year{2024} / chr::January / 1};
  std::uniform_int_distribution<int> day_pick(0, 300);
  for (std::size_t c = 0; c < cfg.clients; ++c) {
    auto& client = world.clients[c];
    std::vector<std::size_t> order(cfg.catalog_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(watch_count);
    std::sort(order.begin(), order.end());

    std::vector<std::size_t> series;
    for (auto idx : order) {
      if (catalog_items[idx].kind == ItemKind::Series) series.push_back(idx);
    }
    std::shuffle(series.begin(), series.end(), rng);
    const auto heldout_count = static_cast<std::size_t>(std::floor(cfg.heldout_fraction * static_cast<double>(order.size())));
    std::set<std::size_t> heldout(series.begin(), series.begin() + std::min(heldout_count, series.size()));

    for (auto idx : order) {
      const auto& item = catalog_items[idx];
      const int stars = world.true_ratings[c][idx];
      if (heldout.contains(idx)) {
        client.heldout.emplace(item.item_id, stars);
        continue;
      }
      client.observed.emplace(item.item_id, stars);
      const auto start = base + chr::days{day_pick(rng)};
      if (item.kind == ItemKind::Movie) {
        client.history.push_back({item.title, chr::year_month_day{start}});
      } else {
        append_series_events(client.history, item.title, stars, start);
      }
    }
  }
  return world;
}

std::string history_csv(const SimClient& client) {
  std::ostringstream out;
  out << "Title,Date\n";
  for (const auto& ev : client.history) out << csv::quote(ev.raw_title) << ',' << format_watch_date(ev.watch_date) << '\n';
  return out.str();
}

double click_probability(int true_rating, double temperature) {
  return logistic((static_cast<double>(true_rating) - 3.0) / temperature);
}

std::vector<ItemId> simulate_clicks(std::span<const ItemId> list, std::span<const int> true_ratings,
                                    double temperature, std::uint64_t seed) {
  if (list.size() != true_ratings.size()) throw std::invalid_argument("one true rating per shown item expected");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (u(rng) < click_probability(true_ratings[i], temperature)) out.push_back(list[i]);
  }
  return out;
}

RoundMetrics evaluate_model(const World& world, const FactorModel& model, const SimConfig& cfg, std::size_t round) {
  double sq = 0.0;
  std::size_t pairs = 0;
  double auc_sum = 0.0;
  std::size_t auc_clients = 0;
  for (std::size_t c = 0; c < world.clients.size(); ++c) {
    const auto& client = world.clients[c];
    const RatingVector ratings = derive_ratings(client.history, world.catalog, client.participant_id);
    UserFactors user = UserFactors::zeros(model.k());
    FactorModel local = model;
    TrainingConfig tc = cfg.training;
    tc.rng_seed = derive_seed(client.training_seed, {model.round()});
    if (cfg.variant == Variant::Svd) {
      if (!ratings.empty()) train_svd(user, local, ratings, tc);
    } else {
      const auto positives = bpr_positives(ratings, {});
      if (!positives.empty() && positives.size() < local.rows()) train_bpr(user, local, positives, tc);
    }

    std::vector<double> pos, neg;
    for (const auto& [id, stars] : client.heldout) {
      const double pred = predict(user, local, id);
      sq += (pred - stars) * (pred - stars);
      ++pairs;
      (stars >= kBprPositiveThreshold ? pos : neg).push_back(pred);
    }
    if (!pos.empty() && !neg.empty()) {
      double wins = 0.0;
      for (double a : pos) {
        for (double b : neg) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
      }
      auc_sum += wins / static_cast<double>(pos.size() * neg.size());
      ++auc_clients;
    }
  }
  RoundMetrics m;
  m.round = round;
  m.rmse = pairs ? std::sqrt(sq / static_cast<double>(pairs)) : 0.0;
  m.auc = auc_clients ? auc_sum / static_cast<double>(auc_clients) : 0.5;
  return m;
}

SimResult run_simulation(const SimConfig& cfg) {
  cfg.validate();
  const World world = generate_world(cfg);
  const EmbeddingTable embeddings = fallback_embeddings(world.catalog);

  AggregatorConfig agg_cfg;
  agg_cfg.item_ids = world.catalog.ids();
  agg_cfg.k = cfg.model_dim;
  agg_cfg.seed = derive_seed(cfg.seed, {0x6d6f64656cULL});
  agg_cfg.dp = cfg.dp;
  agg_cfg.dp.rng_seed = derive_seed(cfg.seed, {0x616464ULL});
  Aggregator aggregator(agg_cfg);
  InProcessTransport transport(aggregator);

  // Session timestamps are simulated: one day per round, one ms per client.
  std::atomic<std::int64_t> current_round{0};
  constexpr std::int64_t kStart = 1733011200000;  // 2024-12-01
  constexpr std::int64_t kDayMs = 86'400'000;

  std::vector<std::unique_ptr<ClientNode>> nodes;
  for (std::size_t c = 0; c < world.clients.size(); ++c) {
    const auto& client = world.clients[c];
    ClientConfig cc;
    cc.participant_id = client.participant_id;
    cc.variant = cfg.variant;
    cc.training = cfg.training;
    cc.training.rng_seed = client.training_seed;
    cc.dp = cfg.dp;
    cc.dp.aggregator_side = false;
    cc.dp.rng_seed = client.dp_seed;
    cc.mmr = cfg.mmr;
    Clock clock = [&current_round, c] { return kStart + current_round.load() * kDayMs + static_cast<std::int64_t>(c); };
    nodes.push_back(std::make_unique<ClientNode>(cc, world.catalog, client.history, embeddings, transport, clock));
  }

  SimResult result;
  auto evaluate = [&](const FactorModel& model, std::size_t round) {
    try {
      result.trace.push_back(evaluate_model(world, model, cfg, round));
    } catch (const TrainingDivergedError&) {
      throw SimulationDivergedError(round);
    }
  };
  evaluate(aggregator.model(cfg.variant), 0);

  for (std::size_t r = 1; r <= cfg.rounds; ++r) {
    current_round = static_cast<std::int64_t>(r);
    auto run_client = [&](std::size_t c) {
      auto& node = *nodes[c];
      const RoundReport report = node.run_round();
      for (auto side : {ListSide::A, ListSide::B}) {
        const auto& list = side == ListSide::A ? report.list_a : report.list_b;
        std::vector<int> truth;
        for (ItemId id : list) truth.push_back(world.true_rating(c, id));
        const auto clicks = simulate_clicks(list, truth, cfg.click_temperature,
                                            derive_seed(cfg.seed, {0x636c69636bULL, r, c, static_cast<std::uint64_t>(side)}));
        for (ItemId id : clicks) {
          const auto pos = std::find(list.begin(), list.end(), id) - list.begin() + 1;
          node.record_click(id, side, static_cast<int>(pos), kStart + static_cast<std::int64_t>(r) * kDayMs + 1000);
        }
      }
      node.close_session();
    };

    try {
      if (cfg.threads <= 1) {
        for (std::size_t c = 0; c < nodes.size(); ++c) run_client(c);
      } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mu;
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(cfg.threads, nodes.size()); ++t) {
          pool.emplace_back([&] {
            for (std::size_t c; (c = next++) < nodes.size();) {
              try {
                run_client(c);
              } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
              }
            }
          });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
      }
    } catch (const TrainingDivergedError&) {
      throw SimulationDivergedError(r);
    }

    if (aggregator.pending_updates(cfg.variant) > 0) aggregator.aggregate_round(cfg.variant);
    const FactorModel model = aggregator.model(cfg.variant);
    if (!model.all_finite()) throw SimulationDivergedError(r);
    evaluate(model, r);
  }

  result.final_model = aggregator.model(cfg.variant);
  result.sessions = aggregator.telemetry();
  std::sort(result.sessions.begin(), result.sessions.end(), [](const SessionRecord& a, const SessionRecord& b) {
    return std::tie(a.timestamp, a.participant_id) < std::tie(b.timestamp, b.participant_id);
  });
  result.report = compute_report(result.sessions, embeddings);
  result.genres = genre_distribution(result.sessions, world.catalog);
  const auto& a = result.report.entries.at({cfg.variant, ListSide::A});
  const auto& b = result.report.entries.at({cfg.variant, ListSide::B});
  result.mean_ild_a = a.ild;
  result.mean_ild_b = b.ild;
  result.unique_shown_a = a.unique_recommended;
  result.unique_shown_b = b.unique_recommended;
  result.catalog = world.catalog;
  result.histories.reserve(world.clients.size());
  for (const auto& client : world.clients) result.histories.emplace_back(client.participant_id, history_csv(client));
  return result;
}

void write_simulation_outputs(const SimResult& result, const SimConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "histories");
  auto open = [&](const std::filesystem::path& name) {
    std::ofstream out(out_dir / name);
    if (!out) throw Error("cannot write " + (out_dir / name).string());
    return out;
  };

  Json trace = Json::array();
  for (const auto& t : result.trace) trace.push_back({{"round", t.round}, {"rmse", t.rmse}, {"auc", t.auc}});
  Json doc{{"config",
            {{"clients", cfg.clients},
             {"rounds", cfg.rounds},
             {"catalog_size", cfg.catalog_size},
             {"true_dim", cfg.true_dim},
             {"model_dim", cfg.model_dim},
             {"variant", to_string(cfg.variant)},
             {"mmr_lambda", cfg.mmr.lambda},
             {"dp_sigma", cfg.dp.noise_sigma},
             {"seed", cfg.seed}}},
           {"metrics", report_to_json(result.report)},
           {"trace", trace}};
  open("metrics.json") << doc.dump(2) << '\n';

  auto trace_csv = open("trace.csv");
  trace_csv.precision(10);
  trace_csv << "round,rmse,auc\n";
  for (const auto& t : result.trace) trace_csv << t.round << ',' << t.rmse << ',' << t.auc << '\n';

  auto genres = open("genre_distribution.csv");
  write_genre_csv(genres, result.genres);

  auto log = open("telemetry.ndjson");
  for (const auto& s : result.sessions) log << encode(s) << '\n';

  auto catalog = open("catalog.csv");
  write_catalog_csv(catalog, result.catalog);

  for (const auto& [id, csv_text] : result.histories) open(std::filesystem::path("histories") / (id + ".csv")) << csv_text;
}

}  // namespace fedflex
