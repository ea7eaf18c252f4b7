#include "temptrec/movielens.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "temptrec/errors.hpp"
#include "temptrec/synthgen.hpp"

namespace temptrec {

namespace {

constexpr std::uint64_t kResampleStream = 0x6d6c;  // "ml"
constexpr std::uint64_t kRoundStream = 0x726e64;   // "rnd"
constexpr std::uint64_t kMovieStream = 0x6d6f76;   // "mov"

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <typename T>
T parse_integer(std::string_view field, std::string_view name, std::size_t line_number) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw InputError("line " + std::to_string(line_number) + ": malformed " + std::string(name) + " '" +
                     std::string(field) + "'");
  }
  return value;
}

double parse_real(std::string_view field, std::string_view name, std::size_t line_number) {
  // gcc 11 has floating-point from_chars
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw InputError("line " + std::to_string(line_number) + ": malformed " + std::string(name) + " '" +
                     std::string(field) + "'");
  }
  return value;
}

std::vector<std::int64_t> eligible_users(const std::map<std::int64_t, int>& counts, int needed) {
  std::vector<std::int64_t> out;
  for (const auto& [user, count] : counts) {
    if (count >= needed) out.push_back(user);
  }
  return out;
}

std::vector<std::int64_t> pick_users(const std::vector<std::int64_t>& eligible, const SandboxConfig& config,
                                     Rng& rng) {
  if (static_cast<int>(eligible.size()) < config.m_users) {
    throw InputError("only " + std::to_string(eligible.size()) + " users have >= " +
                     std::to_string(config.ratings_per_user) + " ratings; need " + std::to_string(config.m_users));
  }
  std::vector<std::int64_t> users;
  for (std::size_t pos : rng.sample_without_replacement(eligible.size(), config.m_users)) {
    users.push_back(eligible[pos]);
  }
  std::sort(users.begin(), users.end());
  return users;
}

// Builds a sandbox once the users are fixed; `rows_by_user` holds every rating of each sampled user.
Sandbox assemble(const std::vector<std::int64_t>& users,
                 const std::unordered_map<std::int64_t, std::vector<RatingRow>>& rows_by_user,
                 const SandboxConfig& config, Rng& rng) {
  Sandbox sandbox;
  sandbox.user_ids = users;
  sandbox.rounds.resize(users.size());

  std::vector<std::vector<RatingRow>> picked(users.size());
  std::map<std::int64_t, double> movie_weight;
  for (std::size_t j = 0; j < users.size(); ++j) {
    std::vector<RatingRow> rows = rows_by_user.at(users[j]);
    // canonical order before sampling
    std::sort(rows.begin(), rows.end(), [](const RatingRow& a, const RatingRow& b) {
      return std::tie(a.timestamp, a.movie_id) < std::tie(b.timestamp, b.movie_id);
    });
    Rng user_rng = rng.substream(kRoundStream, j);
    for (std::size_t pos : user_rng.sample_without_replacement(rows.size(), config.ratings_per_user)) {
      picked[j].push_back(rows[pos]);
    }
    std::sort(picked[j].begin(), picked[j].end(), [](const RatingRow& a, const RatingRow& b) {
      return std::tie(a.timestamp, a.movie_id) < std::tie(b.timestamp, b.movie_id);
    });
    for (const auto& row : picked[j]) movie_weight[row.movie_id] += 1.0;
  }

  if (static_cast<int>(movie_weight.size()) < config.n_movies) {
    throw InputError("sampled rounds cover only " + std::to_string(movie_weight.size()) + " movies; need " +
                     std::to_string(config.n_movies));
  }
  // Weighted sampling without replacement (Efraimidis-Spirakis keys).
  Rng movie_rng = rng.substream(kMovieStream);
  std::vector<std::pair<double, std::int64_t>> keyed;
  for (const auto& [movie, weight] : movie_weight) {
    keyed.emplace_back(std::log(movie_rng.uniform()) / weight, movie);
  }
  std::partial_sort(keyed.begin(), keyed.begin() + config.n_movies, keyed.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (int k = 0; k < config.n_movies; ++k) sandbox.movie_ids.push_back(keyed[k].second);
  std::sort(sandbox.movie_ids.begin(), sandbox.movie_ids.end());

  std::unordered_map<std::int64_t, ItemId> item_of;
  for (std::size_t i = 0; i < sandbox.movie_ids.size(); ++i) item_of[sandbox.movie_ids[i]] = static_cast<ItemId>(i);
  for (std::size_t j = 0; j < users.size(); ++j) {
    for (const auto& row : picked[j]) {
      const auto it = item_of.find(row.movie_id);
      sandbox.rounds[j].push_back(
          {row.movie_id, it == item_of.end() ? kOutside : it->second, row.rating, row.timestamp});
    }
  }
  return sandbox;
}

double mean_of(const std::vector<double>& values) {
  return values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / values.size();
}

double std_of(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (values.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Ingestion

bool is_half_star(double rating) {
  if (!(rating >= RatingMap::kMinStars && rating <= RatingMap::kMaxStars)) return false;
  const double doubled = rating * 2.0;
  return doubled == std::round(doubled);
}

RatingRow parse_rating_line(std::string_view line, std::size_t line_number) {
  line = trim(line);
  std::string_view fields[4];
  std::size_t count = 0;
  std::size_t start = 0;
  while (count < 4) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields[count++] = line.substr(start);
      break;
    }
    fields[count++] = line.substr(start, comma - start);
    start = comma + 1;
    if (count == 4) {
      throw InputError("line " + std::to_string(line_number) + ": expected 4 fields, found more");
    }
  }
  if (count != 4) {
    throw InputError("line " + std::to_string(line_number) + ": expected 4 fields, found " + std::to_string(count));
  }
  RatingRow row;
  row.user_id = parse_integer<std::int64_t>(trim(fields[0]), "userId", line_number);
  row.movie_id = parse_integer<std::int64_t>(trim(fields[1]), "movieId", line_number);
  row.rating = parse_real(trim(fields[2]), "rating", line_number);
  row.timestamp = parse_integer<std::int64_t>(trim(fields[3]), "timestamp", line_number);
  if (!is_half_star(row.rating)) {
    throw InputError("line " + std::to_string(line_number) + ": rating " + std::string(trim(fields[2])) +
                     " is not a half-star value in [0.5, 5]");
  }
  if (row.timestamp <= 0) {
    throw InputError("line " + std::to_string(line_number) + ": timestamp must be positive");
  }
  return row;
}

void scan_ratings(const std::string& path, const std::function<void(const RatingRow&)>& sink) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open ratings file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": missing header row");
  if (trim(line) != "userId,movieId,rating,timestamp") {
    throw InputError(path + ": line 1: expected header 'userId,movieId,rating,timestamp'");
  }
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    sink(parse_rating_line(line, line_number));
  }
}

std::vector<RatingRow> load_ratings(const std::string& path) {
  std::vector<RatingRow> rows;
  scan_ratings(path, [&](const RatingRow& row) { rows.push_back(row); });
  return rows;
}

// ---------------------------------------------------------------------------
// Sandbox

void SandboxConfig::validate() const {
  if (m_users < 1 || n_movies < 1 || ratings_per_user < 1 || resamples < 1 || latent_dim < 1 || slate_size < 1) {
    throw ConfigError("sandbox sizes must all be >= 1");
  }
}

std::size_t Sandbox::outside_events(std::size_t user) const {
  return static_cast<std::size_t>(std::count_if(rounds[user].begin(), rounds[user].end(),
                                                [](const SandboxRound& r) { return r.item == kOutside; }));
}

Sandbox build_sandbox(const std::vector<RatingRow>& rows, const SandboxConfig& config, Rng& rng) {
  config.validate();
  std::map<std::int64_t, int> counts;
  for (const auto& row : rows) ++counts[row.user_id];
  const auto users = pick_users(eligible_users(counts, config.ratings_per_user), config, rng);
  const std::set<std::int64_t> wanted(users.begin(), users.end());
  std::unordered_map<std::int64_t, std::vector<RatingRow>> by_user;
  for (const auto& row : rows) {
    if (wanted.count(row.user_id)) by_user[row.user_id].push_back(row);
  }
  Sandbox sandbox = assemble(users, by_user, config, rng);
  return sandbox;
}

std::vector<Sandbox> build_sandboxes(const std::vector<RatingRow>& rows, const SandboxConfig& config) {
  std::vector<Sandbox> out;
  for (int r = 0; r < config.resamples; ++r) {
    const std::uint64_t seed = mix_seed(config.seed, kResampleStream, r);
    Rng rng(seed);
    out.push_back(build_sandbox(rows, config, rng));
    out.back().seed = seed;
  }
  return out;
}

std::vector<Sandbox> build_sandboxes_from_file(const std::string& path, const SandboxConfig& config) {
  config.validate();
  std::map<std::int64_t, int> counts;
  scan_ratings(path, [&](const RatingRow& row) { ++counts[row.user_id]; });
  const auto eligible = eligible_users(counts, config.ratings_per_user);

  std::vector<Rng> rngs;
  std::vector<std::vector<std::int64_t>> users;
  std::set<std::int64_t> wanted;
  for (int r = 0; r < config.resamples; ++r) {
    rngs.emplace_back(mix_seed(config.seed, kResampleStream, r));
    users.push_back(pick_users(eligible, config, rngs.back()));
    wanted.insert(users.back().begin(), users.back().end());
  }
  std::unordered_map<std::int64_t, std::vector<RatingRow>> by_user;
  scan_ratings(path, [&](const RatingRow& row) {
    if (wanted.count(row.user_id)) by_user[row.user_id].push_back(row);
  });

  std::vector<Sandbox> out;
  for (int r = 0; r < config.resamples; ++r) {
    out.push_back(assemble(users[r], by_user, config, rngs[r]));
    out.back().seed = mix_seed(config.seed, kResampleStream, r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Click reconstruction

InteractionLog reconstruct_click_history(const Sandbox& sandbox, const ReconstructionConfig& config,
                                         std::vector<std::int64_t>* training_cutoffs) {
  const int num_users = static_cast<int>(sandbox.user_ids.size());
  const int num_items = static_cast<int>(sandbox.movie_ids.size());

  struct Event {
    std::int64_t timestamp;
    std::int64_t movie_id;
    int user;
    int index;  // round index within the user
  };
  std::vector<Event> events;
  for (int j = 0; j < num_users; ++j) {
    for (std::size_t t = 0; t < sandbox.rounds[j].size(); ++t) {
      const auto& r = sandbox.rounds[j][t];
      events.push_back({r.timestamp, r.movie_id, j, static_cast<int>(t)});
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return std::tie(a.timestamp, a.movie_id, a.user) < std::tie(b.timestamp, b.movie_id, b.user);
  });

  // Ratings become visible once their timestamp is strictly in the past.
  std::vector<RatingObservation> released;
  std::vector<std::int64_t> released_ts;
  std::size_t release_cursor = 0;
  std::vector<double> movie_sum(num_items, 0.0);
  std::vector<int> movie_count(num_items, 0);

  std::optional<RatingFactorization> model;
  std::size_t trained_on = 0;
  std::int64_t model_cutoff = LLONG_MIN;
  int retrain_counter = 0;

  std::vector<std::vector<char>> consumed(num_users, std::vector<char>(num_items, 0));
  std::vector<std::vector<InteractionRecord>> per_user(num_users);
  std::vector<std::vector<std::int64_t>> per_user_cutoff(num_users);

  for (const Event& event : events) {
    while (release_cursor < events.size() && events[release_cursor].timestamp < event.timestamp) {
      const Event& past = events[release_cursor++];
      const auto& r = sandbox.rounds[past.user][past.index];
      if (r.item == kOutside) continue;
      released.push_back({past.user, r.item, r.rating});
      released_ts.push_back(r.timestamp);
      movie_sum[r.item] += r.rating;
      ++movie_count[r.item];
    }
    if (static_cast<int>(released.size()) >= config.min_training_ratings &&
        released.size() >= std::max<std::size_t>(1, 2 * trained_on)) {
      TrainConfig train = config.recommender;
      train.seed = mix_seed(config.recommender.seed, 0x7265636f6e, retrain_counter++);
      model = RatingFactorization::train(released, num_users, num_items, train);
      trained_on = released.size();
      model_cutoff = *std::max_element(released_ts.begin(), released_ts.begin() + trained_on);
    }

    const int user = event.user;
    std::vector<std::pair<double, ItemId>> ranked;
    std::int64_t cutoff = LLONG_MIN;
    if (model) {
      cutoff = model_cutoff;
      for (ItemId i = 0; i < num_items; ++i) {
        if (!consumed[user][i]) ranked.emplace_back(model->predict(user, i), i);
      }
    } else {
      // cold start: per-movie mean of released ratings; unrated movies rank last
      if (!released_ts.empty()) cutoff = *std::max_element(released_ts.begin(), released_ts.end());
      for (ItemId i = 0; i < num_items; ++i) {
        if (consumed[user][i]) continue;
        ranked.emplace_back(movie_count[i] ? movie_sum[i] / movie_count[i] : -INFINITY, i);
      }
    }
    const std::size_t size = std::min(config.slate_size, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + size, ranked.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });

    const auto& round = sandbox.rounds[user][event.index];
    InteractionRecord record;
    record.user = user;
    record.round = event.index;
    for (std::size_t k = 0; k < size; ++k) record.slate.push_back(ranked[k].second);
    if (round.item != kOutside) {
      if (std::find(record.slate.begin(), record.slate.end(), round.item) == record.slate.end()) {
        if (record.slate.size() < config.slate_size) {
          record.slate.push_back(round.item);
        } else {
          record.slate.back() = round.item;
        }
      }
      record.chosen = round.item;
      record.rating = round.rating;
      consumed[user][round.item] = 1;
    } else {
      record.chosen = kOutside;
      record.outside_enrichment = round.rating;
    }
    per_user[user].push_back(std::move(record));
    per_user_cutoff[user].push_back(cutoff);
  }

  InteractionLog log;
  if (training_cutoffs) training_cutoffs->clear();
  for (int j = 0; j < num_users; ++j) {
    for (std::size_t t = 0; t < per_user[j].size(); ++t) {
      log.push_back(std::move(per_user[j][t]));
      if (training_cutoffs) training_cutoffs->push_back(per_user_cutoff[j][t]);
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Estimated world

SandboxEstimate estimate_world_from_sandbox(const InteractionLog& log, const Sandbox& sandbox,
                                            const TrainConfig& config) {
  const int num_users = static_cast<int>(sandbox.user_ids.size());
  const int num_items = static_cast<int>(sandbox.movie_ids.size());

  std::vector<std::vector<double>> outside(num_users);
  std::vector<double> all_outside;
  for (const auto& record : log) {
    if (record.chosen != kOutside) continue;
    outside[record.user].push_back(record.outside_enrichment);
    all_outside.push_back(record.outside_enrichment);
  }

  SandboxEstimate result;
  const double population = mean_of(all_outside);
  std::vector<double> expected(num_users);
  result.outside_rating_sd.assign(num_users, 0.0);
  const double population_sd = std_of(all_outside);
  for (int j = 0; j < num_users; ++j) {
    if (outside[j].empty()) {
      expected[j] = population;
      result.outside_rating_sd[j] = population_sd;
      result.notes.push_back("user " + std::to_string(sandbox.user_ids[j]) +
                             ": no outside rounds, E[u(o)] set to population mean " + std::to_string(population));
    } else {
      expected[j] = mean_of(outside[j]);
      result.outside_rating_sd[j] = outside[j].size() > 1 ? std_of(outside[j]) : population_sd;
    }
  }

  TrainConfig train = config;
  train.freeze_lambda_f = true;
  train.rating_map = RatingMap::identity();
  const Dataset dataset = Dataset::from_log(log, num_users, num_items);
  result.model = fit(dataset, train, expected);
  return result;
}

World world_from_estimate(const SandboxEstimate& estimate, const InteractionLog& history) {
  const EstimatedModel& model = estimate.model;
  World world;
  world.dim = model.dim();
  for (int j = 0; j < model.num_users(); ++j) {
    UserProfile user;
    user.id = j;
    user.a = model.a_hat(j);
    user.b = model.b_hat(j);
    user.lambda_f = model.lambda_f(j);
    user.lambda_c = model.lambda_c(j);
    world.users.push_back(std::move(user));
  }
  for (int i = 0; i < model.num_items(); ++i) {
    OptionProfile item;
    item.id = i;
    item.x = model.x_hat(i);
    item.y = model.y_hat(i);
    world.items.push_back(std::move(item));
  }
  ParametricOutside outside;
  outside.mu = model.mu();
  outside.sigma = model.sigma();
  outside.mean_enrichment = model.expected_outside_enrichment;
  outside.enrichment_sd = estimate.outside_rating_sd;
  world.parametric_outside = std::move(outside);
  world.rating_map = RatingMap::identity();
  world.reset_consumption();
  for (const auto& record : history) {
    if (record.chosen != kOutside) world.consumed[record.user][record.chosen] = 1;
  }
  world.metadata["generator"] = "movielens_sandbox";
  world.validate();
  return world;
}

MovieLensRun prepare_movielens_run(Sandbox sandbox, const MovieLensConfig& config) {
  MovieLensRun run;
  run.sandbox = std::move(sandbox);
  ReconstructionConfig reconstruction = config.reconstruction;
  reconstruction.slate_size = config.sandbox.slate_size;
  reconstruction.recommender.latent_dim = config.sandbox.latent_dim;
  reconstruction.recommender.seed = mix_seed(run.sandbox.seed, 0x7265636f);
  run.history = reconstruct_click_history(run.sandbox, reconstruction);

  TrainConfig train = config.train;
  train.latent_dim = config.sandbox.latent_dim;
  train.seed = mix_seed(config.train.seed ^ run.sandbox.seed, 0x666974);

  // Held-out check: the last rounds of each user.
  {
    InteractionLog fit_part;
    InteractionLog held_out;
    std::vector<int> length(run.sandbox.user_ids.size(), 0);
    for (const auto& record : run.history) ++length[record.user];
    for (const auto& record : run.history) {
      const int keep = static_cast<int>(std::ceil(length[record.user] * (1.0 - config.holdout_fraction)));
      (record.round < keep ? fit_part : held_out).push_back(record);
    }
    const SandboxEstimate partial = estimate_world_from_sandbox(fit_part, run.sandbox, train);
    std::size_t hits = 0;
    for (const auto& record : held_out) hits += predict_choice(partial.model, record) == record.chosen;
    run.holdout_choice_accuracy = held_out.empty() ? 0.0 : static_cast<double>(hits) / held_out.size();
  }

  run.estimate = estimate_world_from_sandbox(run.history, run.sandbox, train);
  run.world = world_from_estimate(run.estimate, run.history);
  return run;
}

MetricsReport run_movielens_experiment(const std::vector<MovieLensRun>& runs, const MovieLensConfig& config,
                                       const HistogramBins& bins) {
  if (runs.empty()) throw InputError("no prepared MovieLens runs");
  const std::vector<PolicyKind> policies{PolicyKind::GreedyEstimated, PolicyKind::RatingsBased,
                                         PolicyKind::ClickBased};
  MetricsReport report;
  report.scenario = "movielens";
  report.info = InfoLevel::Perfect;
  for (PolicyKind kind : policies) {
    PolicyResult result;
    result.policy = kind;
    result.histogram = Histogram(bins);
    report.results.push_back(std::move(result));
  }
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const MovieLensRun& run = runs[r];
    const Rng rng(mix_seed(run.sandbox.seed, 0x73696d));
    for (auto& result : report.results) {
      World fork = run.world;
      PolicyContext context;
      context.info = InfoLevel::Perfect;
      context.world = &fork;
      context.model = &run.estimate.model;
      const InteractionLog log =
          run_policy_rounds(fork, result.policy, context, rng, config.rounds, config.sandbox.slate_size);
      result.per_replication.push_back(overall_individual_enrichment(log, fork));
      result.histogram.merge(consumption_frequency(log, fork, bins));
    }
  }
  for (auto& result : report.results) {
    result.mean = mean_of(result.per_replication);
    result.std = std_of(result.per_replication);
  }
  report.metadata["scenario"] = "movielens";
  report.metadata["resamples"] = std::to_string(runs.size());
  report.metadata["m_users"] = std::to_string(config.sandbox.m_users);
  report.metadata["n_movies"] = std::to_string(config.sandbox.n_movies);
  report.metadata["ratings_per_user"] = std::to_string(config.sandbox.ratings_per_user);
  report.metadata["rounds"] = std::to_string(config.rounds);
  report.metadata["slate_size"] = std::to_string(config.sandbox.slate_size);
  report.metadata["latent_dim"] = std::to_string(config.sandbox.latent_dim);
  return report;
}

// ---------------------------------------------------------------------------
// Synthetic ratings file

void write_synthetic_ratings(const std::string& path, const SyntheticRatingsConfig& config) {
  ScenarioConfig scenario;
  scenario.m = config.users;
  scenario.n = config.movies;
  scenario.k = 1;
  scenario.d = config.d;
  scenario.scenario = Scenario::Similar;
  scenario.seed = config.seed;
  const World world = make_world(scenario);
  const RatingMap stars = RatingMap::star_scale(0.0, 20.0);

  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "userId,movieId,rating,timestamp\n";
  Rng rng = Rng(config.seed).substream(0x73796e);
  for (int j = 0; j < config.users; ++j) {
    const auto& user = world.users[j];
    const int count = config.min_ratings + static_cast<int>(rng.index(config.max_ratings - config.min_ratings + 1));
    std::vector<char> seen(config.movies, 0);
    std::int64_t timestamp = 1'000'000'000 + static_cast<std::int64_t>(rng.index(200'000'000));
    for (int t = 0; t < count && t < config.movies; ++t) {
      std::vector<int> open;
      for (int i = 0; i < config.movies; ++i) {
        if (!seen[i]) open.push_back(i);
      }
      int best = -1;
      double best_score = -INFINITY;
      for (std::size_t pos : rng.sample_without_replacement(open.size(), config.slate_size)) {
        const double score = choice_score(user, world.items[open[pos]]);
        if (score > best_score) {
          best_score = score;
          best = open[pos];
        }
      }
      seen[best] = 1;
      const double stars_value = std::round(stars(enrichment(user, world.items[best])) * 2.0) / 2.0;
      timestamp += 1 + static_cast<std::int64_t>(rng.index(500'000));
      out << (j + 1) << ',' << (best + 1) << ',' << std::clamp(stars_value, 0.5, 5.0) << ',' << timestamp << '\n';
    }
  }
}

}  // namespace temptrec
