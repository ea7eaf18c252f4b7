#include "temptrec/simharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include "temptrec/errors.hpp"

namespace temptrec {

namespace {

constexpr std::uint64_t kWorldStream = 0x776f726c64;   // "world"
constexpr std::uint64_t kWarmupStream = 0x7761726d;    // "warm"
constexpr std::uint64_t kPolicyStream = 0x706f6c;      // "pol"
constexpr std::uint64_t kFitStream = 0x666974;         // "fit"

double true_enrichment(const World& world, const InteractionRecord& record) {
  if (record.chosen == kOutside) return record.outside_enrichment;
  return enrichment(world.users[record.user], world.items[record.chosen]);
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (values.size() - 1));
}

}  // namespace

std::vector<PolicyKind> ExperimentConfig::default_policies(InfoLevel info) {
  return {info == InfoLevel::Perfect ? PolicyKind::GreedyPerfect : PolicyKind::GreedyEstimated,
          PolicyKind::PureEnrichment, PolicyKind::PureTemptation, PolicyKind::RatingsBased, PolicyKind::ClickBased};
}

void ExperimentConfig::validate() const {
  if (warmup_rounds < 0 || policy_rounds < 1) throw ConfigError("need warmup_rounds >= 0 and policy_rounds >= 1");
  if (warmup_rounds + policy_rounds != total_rounds) {
    throw ConfigError("warmup_rounds + policy_rounds must equal total_rounds");
  }
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (slate_size < 1) throw ConfigError("slate_size must be >= 1");
  if (policies.empty()) throw ConfigError("no policies configured");
  for (PolicyKind kind : policies) {
    if (kind == PolicyKind::GreedyPerfect && info == InfoLevel::Partial) {
      throw ConfigError("greedy_perfect is not available with partial information");
    }
  }
  scenario.validate();
  train.validate();
}

// ---------------------------------------------------------------------------
// Histogram

Histogram::Histogram(HistogramBins b) : bins(b) {
  if (bins.u_bins < 1 || bins.v_bins < 1 || !(bins.u_max > bins.u_min) || !(bins.v_max > bins.v_min)) {
    throw ConfigError("invalid histogram bins");
  }
  counts.assign(static_cast<std::size_t>(bins.u_bins) * bins.v_bins, 0);
}

int Histogram::u_bin_of(double u) const {
  const double t = (u - bins.u_min) / (bins.u_max - bins.u_min);
  return std::clamp(static_cast<int>(std::floor(t * bins.u_bins)), 0, bins.u_bins - 1);
}

int Histogram::v_bin_of(double v) const {
  const double t = (v - bins.v_min) / (bins.v_max - bins.v_min);
  return std::clamp(static_cast<int>(std::floor(t * bins.v_bins)), 0, bins.v_bins - 1);
}

void Histogram::add(double u, double v) {
  ++counts[static_cast<std::size_t>(u_bin_of(u)) * bins.v_bins + v_bin_of(v)];
  ++total;
  sum_u += u;
  sum_v += v;
}

void Histogram::merge(const Histogram& other) {
  if (other.counts.size() != counts.size()) throw ConfigError("cannot merge histograms with different bins");
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
  total += other.total;
  sum_u += other.sum_u;
  sum_v += other.sum_v;
}

const PolicyResult& MetricsReport::result(PolicyKind kind) const {
  for (const auto& r : results) {
    if (r.policy == kind) return r;
  }
  throw ConfigError("report has no entry for policy " + std::string(to_string(kind)));
}

// ---------------------------------------------------------------------------
// Protocol

InteractionLog run_warmup(World& world, Rng& rng, int rounds, std::size_t slate_size) {
  InteractionLog log;
  log.reserve(static_cast<std::size_t>(rounds) * world.num_users());
  for (int t = 0; t < rounds; ++t) {
    for (UserId user = 0; user < static_cast<UserId>(world.num_users()); ++user) {
      const auto available = world.available_items(user);
      Slate slate;
      for (std::size_t pos : rng.sample_without_replacement(available.size(), slate_size)) {
        slate.push_back(available[pos]);
      }
      log.push_back(step_round(world, user, slate, rng));
    }
    ++world.round;
  }
  return log;
}

InteractionLog run_policy_rounds(World& world, PolicyKind policy, const PolicyContext& context, const Rng& rng,
                                 int rounds, std::size_t slate_size) {
  std::vector<Rng> user_rngs;
  user_rngs.reserve(world.num_users());
  for (std::size_t user = 0; user < world.num_users(); ++user) user_rngs.push_back(rng.substream(kPolicyStream, user));

  PolicyContext bound = context;
  if (bound.info == InfoLevel::Perfect || policy == PolicyKind::GreedyPerfect) bound.world = &world;

  InteractionLog log;
  log.reserve(static_cast<std::size_t>(rounds) * world.num_users());
  for (int t = 0; t < rounds; ++t) {
    for (UserId user = 0; user < static_cast<UserId>(world.num_users()); ++user) {
      const auto available = world.available_items(user);
      const Slate slate = recommend(policy, user, available, bound, slate_size);
      log.push_back(step_round(world, user, slate, user_rngs[user]));
    }
    ++world.round;
  }
  return log;
}

std::vector<double> per_user_enrichment(const InteractionLog& policy_log, const World& world) {
  if (policy_log.empty()) throw ContractError("empty policy-round log");
  std::vector<double> sums(world.num_users(), 0.0);
  for (const auto& record : policy_log) sums.at(record.user) += true_enrichment(world, record);
  return sums;
}

double overall_individual_enrichment(const InteractionLog& policy_log, const World& world) {
  const auto sums = per_user_enrichment(policy_log, world);
  double total = 0.0;
  for (double s : sums) total += s;
  return total / static_cast<double>(sums.size());
}

Histogram consumption_frequency(const InteractionLog& log, const World& world, const HistogramBins& bins) {
  Histogram histogram(bins);
  for (const auto& record : log) {
    if (record.chosen == kOutside) continue;
    const auto& user = world.users[record.user];
    const auto& item = world.items[record.chosen];
    histogram.add(enrichment(user, item), temptation(user, item));
  }
  return histogram;
}

// ---------------------------------------------------------------------------
// Exhaustive optimum

double brute_force_optimal(const World& world, UserId user, int rounds) {
  const std::size_t n = world.items.size();
  const std::size_t k = world.outside_pool.size();
  if (n > 5 || k > 3 || rounds > 4 || rounds < 0 || world.parametric_outside) {
    throw ConfigError("instance too large for exhaustive search (need n <= 5, K <= 3, T <= 4)");
  }
  const auto& profile = world.users.at(user);
  std::vector<double> item_u(n);
  std::vector<double> item_c(n);
  for (std::size_t i = 0; i < n; ++i) {
    item_u[i] = enrichment(profile, world.items[i]);
    item_c[i] = choice_score(profile, world.items[i]);
  }
  std::vector<double> out_u(k);
  std::vector<double> out_c(k);
  for (std::size_t o = 0; o < k; ++o) {
    out_u[o] = enrichment(profile, world.outside_pool[o]);
    out_c[o] = choice_score(profile, world.outside_pool[o]);
  }

  // value[mask][t]: best expected enrichment over t remaining rounds when `mask` is consumed.
  const std::size_t masks = std::size_t{1} << n;
  std::vector<std::vector<double>> value(masks, std::vector<double>(rounds + 1, 0.0));
  for (int t = 1; t <= rounds; ++t) {
    for (std::size_t mask = 0; mask < masks; ++mask) {
      // recommend nothing: the outside option is consumed
      double best = 0.0;
      for (std::size_t o = 0; o < k; ++o) best += world.availability[o] * (out_u[o] + value[mask][t - 1]);
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (std::size_t{1} << i)) continue;
        const std::size_t next = mask | (std::size_t{1} << i);
        double action = 0.0;
        for (std::size_t o = 0; o < k; ++o) {
          action += world.availability[o] *
                    (item_c[i] >= out_c[o] ? item_u[i] + value[next][t - 1] : out_u[o] + value[mask][t - 1]);
        }
        best = std::max(best, action);
      }
      value[mask][t] = best;
    }
  }
  return value[0][rounds];
}

namespace {

double greedy_value_from(World& world, UserId user, int rounds, std::size_t slate_size) {
  if (rounds == 0) return 0.0;
  PolicyContext context;
  context.world = &world;
  const auto available = world.available_items(user);
  const Slate slate = greedy_slate(PolicyKind::GreedyPerfect, user, available, context, slate_size);
  std::vector<const OptionProfile*> options;
  for (ItemId item : slate) options.push_back(&world.items[item]);

  const auto& profile = world.users[user];
  double total = 0.0;
  for (std::size_t o = 0; o < world.outside_pool.size(); ++o) {
    const double p = world.availability[o];
    if (p == 0.0) continue;
    const OptionProfile& outside = world.outside_pool[o];
    const Selection pick = select_consumption(profile, options, &outside);
    if (pick.outside) {
      total += p * (enrichment(profile, outside) + greedy_value_from(world, user, rounds - 1, slate_size));
    } else {
      const ItemId item = slate[pick.slate_pos];
      world.consumed[user][item] = 1;
      const double future = greedy_value_from(world, user, rounds - 1, slate_size);
      world.consumed[user][item] = 0;
      total += p * (enrichment(profile, world.items[item]) + future);
    }
  }
  return total;
}

}  // namespace

double greedy_expected_value(const World& world, UserId user, int rounds, std::size_t slate_size) {
  if (world.parametric_outside) throw ConfigError("greedy_expected_value needs a finite outside pool");
  World scratch = world;
  scratch.reset_consumption();
  return greedy_value_from(scratch, user, rounds, slate_size);
}

// ---------------------------------------------------------------------------
// Replications

PartialInfoModels fit_partial_models(const World& world, const InteractionLog& history, const TrainConfig& config) {
  const Dataset dataset =
      Dataset::from_log(history, static_cast<int>(world.num_users()), static_cast<int>(world.num_items()));
  std::vector<double> outside(world.num_users());
  for (std::size_t j = 0; j < world.num_users(); ++j) outside[j] = expected_outside_enrichment(world, j);

  TrainConfig joint_config = config;
  joint_config.rating_map = world.rating_map;
  TrainConfig click_config = joint_config;
  click_config.alpha = 0.0;
  click_config.seed = mix_seed(config.seed, kFitStream, 1);
  TrainConfig rating_config = joint_config;
  rating_config.seed = mix_seed(config.seed, kFitStream, 2);

  PartialInfoModels models{
      fit(dataset, joint_config, outside),
      fit(dataset, click_config, outside),
      RatingFactorization::train(dataset.ratings, dataset.num_users, dataset.num_items, rating_config),
  };
  return models;
}

MetricsReport replicate(const ExperimentConfig& config, const HistogramBins& bins, const RunObserver& observer) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  MetricsReport report;
  report.scenario = std::string(to_string(config.scenario.scenario));
  report.info = config.info;
  for (PolicyKind kind : config.policies) {
    PolicyResult result;
    result.policy = kind;
    result.histogram = Histogram(bins);
    report.results.push_back(std::move(result));
  }

  const Rng root(config.seed);
  for (int rep = 0; rep < config.replications; ++rep) {
    ScenarioConfig scenario = config.scenario;
    scenario.seed = mix_seed(config.seed, kWorldStream, rep);
    World world = make_world(scenario);

    Rng warmup_rng = root.substream(kWarmupStream, rep);
    const InteractionLog warmup = run_warmup(world, warmup_rng, config.warmup_rounds, config.slate_size);

    PolicyContext context;
    context.info = config.info;
    std::optional<PartialInfoModels> models;
    if (config.info == InfoLevel::Partial) {
      TrainConfig train = config.train;
      train.seed = mix_seed(config.train.seed ^ config.seed, kFitStream, rep);
      models = fit_partial_models(world, warmup, train);
      context.model = &models->joint;
      context.click_model = &models->click;
      context.rating_model = &models->ratings;
    }

    const Rng policy_rng = root.substream(kPolicyStream, rep);
    for (auto& result : report.results) {
      World fork = world;
      const InteractionLog log =
          run_policy_rounds(fork, result.policy, context, policy_rng, config.policy_rounds, config.slate_size);
      result.per_replication.push_back(overall_individual_enrichment(log, fork));
      result.histogram.merge(consumption_frequency(log, fork, bins));
      if (observer) observer(rep, result.policy, fork, warmup, log);
    }
  }

  for (auto& result : report.results) {
    double total = 0.0;
    for (double v : result.per_replication) total += v;
    result.mean = total / static_cast<double>(result.per_replication.size());
    result.std = sample_std(result.per_replication);
  }

  auto& meta = report.metadata;
  meta["scenario"] = report.scenario;
  meta["info_level"] = std::string(to_string(config.info));
  meta["seed"] = std::to_string(config.seed);
  meta["replications"] = std::to_string(config.replications);
  meta["warmup_rounds"] = std::to_string(config.warmup_rounds);
  meta["policy_rounds"] = std::to_string(config.policy_rounds);
  meta["slate_size"] = std::to_string(config.slate_size);
  meta["m"] = std::to_string(config.scenario.m);
  meta["n"] = std::to_string(config.scenario.n);
  meta["K"] = std::to_string(config.scenario.k);
  meta["d"] = std::to_string(config.scenario.d);
  meta["items"] = config.scenario.item_distribution.johnson ? "johnson_su" : "normal";
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace temptrec
