#pragma once

// Experiment protocol: random warm-up slates, policy rounds, replications,
// enrichment metrics, and the exhaustive policy-tree optimum for tiny worlds.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "temptrec/core_model.hpp"
#include "temptrec/estimation.hpp"
#include "temptrec/policies.hpp"
#include "temptrec/synthgen.hpp"

namespace temptrec {

struct ExperimentConfig {
  int total_rounds = 75;
  int warmup_rounds = 25;
  int policy_rounds = 50;
  std::size_t slate_size = kDefaultSlateSize;
  int replications = 5;
  std::vector<PolicyKind> policies;
  InfoLevel info = InfoLevel::Perfect;
  std::uint64_t seed = 0;
  ScenarioConfig scenario;
  TrainConfig train;

  // The five policies compared at the given information level.
  static std::vector<PolicyKind> default_policies(InfoLevel info);
  void validate() const;
};

struct HistogramBins {
  double u_min = -10.0;
  double u_max = 30.0;
  int u_bins = 20;
  double v_min = -20.0;
  double v_max = 20.0;
  int v_bins = 20;
};

// Counts of consumed on-platform items over (enrichment, temptation) bins.
// Out-of-range values land in the edge bins.
struct Histogram {
  HistogramBins bins;
  std::vector<long> counts;  // row-major [u_bin][v_bin]
  long total = 0;
  double sum_u = 0.0;
  double sum_v = 0.0;

  explicit Histogram(HistogramBins b = {});
  void add(double u, double v);
  void merge(const Histogram& other);
  long at(int u_bin, int v_bin) const { return counts[static_cast<std::size_t>(u_bin) * bins.v_bins + v_bin]; }
  int u_bin_of(double u) const;
  int v_bin_of(double v) const;
  double mean_u() const { return total ? sum_u / total : 0.0; }
  double mean_v() const { return total ? sum_v / total : 0.0; }
};

struct PolicyResult {
  PolicyKind policy = PolicyKind::GreedyPerfect;
  std::vector<double> per_replication;
  double mean = 0.0;
  double std = 0.0;
  Histogram histogram;
};

struct MetricsReport {
  std::string scenario;
  InfoLevel info = InfoLevel::Perfect;
  std::vector<PolicyResult> results;
  std::map<std::string, std::string> metadata;
  double runtime_seconds = 0.0;

  const PolicyResult& result(PolicyKind kind) const;
};

// Random non-consumed slates of `slate_size` for `rounds` rounds per user.
InteractionLog run_warmup(World& world, Rng& rng, int rounds = 25, std::size_t slate_size = kDefaultSlateSize);

// Policy-driven rounds. Each user gets its own substream of `rng`, so all
// policies run from the same seed see the same outside-option draws.
InteractionLog run_policy_rounds(World& world, PolicyKind policy, const PolicyContext& context, const Rng& rng,
                                 int rounds = 50, std::size_t slate_size = kDefaultSlateSize);

// Mean over users of the summed true enrichment of everything consumed in `policy_log`.
double overall_individual_enrichment(const InteractionLog& policy_log, const World& world);

// Per-user enrichment sums (user order), the quantity averaged above.
std::vector<double> per_user_enrichment(const InteractionLog& policy_log, const World& world);

Histogram consumption_frequency(const InteractionLog& log, const World& world, const HistogramBins& bins = {});

// Exact optimum over all recommendation policy trees for one user of a tiny
// world (n <= 5, K <= 3, T <= 4), starting from an empty consumed set.
double brute_force_optimal(const World& world, UserId user, int rounds);

// Exact expected enrichment of the greedy perfect-information policy's
// trajectory, branching over every outside-option draw.
double greedy_expected_value(const World& world, UserId user, int rounds,
                             std::size_t slate_size = kDefaultSlateSize);

// Fitted models used by partial-information policies.
struct PartialInfoModels {
  EstimatedModel joint;
  EstimatedModel click;
  RatingFactorization ratings;
};

PartialInfoModels fit_partial_models(const World& world, const InteractionLog& history, const TrainConfig& config);

// Called once per (replication, policy) with the post-run world and logs.
using RunObserver = std::function<void(int replication, PolicyKind policy, const World& world,
                                       const InteractionLog& warmup, const InteractionLog& policy_log)>;

MetricsReport replicate(const ExperimentConfig& config, const HistogramBins& bins = {},
                        const RunObserver& observer = {});

}  // namespace temptrec
