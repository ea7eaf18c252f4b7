#pragma once

// Synthetic worlds: Gaussian users/items/outside options with anti-correlated
// enrichment and temptation, three outside-option scenarios, and a skewed
// Johnson S_U variant for the on-platform universal components.

#include <cstdint>
#include <string_view>
#include <vector>

#include "temptrec/core_model.hpp"
#include "temptrec/rng.hpp"

namespace temptrec {

enum class Scenario { EnrichingOnPlatform, TemptingOnPlatform, Similar };

std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view name);

// variate = xi + lambda * sinh((z - gamma) / delta)
struct JohnsonSuParams {
  double gamma = 0.0;
  double delta = 1.0;
  double xi = 0.0;
  double lambda = 1.0;

  double quantile(double p) const;
  double cdf(double value) const;
  double mean() const;
  double variance() const;
  double skewness() const;
};

struct ItemDistribution {
  bool johnson = false;
  JohnsonSuParams enrichment{3.25, 1.0, 12.3520, 0.3933};
  JohnsonSuParams temptation{3.25, 1.0, 2.3520, 0.3933};
};

struct ScenarioConfig {
  int m = 1000;
  int n = 250;
  int k = 100;
  int d = 3;
  Scenario scenario = Scenario::EnrichingOnPlatform;
  ItemDistribution item_distribution;
  std::uint64_t seed = 0;

  void validate() const;
};

// Generator constants.
struct GeneratorParams {
  static constexpr double kUserVar = 2.5;
  static constexpr double kUserCov = -1.0;
  static constexpr double kLambdaCAlpha = 12.5;
  static constexpr double kLambdaCBeta = 37.5;
  static constexpr double kLambdaFAlpha = 37.5;
  static constexpr double kLambdaFBeta = 12.5;
  static constexpr double kItemMeanX = 10.0;
  static constexpr double kItemMeanY = 0.0;
  static constexpr double kFirstVar = 10.0;
  static constexpr double kFirstCov = -1.0;
};

// (mu_x, mu_y) of the outside options' first components.
std::pair<double, double> outside_means(Scenario scenario);

std::vector<UserProfile> sample_users(const ScenarioConfig& config, Rng& rng);
std::vector<OptionProfile> sample_items(const ScenarioConfig& config, Rng& rng);
std::vector<OptionProfile> sample_items_johnson(const ScenarioConfig& config, Rng& rng);
std::vector<OptionProfile> sample_outside_options(const ScenarioConfig& config, Rng& rng);

// Users, items and outside pool each come from their own substream of `rng`.
World make_world(const ScenarioConfig& config, Rng& rng);
World make_world(const ScenarioConfig& config);

}  // namespace temptrec
