#include "temptrec/synthgen.hpp"

#include <charconv>
#include <cmath>

#include "temptrec/errors.hpp"

namespace temptrec {

namespace {

constexpr std::uint64_t kUserStream = 1;
constexpr std::uint64_t kItemStream = 2;
constexpr std::uint64_t kOutsideStream = 3;

std::string format_double(double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

void fill_tail(LatentVector& v, Rng& rng) {
  for (std::size_t k = 1; k < v.size(); ++k) v[k] = rng.normal();
}

}  // namespace

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::EnrichingOnPlatform: return "enriching";
    case Scenario::TemptingOnPlatform: return "tempting";
    case Scenario::Similar: return "similar";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "enriching") return Scenario::EnrichingOnPlatform;
  if (name == "tempting") return Scenario::TemptingOnPlatform;
  if (name == "similar") return Scenario::Similar;
  throw ConfigError("unknown scenario: " + std::string(name));
}

double JohnsonSuParams::quantile(double p) const {
  // Standard normal quantile by bisection on the CDF, then the S_U transform.
  double lo = -40.0;
  double hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return xi + lambda * std::sinh((0.5 * (lo + hi) - gamma) / delta);
}

double JohnsonSuParams::cdf(double value) const {
  const double z = gamma + delta * std::asinh((value - xi) / lambda);
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double JohnsonSuParams::mean() const {
  return xi - lambda * std::exp(1.0 / (2.0 * delta * delta)) * std::sinh(gamma / delta);
}

double JohnsonSuParams::variance() const {
  const double w = std::exp(1.0 / (delta * delta));
  return lambda * lambda / 2.0 * (w - 1.0) * (w * std::cosh(2.0 * gamma / delta) + 1.0);
}

double JohnsonSuParams::skewness() const {
  const double w = std::exp(1.0 / (delta * delta));
  const double omega = gamma / delta;
  const double num = -lambda * lambda * lambda * std::sqrt(w) * (w - 1.0) * (w - 1.0) *
                     (w * (w + 2.0) * std::sinh(3.0 * omega) + 3.0 * std::sinh(omega));
  return num / (4.0 * std::pow(variance(), 1.5));
}

void ScenarioConfig::validate() const {
  if (m < 1 || n < 1 || k < 1 || d < 1) throw ConfigError("m, n, K and d must all be >= 1");
}

std::pair<double, double> outside_means(Scenario scenario) {
  switch (scenario) {
    case Scenario::EnrichingOnPlatform: return {-5.0, 35.0 / 3.0};
    case Scenario::TemptingOnPlatform: return {15.0, -10.0};
    case Scenario::Similar: return {10.0, 0.0};
  }
  return {0.0, 0.0};
}

std::vector<UserProfile> sample_users(const ScenarioConfig& config, Rng& rng) {
  using G = GeneratorParams;
  std::vector<UserProfile> users(config.m);
  for (int j = 0; j < config.m; ++j) {
    auto& user = users[j];
    user.id = j;
    user.a.assign(config.d, 1.0);
    user.b.assign(config.d, 1.0);
    for (int l = 1; l < config.d; ++l) {
      std::tie(user.a[l], user.b[l]) = rng.bivariate_normal(0.0, 0.0, G::kUserVar, G::kUserVar, G::kUserCov);
    }
    do {
      user.lambda_c = rng.beta(G::kLambdaCAlpha, G::kLambdaCBeta);
      user.lambda_f = rng.beta(G::kLambdaFAlpha, G::kLambdaFBeta);
    } while (user.lambda_c > user.lambda_f);
  }
  return users;
}

std::vector<OptionProfile> sample_items(const ScenarioConfig& config, Rng& rng) {
  using G = GeneratorParams;
  std::vector<OptionProfile> items(config.n);
  for (int i = 0; i < config.n; ++i) {
    auto& item = items[i];
    item.id = i;
    item.kind = OptionKind::OnPlatformItem;
    item.x.assign(config.d, 0.0);
    item.y.assign(config.d, 0.0);
    std::tie(item.x[0], item.y[0]) =
        rng.bivariate_normal(G::kItemMeanX, G::kItemMeanY, G::kFirstVar, G::kFirstVar, G::kFirstCov);
    fill_tail(item.x, rng);
    fill_tail(item.y, rng);
  }
  return items;
}

std::vector<OptionProfile> sample_items_johnson(const ScenarioConfig& config, Rng& rng) {
  const auto& dist = config.item_distribution;
  std::vector<OptionProfile> items(config.n);
  for (int i = 0; i < config.n; ++i) {
    auto& item = items[i];
    item.id = i;
    item.kind = OptionKind::OnPlatformItem;
    item.x.assign(config.d, 0.0);
    item.y.assign(config.d, 0.0);
    const auto& ex = dist.enrichment;
    const auto& ty = dist.temptation;
    item.x[0] = rng.johnson_su(ex.gamma, ex.delta, ex.xi, ex.lambda);
    item.y[0] = rng.johnson_su(ty.gamma, ty.delta, ty.xi, ty.lambda);
    fill_tail(item.x, rng);
    fill_tail(item.y, rng);
  }
  return items;
}

std::vector<OptionProfile> sample_outside_options(const ScenarioConfig& config, Rng& rng) {
  using G = GeneratorParams;
  const auto [mean_x, mean_y] = outside_means(config.scenario);
  std::vector<OptionProfile> options(config.k);
  for (int o = 0; o < config.k; ++o) {
    auto& option = options[o];
    option.id = o;
    option.kind = OptionKind::OutsideOption;
    option.x.assign(config.d, 0.0);
    option.y.assign(config.d, 0.0);
    std::tie(option.x[0], option.y[0]) =
        rng.bivariate_normal(mean_x, mean_y, G::kFirstVar, G::kFirstVar, G::kFirstCov);
    fill_tail(option.x, rng);
    fill_tail(option.y, rng);
  }
  return options;
}

World make_world(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  World world;
  world.dim = config.d;
  Rng user_rng = rng.substream(kUserStream);
  Rng item_rng = rng.substream(kItemStream);
  Rng outside_rng = rng.substream(kOutsideStream);
  world.users = sample_users(config, user_rng);
  world.items = config.item_distribution.johnson ? sample_items_johnson(config, item_rng)
                                                 : sample_items(config, item_rng);
  world.outside_pool = sample_outside_options(config, outside_rng);
  world.availability.assign(config.k, 1.0 / config.k);
  // 1/K summed K times can miss 1 by an ulp or two; fold the slack into the last entry.
  double partial = 0.0;
  for (int o = 0; o + 1 < config.k; ++o) partial += world.availability[o];
  world.availability.back() = 1.0 - partial;
  world.seed = config.seed;
  world.rating_map = RatingMap::identity();
  world.reset_consumption();

  auto& meta = world.metadata;
  meta["generator"] = "synthgen";
  meta["scenario"] = std::string(to_string(config.scenario));
  meta["m"] = std::to_string(config.m);
  meta["n"] = std::to_string(config.n);
  meta["K"] = std::to_string(config.k);
  meta["d"] = std::to_string(config.d);
  meta["seed"] = std::to_string(config.seed);
  meta["items"] = config.item_distribution.johnson ? "johnson_su" : "normal";
  if (config.item_distribution.johnson) {
    const auto& ex = config.item_distribution.enrichment;
    const auto& ty = config.item_distribution.temptation;
    meta["johnson_convention"] = "xi + lambda*sinh((z-gamma)/delta), params (gamma, delta, xi, lambda)";
    meta["johnson_x1"] = format_double(ex.gamma) + "," + format_double(ex.delta) + "," + format_double(ex.xi) +
                         "," + format_double(ex.lambda);
    meta["johnson_y1"] = format_double(ty.gamma) + "," + format_double(ty.delta) + "," + format_double(ty.xi) +
                         "," + format_double(ty.lambda);
  }
  world.validate();
  return world;
}

World make_world(const ScenarioConfig& config) {
  Rng rng(config.seed);
  return make_world(config, rng);
}

}  // namespace temptrec
