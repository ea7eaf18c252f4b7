#include "temptrec/policies.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "temptrec/errors.hpp"

namespace temptrec {

namespace {

constexpr std::array<std::pair<PolicyKind, std::string_view>, 6> kPolicyNames{{
    {PolicyKind::GreedyPerfect, "greedy_perfect"},
    {PolicyKind::GreedyEstimated, "greedy_estimated"},
    {PolicyKind::PureEnrichment, "pure_enrichment"},
    {PolicyKind::PureTemptation, "pure_temptation"},
    {PolicyKind::RatingsBased, "ratings_based"},
    {PolicyKind::ClickBased, "click_based"},
}};

const EstimatedModel& require(const EstimatedModel* model, std::string_view what) {
  if (model == nullptr) throw ConfigError(std::string(what) + " requires a fitted model");
  return *model;
}

const World& require_world(const PolicyContext& context) {
  if (context.world == nullptr) throw ConfigError("perfect-information policy requires the world");
  return *context.world;
}

double baseline_key(PolicyKind kind, UserId user, ItemId item, const PolicyContext& context) {
  if (context.info == InfoLevel::Perfect) {
    const World& world = require_world(context);
    const auto& profile = world.users[user];
    const auto& option = world.items[item];
    switch (kind) {
      case PolicyKind::PureEnrichment: return enrichment(profile, option);
      case PolicyKind::PureTemptation: return temptation(profile, option);
      case PolicyKind::RatingsBased: return feedback_score(profile, option);
      case PolicyKind::ClickBased: return choice_score(profile, option);
      default: break;
    }
  } else {
    switch (kind) {
      case PolicyKind::PureEnrichment: return require(context.model, "pure_enrichment").enrichment(user, item);
      case PolicyKind::PureTemptation: return require(context.model, "pure_temptation").temptation(user, item);
      case PolicyKind::RatingsBased:
        if (context.rating_model == nullptr) throw ConfigError("ratings_based requires a rating model");
        return context.rating_model->predict(user, item);
      case PolicyKind::ClickBased: return require(context.click_model, "click_based").choice_score(user, item);
      default: break;
    }
  }
  throw ConfigError("not a baseline policy: " + std::string(to_string(kind)));
}

}  // namespace

std::string_view to_string(PolicyKind kind) {
  for (const auto& [k, name] : kPolicyNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::string_view to_string(InfoLevel level) { return level == InfoLevel::Perfect ? "perfect" : "partial"; }

PolicyKind parse_policy(std::string_view name) {
  for (const auto& [k, n] : kPolicyNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown policy: " + std::string(name));
}

InfoLevel parse_info_level(std::string_view name) {
  if (name == "perfect") return InfoLevel::Perfect;
  if (name == "partial") return InfoLevel::Partial;
  throw ConfigError("unknown info level: " + std::string(name));
}

bool is_greedy(PolicyKind kind) { return kind == PolicyKind::GreedyPerfect || kind == PolicyKind::GreedyEstimated; }

double expected_enrichment_perfect(const World& world, UserId user, ItemId item) {
  const auto& profile = world.users[user];
  const auto& option = world.items[item];
  if (world.parametric_outside) {
    const auto& outside = *world.parametric_outside;
    const OutsideBelief belief{outside.mu, outside.sigma, outside.mean_enrichment[user]};
    return expected_enrichment_estimated(enrichment(profile, option), choice_score(profile, option), belief);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < world.outside_pool.size(); ++k) {
    if (world.availability[k] == 0.0) continue;
    total += world.availability[k] * conditional_enrichment(profile, option, world.outside_pool[k]);
  }
  return total;
}

double expected_enrichment_estimated(double enrichment_hat, double choice_hat, const OutsideBelief& belief) {
  if (!(belief.sigma > 0.0)) throw ConfigError("outside belief sigma must be > 0");
  const double p = standard_normal_cdf((choice_hat - belief.mu) / belief.sigma);
  return p * enrichment_hat + (1.0 - p) * belief.expected_outside_enrichment;
}

Slate greedy_recommend(std::span<const GreedyCandidate> candidates, double no_recommendation_value,
                       std::size_t slate_size) {
  if (candidates.empty() || slate_size == 0) return {};
  auto better = [](const GreedyCandidate& lhs, const GreedyCandidate& rhs) {
    return lhs.value > rhs.value || (lhs.value == rhs.value && lhs.item < rhs.item);
  };
  const auto best = std::min_element(candidates.begin(), candidates.end(), better);
  if (no_recommendation_value > best->value) return {};

  std::vector<GreedyCandidate> fill;
  for (const auto& candidate : candidates) {
    if (candidate.choice < best->choice) fill.push_back(candidate);
  }
  const std::size_t extra = std::min(fill.size(), slate_size - 1);
  std::partial_sort(fill.begin(), fill.begin() + extra, fill.end(), better);

  Slate slate{best->item};
  for (std::size_t k = 0; k < extra; ++k) slate.push_back(fill[k].item);
  return slate;
}

OutsideBelief belief_for(const EstimatedModel& model, UserId user) {
  return {model.mu(), model.sigma(), model.expected_outside_enrichment.at(user)};
}

Slate greedy_slate(PolicyKind kind, UserId user, std::span<const ItemId> available, const PolicyContext& context,
                   std::size_t slate_size) {
  std::vector<GreedyCandidate> candidates;
  candidates.reserve(available.size());
  double nothing = 0.0;
  if (kind == PolicyKind::GreedyPerfect) {
    const World& world = require_world(context);
    const auto& profile = world.users[user];
    for (ItemId item : available) {
      candidates.push_back(
          {item, expected_enrichment_perfect(world, user, item), choice_score(profile, world.items[item])});
    }
    nothing = expected_outside_enrichment(world, user);
  } else if (kind == PolicyKind::GreedyEstimated) {
    const EstimatedModel& model = require(context.model, "greedy_estimated");
    const OutsideBelief belief = belief_for(model, user);
    for (ItemId item : available) {
      const double choice = model.choice_score(user, item);
      candidates.push_back(
          {item, expected_enrichment_estimated(model.enrichment(user, item), choice, belief), choice});
    }
    nothing = belief.expected_outside_enrichment;
  } else {
    throw ConfigError("not a greedy policy: " + std::string(to_string(kind)));
  }
  return greedy_recommend(candidates, nothing, slate_size);
}

Slate baseline_recommend(PolicyKind kind, UserId user, std::span<const ItemId> available,
                         const PolicyContext& context, std::size_t slate_size) {
  if (is_greedy(kind)) throw ConfigError("baseline_recommend called with a greedy policy");
  std::vector<std::pair<double, ItemId>> keyed;
  keyed.reserve(available.size());
  for (ItemId item : available) keyed.emplace_back(baseline_key(kind, user, item, context), item);
  const std::size_t count = std::min(slate_size, keyed.size());
  std::partial_sort(keyed.begin(), keyed.begin() + count, keyed.end(), [](const auto& lhs, const auto& rhs) {
    return lhs.first > rhs.first || (lhs.first == rhs.first && lhs.second < rhs.second);
  });
  Slate slate;
  slate.reserve(count);
  for (std::size_t k = 0; k < count; ++k) slate.push_back(keyed[k].second);
  return slate;
}

Slate recommend(PolicyKind kind, UserId user, std::span<const ItemId> available, const PolicyContext& context,
                std::size_t slate_size) {
  if (is_greedy(kind)) return greedy_slate(kind, user, available, context, slate_size);
  return baseline_recommend(kind, user, available, context, slate_size);
}

}  // namespace temptrec
