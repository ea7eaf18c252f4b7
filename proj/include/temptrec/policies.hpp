#pragma once

// Recommendation policies: the locally greedy expected-enrichment policy
// (perfect or estimated information) and the four ranking baselines.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "temptrec/core_model.hpp"
#include "temptrec/estimation.hpp"

namespace temptrec {

enum class PolicyKind { GreedyPerfect, GreedyEstimated, PureEnrichment, PureTemptation, RatingsBased, ClickBased };
enum class InfoLevel { Perfect, Partial };

std::string_view to_string(PolicyKind kind);
std::string_view to_string(InfoLevel level);
PolicyKind parse_policy(std::string_view name);
InfoLevel parse_info_level(std::string_view name);
bool is_greedy(PolicyKind kind);

using Slate = std::vector<ItemId>;

inline constexpr std::size_t kDefaultSlateSize = 15;

struct OutsideBelief {
  double mu = 0.0;
  double sigma = 1.0;
  double expected_outside_enrichment = 0.0;  // E[u(o)] for the user in question
};

// Exact E_o[u(item | o)] over the world's outside-option distribution.
double expected_enrichment_perfect(const World& world, UserId user, ItemId item);

// Phi(z) * u_hat + (1 - Phi(z)) * E[u(o)], z = (choice_hat - mu) / sigma.
double expected_enrichment_estimated(double enrichment_hat, double choice_hat, const OutsideBelief& belief);

struct GreedyCandidate {
  ItemId item = 0;
  double value = 0.0;   // expected single-round enrichment if this item is the induced choice
  double choice = 0.0;  // (true or estimated) choice score
};

// Induced choice is the highest-value candidate (ties: lowest id). The slate is
// filled with the next highest-value candidates whose choice score is strictly
// below the induced choice's. Returns an empty slate when recommending nothing
// (`no_recommendation_value`) is strictly better than every candidate.
Slate greedy_recommend(std::span<const GreedyCandidate> candidates, double no_recommendation_value,
                       std::size_t slate_size);

// Everything a policy may look at. Perfect-information policies read `world`;
// partial-information ones read only the fitted models.
struct PolicyContext {
  const World* world = nullptr;
  InfoLevel info = InfoLevel::Perfect;
  const EstimatedModel* model = nullptr;         // joint fit
  const EstimatedModel* click_model = nullptr;   // alpha = 0 fit
  const RatingFactorization* rating_model = nullptr;
};

// Top-s items by the baseline's ranking key; ties by lowest item id.
Slate baseline_recommend(PolicyKind kind, UserId user, std::span<const ItemId> available,
                         const PolicyContext& context, std::size_t slate_size);

// Greedy slate for `user` over `available`.
Slate greedy_slate(PolicyKind kind, UserId user, std::span<const ItemId> available, const PolicyContext& context,
                   std::size_t slate_size);

Slate recommend(PolicyKind kind, UserId user, std::span<const ItemId> available, const PolicyContext& context,
                std::size_t slate_size);

OutsideBelief belief_for(const EstimatedModel& model, UserId user);

}  // namespace temptrec
