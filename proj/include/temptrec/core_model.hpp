#pragma once

// Ground-truth behavioural model: enrichment/temptation scores, the user's
// deterministic choice among a slate plus one outside option, rating emission
// and per-round consumption bookkeeping.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "temptrec/rng.hpp"

namespace temptrec {

using LatentVector = std::vector<double>;
using UserId = int;
using ItemId = int;

// Marker for "the user consumed the round's outside option".
inline constexpr ItemId kOutside = -1;

struct UserProfile {
  UserId id = 0;
  LatentVector a;  // enrichment space, a[0] == 1
  LatentVector b;  // temptation space, b[0] == 1
  double lambda_c = 0.25;
  double lambda_f = 0.75;
};

enum class OptionKind { OnPlatformItem, OutsideOption };

struct OptionProfile {
  int id = 0;
  OptionKind kind = OptionKind::OnPlatformItem;
  LatentVector x;  // enrichment space
  LatentVector y;  // temptation space
};

// Monotone non-decreasing map from feedback score to the emitted rating.
struct RatingMap {
  enum class Kind { Identity, AffineClamped };

  Kind kind = Kind::Identity;
  // AffineClamped: score_lo -> 0.5 stars, score_hi -> 5.0 stars, clamped outside.
  double score_lo = 0.0;
  double score_hi = 1.0;

  static RatingMap identity() { return {}; }
  static RatingMap star_scale(double score_lo, double score_hi);

  double operator()(double feedback_score) const;
  double derivative(double feedback_score) const;
  // Only meaningful on the open range of the map.
  double inverse(double rating) const;

  static constexpr double kMinStars = 0.5;
  static constexpr double kMaxStars = 5.0;
};

// Outside options described only by their score distribution. Used for worlds
// that are themselves estimated: choice scores ~ N(mu, sigma^2), enrichment
// independent with a per-user mean.
struct ParametricOutside {
  double mu = 0.0;
  double sigma = 1.0;
  std::vector<double> mean_enrichment;  // per user
  std::vector<double> enrichment_sd;    // per user, may be zero
};

struct World {
  int dim = 1;
  std::vector<UserProfile> users;
  std::vector<OptionProfile> items;
  std::vector<OptionProfile> outside_pool;
  std::vector<double> availability;  // over outside_pool, sums to 1
  std::optional<ParametricOutside> parametric_outside;
  std::vector<std::vector<char>> consumed;  // consumed[user][item]
  int round = 0;
  std::uint64_t seed = 0;
  RatingMap rating_map;
  bool emit_ratings = true;
  std::map<std::string, std::string> metadata;

  std::size_t num_users() const { return users.size(); }
  std::size_t num_items() const { return items.size(); }
  bool is_consumed(UserId user, ItemId item) const { return consumed[user][item] != 0; }
  std::vector<ItemId> available_items(UserId user) const;
  // Resets consumed sets and the round counter; sizes them to users x items.
  void reset_consumption();
  // Throws ConfigError when any world/user/option invariant fails.
  void validate() const;
};

struct InteractionRecord {
  UserId user = 0;
  int round = 0;
  std::vector<ItemId> slate;
  ItemId chosen = kOutside;
  // Ground truth about the drawn outside option; never visible to estimators.
  int outside_index = -1;  // index into World::outside_pool, -1 for parametric
  double outside_enrichment = 0.0;
  std::optional<double> rating;
};

using InteractionLog = std::vector<InteractionRecord>;

double enrichment(const UserProfile& user, const OptionProfile& option);
double temptation(const UserProfile& user, const OptionProfile& option);

inline double mix_scores(double weight, double enrichment_value, double temptation_value) {
  return weight * enrichment_value + (1.0 - weight) * temptation_value;
}

double choice_score(const UserProfile& user, const OptionProfile& option);
double feedback_score(const UserProfile& user, const OptionProfile& option);
double emit_rating(const UserProfile& user, const OptionProfile& item, const RatingMap& f_rating);

// Result of one consumption decision. `slate_pos` is meaningful only for items.
struct Selection {
  bool outside = true;
  std::size_t slate_pos = 0;
};

// Argmax of choice score over slate + outside. An item tied with the outside
// option wins; tied items resolve to the lowest option id.
Selection select_consumption(const UserProfile& user, std::span<const OptionProfile* const> slate,
                             const OptionProfile* outside);

// u(i|o): enrichment obtained when the only options are `item` and `outside`.
double conditional_enrichment(const UserProfile& user, const OptionProfile& item,
                              const OptionProfile& outside);

// Draws the round's outside option for `user`. For parametric worlds the
// returned profile is synthesised so that its enrichment and choice score for
// this user match the sampled values.
OptionProfile draw_outside(const World& world, UserId user, Rng& rng, int* pool_index);

// Availability-weighted mean of the user's true outside enrichment.
double expected_outside_enrichment(const World& world, UserId user);

// One consumption round: draws the outside option, lets the user choose,
// updates the consumed set and emits a rating for on-platform consumption.
InteractionRecord step_round(World& world, UserId user, std::span<const ItemId> slate, Rng& rng);

// Synthesises an outside option with the given enrichment and choice score for `user`.
OptionProfile outside_with_scores(const UserProfile& user, int dim, double enrichment_value,
                                  double choice_value);

}  // namespace temptrec
