#include "temptrec/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "temptrec/errors.hpp"

namespace temptrec {

namespace {

double dot(const LatentVector& lhs, const LatentVector& rhs) {
  if (lhs.size() != rhs.size()) {
    std::ostringstream msg;
    msg << "dimension mismatch: " << lhs.size() << " vs " << rhs.size();
    throw ConfigError(msg.str());
  }
  return std::inner_product(lhs.begin(), lhs.end(), rhs.begin(), 0.0);
}

bool all_finite(const LatentVector& v) {
  return std::all_of(v.begin(), v.end(), [](double c) { return std::isfinite(c); });
}

}  // namespace

RatingMap RatingMap::star_scale(double score_lo, double score_hi) {
  if (!(score_hi > score_lo)) throw ConfigError("star scale needs score_hi > score_lo");
  RatingMap map;
  map.kind = Kind::AffineClamped;
  map.score_lo = score_lo;
  map.score_hi = score_hi;
  return map;
}

double RatingMap::operator()(double feedback_score) const {
  if (kind == Kind::Identity) return feedback_score;
  const double t = (feedback_score - score_lo) / (score_hi - score_lo);
  return std::clamp(kMinStars + t * (kMaxStars - kMinStars), kMinStars, kMaxStars);
}

double RatingMap::derivative(double feedback_score) const {
  if (kind == Kind::Identity) return 1.0;
  if (feedback_score <= score_lo || feedback_score >= score_hi) return 0.0;
  return (kMaxStars - kMinStars) / (score_hi - score_lo);
}

double RatingMap::inverse(double rating) const {
  if (kind == Kind::Identity) return rating;
  return score_lo + (rating - kMinStars) / (kMaxStars - kMinStars) * (score_hi - score_lo);
}

std::vector<ItemId> World::available_items(UserId user) const {
  std::vector<ItemId> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!consumed[user][i]) out.push_back(static_cast<ItemId>(i));
  }
  return out;
}

void World::reset_consumption() {
  consumed.assign(users.size(), std::vector<char>(items.size(), 0));
  round = 0;
}

void World::validate() const {
  if (dim < 1) throw ConfigError("world dimension must be >= 1");
  for (const auto& user : users) {
    if (static_cast<int>(user.a.size()) != dim || static_cast<int>(user.b.size()) != dim) {
      throw ConfigError("user " + std::to_string(user.id) + " has wrong latent dimension");
    }
    if (user.a[0] != 1.0 || user.b[0] != 1.0) {
      throw ConfigError("user " + std::to_string(user.id) + " is not anchored (a[0], b[0] must be 1)");
    }
    if (!all_finite(user.a) || !all_finite(user.b)) {
      throw ConfigError("user " + std::to_string(user.id) + " has non-finite components");
    }
    if (!(user.lambda_c >= 0.0 && user.lambda_f <= 1.0 && user.lambda_c <= user.lambda_f)) {
      throw ConfigError("user " + std::to_string(user.id) + " violates 0 <= lambda_c <= lambda_f <= 1");
    }
  }
  auto check_option = [&](const OptionProfile& option) {
    if (static_cast<int>(option.x.size()) != dim || static_cast<int>(option.y.size()) != dim) {
      throw ConfigError("option " + std::to_string(option.id) + " has wrong latent dimension");
    }
    if (!all_finite(option.x) || !all_finite(option.y)) {
      throw ConfigError("option " + std::to_string(option.id) + " has non-finite components");
    }
  };
  for (const auto& item : items) check_option(item);
  for (const auto& option : outside_pool) check_option(option);

  if (parametric_outside) {
    if (!(parametric_outside->sigma > 0.0)) throw ConfigError("parametric outside sigma must be > 0");
    if (parametric_outside->mean_enrichment.size() != users.size()) {
      throw ConfigError("parametric outside needs one mean enrichment per user");
    }
  } else {
    if (outside_pool.empty()) throw ConfigError("world has no outside options");
    if (availability.size() != outside_pool.size()) {
      throw ConfigError("availability length must equal the outside pool size");
    }
    double total = 0.0;
    for (double p : availability) {
      if (!(p >= 0.0)) throw ConfigError("availability entries must be >= 0");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("availability must sum to 1");
  }
  if (consumed.size() != users.size()) throw ConfigError("consumed sets must exist for every user");
  for (const auto& row : consumed) {
    if (row.size() != items.size()) throw ConfigError("consumed set sized for the wrong catalogue");
  }
}

double enrichment(const UserProfile& user, const OptionProfile& option) { return dot(user.a, option.x); }

double temptation(const UserProfile& user, const OptionProfile& option) { return dot(user.b, option.y); }

double choice_score(const UserProfile& user, const OptionProfile& option) {
  return mix_scores(user.lambda_c, enrichment(user, option), temptation(user, option));
}

double feedback_score(const UserProfile& user, const OptionProfile& option) {
  return mix_scores(user.lambda_f, enrichment(user, option), temptation(user, option));
}

double emit_rating(const UserProfile& user, const OptionProfile& item, const RatingMap& f_rating) {
  return f_rating(feedback_score(user, item));
}

Selection select_consumption(const UserProfile& user, std::span<const OptionProfile* const> slate,
                             const OptionProfile* outside) {
  if (slate.empty() && outside == nullptr) {
    throw ContractError("invalid round: empty slate and no outside option");
  }
  Selection best;
  double best_score = 0.0;
  int best_id = 0;
  bool have_item = false;
  for (std::size_t pos = 0; pos < slate.size(); ++pos) {
    const double score = choice_score(user, *slate[pos]);
    const int id = slate[pos]->id;
    if (!have_item || score > best_score || (score == best_score && id < best_id)) {
      have_item = true;
      best_score = score;
      best_id = id;
      best.outside = false;
      best.slate_pos = pos;
    }
  }
  if (outside != nullptr && (!have_item || choice_score(user, *outside) > best_score)) {
    return Selection{};
  }
  return best;
}

double conditional_enrichment(const UserProfile& user, const OptionProfile& item,
                              const OptionProfile& outside) {
  return choice_score(user, item) >= choice_score(user, outside) ? enrichment(user, item)
                                                                 : enrichment(user, outside);
}

OptionProfile outside_with_scores(const UserProfile& user, int dim, double enrichment_value,
                                  double choice_value) {
  OptionProfile option;
  option.id = -1;
  option.kind = OptionKind::OutsideOption;
  option.x.assign(dim, 0.0);
  option.y.assign(dim, 0.0);
  option.x[0] = enrichment_value;
  const double temptation_weight = 1.0 - user.lambda_c;
  // A pure enrichment chooser has choice score == enrichment; nothing to solve for.
  option.y[0] = temptation_weight > 1e-12
                    ? (choice_value - user.lambda_c * enrichment_value) / temptation_weight
                    : 0.0;
  return option;
}

OptionProfile draw_outside(const World& world, UserId user, Rng& rng, int* pool_index) {
  if (world.parametric_outside) {
    const auto& model = *world.parametric_outside;
    const double choice_value = rng.normal(model.mu, model.sigma);
    const double sd = model.enrichment_sd.empty() ? 0.0 : model.enrichment_sd[user];
    const double enrichment_value = rng.normal(model.mean_enrichment[user], sd);
    if (pool_index) *pool_index = -1;
    return outside_with_scores(world.users[user], world.dim, enrichment_value, choice_value);
  }
  const std::size_t k = world.availability.size() == 1 ? 0 : rng.categorical(world.availability);
  if (pool_index) *pool_index = static_cast<int>(k);
  return world.outside_pool[k];
}

double expected_outside_enrichment(const World& world, UserId user) {
  if (world.parametric_outside) return world.parametric_outside->mean_enrichment[user];
  double total = 0.0;
  for (std::size_t k = 0; k < world.outside_pool.size(); ++k) {
    total += world.availability[k] * enrichment(world.users[user], world.outside_pool[k]);
  }
  return total;
}

InteractionRecord step_round(World& world, UserId user, std::span<const ItemId> slate, Rng& rng) {
  const auto& profile = world.users.at(user);
  std::vector<const OptionProfile*> options;
  options.reserve(slate.size());
  for (ItemId item : slate) {
    if (item < 0 || static_cast<std::size_t>(item) >= world.items.size()) {
      throw ContractError("slate references unknown item " + std::to_string(item));
    }
    if (world.is_consumed(user, item)) {
      throw ContractError("slate offers item " + std::to_string(item) + " already consumed by user " +
                          std::to_string(user));
    }
    options.push_back(&world.items[item]);
  }

  InteractionRecord record;
  record.user = user;
  record.round = world.round;
  record.slate.assign(slate.begin(), slate.end());
  const OptionProfile outside = draw_outside(world, user, rng, &record.outside_index);
  record.outside_enrichment = enrichment(profile, outside);

  const Selection pick = select_consumption(profile, options, &outside);
  if (pick.outside) {
    record.chosen = kOutside;
    return record;
  }
  const ItemId item = slate[pick.slate_pos];
  record.chosen = item;
  world.consumed[user][item] = 1;
  if (world.emit_ratings) record.rating = emit_rating(profile, world.items[item], world.rating_map);
  return record;
}

}  // namespace temptrec
