#pragma once

#include <vector>

#include "temptrec/core_model.hpp"

namespace testutil {

// d = 1 profiles whose enrichment and temptation are exactly (u, v).
inline temptrec::UserProfile user1(double lambda_c, double lambda_f = 1.0, int id = 0) {
  return {id, {1.0}, {1.0}, lambda_c, lambda_f};
}

inline temptrec::OptionProfile item1(int id, double u, double v) {
  return {id, temptrec::OptionKind::OnPlatformItem, {u}, {v}};
}

inline temptrec::OptionProfile outside1(int id, double u, double v) {
  return {id, temptrec::OptionKind::OutsideOption, {u}, {v}};
}

// One-user world with d = 1 items and outside options given as (u, v) pairs.
inline temptrec::World tiny_world(double lambda_c, const std::vector<std::pair<double, double>>& items,
                                  const std::vector<std::pair<double, double>>& outside,
                                  std::vector<double> availability = {}) {
  temptrec::World world;
  world.dim = 1;
  world.users.push_back(user1(lambda_c, std::max(lambda_c, 0.75)));
  for (std::size_t i = 0; i < items.size(); ++i) {
    world.items.push_back(item1(static_cast<int>(i), items[i].first, items[i].second));
  }
  for (std::size_t k = 0; k < outside.size(); ++k) {
    world.outside_pool.push_back(outside1(static_cast<int>(k), outside[k].first, outside[k].second));
  }
  if (availability.empty()) availability.assign(outside.size(), 1.0 / static_cast<double>(outside.size()));
  world.availability = availability;
  world.reset_consumption();
  return world;
}

}  // namespace testutil
