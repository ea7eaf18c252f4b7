#pragma once

#include <algorithm>

#include "temptrec/core_model.hpp"
#include "temptrec/rng.hpp"

namespace testutil {

struct TinyInstance {
  temptrec::World world;
  int rounds = 1;
};

// Single-user world with n in {2,3,4}, K in {1,2}, T in {1,2,3}, d in {1,2}.
inline TinyInstance random_tiny_instance(temptrec::Rng& rng) {
  using namespace temptrec;
  TinyInstance instance;
  World& world = instance.world;
  const int n = 2 + static_cast<int>(rng.index(3));
  const int k = 1 + static_cast<int>(rng.index(2));
  instance.rounds = 1 + static_cast<int>(rng.index(3));
  world.dim = 1 + static_cast<int>(rng.index(2));

  UserProfile user;
  user.a.assign(world.dim, 1.0);
  user.b.assign(world.dim, 1.0);
  for (int l = 1; l < world.dim; ++l) {
    user.a[l] = rng.normal(0.0, 1.5);
    user.b[l] = rng.normal(0.0, 1.5);
  }
  double l1 = rng.uniform(), l2 = rng.uniform();
  if (l1 > l2) std::swap(l1, l2);
  user.lambda_c = l1;
  user.lambda_f = l2;
  world.users.push_back(user);

  auto option = [&](int id, OptionKind kind, double mean_x, double mean_y) {
    OptionProfile o{id, kind, LatentVector(world.dim), LatentVector(world.dim)};
    o.x[0] = rng.normal(mean_x, 4.0);
    o.y[0] = rng.normal(mean_y, 4.0);
    for (int l = 1; l < world.dim; ++l) {
      o.x[l] = rng.normal(0.0, 1.0);
      o.y[l] = rng.normal(0.0, 1.0);
    }
    return o;
  };
  for (int i = 0; i < n; ++i) world.items.push_back(option(i, OptionKind::OnPlatformItem, 5.0, 0.0));
  for (int o = 0; o < k; ++o) world.outside_pool.push_back(option(o, OptionKind::OutsideOption, 3.0, 2.0));
  if (k == 1) {
    world.availability = {1.0};
  } else {
    const double p = 0.1 + 0.8 * rng.uniform();
    world.availability = {p, 1.0 - p};
  }
  world.reset_consumption();
  return instance;
}

}  // namespace testutil
