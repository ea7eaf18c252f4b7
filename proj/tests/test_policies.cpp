#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "temptrec/errors.hpp"
#include "temptrec/policies.hpp"
#include "temptrec/simharness.hpp"
#include "temptrec/synthgen.hpp"

using namespace temptrec;

namespace {

// Independent oracle for the normal CDF: Simpson integration of the density.
double phi_by_quadrature(double z) {
  const int n = 20000;
  const double lo = -12.0;
  const double h = (z - lo) / n;
  auto f = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); };
  double sum = f(lo) + f(z);
  for (int k = 1; k < n; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(lo + k * h);
  return sum * h / 3.0;
}

std::vector<ItemId> all_items(const World& world) { return world.available_items(0); }

}  // namespace

TEST_CASE("policy names round-trip") {
  for (auto kind : {PolicyKind::GreedyPerfect, PolicyKind::GreedyEstimated, PolicyKind::PureEnrichment,
                    PolicyKind::PureTemptation, PolicyKind::RatingsBased, PolicyKind::ClickBased}) {
    CHECK(parse_policy(to_string(kind)) == kind);
  }
  CHECK(parse_info_level("partial") == InfoLevel::Partial);
  CHECK_THROWS_AS(parse_policy("random"), ConfigError);
}

TEST_CASE("expected_enrichment_perfect averages conditional enrichment over the pool") {
  SUBCASE("K = 1") {
    const auto world = testutil::tiny_world(1.0, {{4, 0}}, {{6, 0}});
    CHECK(expected_enrichment_perfect(world, 0, 0) ==
          conditional_enrichment(world.users[0], world.items[0], world.outside_pool[0]));
  }
  SUBCASE("item beating every outside option") {
    const auto world = testutil::tiny_world(0.5, {{4, 20}}, {{6, 0}, {-3, 1}});
    CHECK(expected_enrichment_perfect(world, 0, 0) == 4.0);
  }
  SUBCASE("uniform K = 2, item loses to one option") {
    // choice = u: item u=4 beats outside u=2 (enrichment 4), loses to u=6
    const auto world = testutil::tiny_world(1.0, {{4, 0}}, {{6, 0}, {2, 0}});
    CHECK(expected_enrichment_perfect(world, 0, 0) == doctest::Approx(0.5 * 6 + 0.5 * 4));
  }
  SUBCASE("uniform K = 2 with a tempting item") {
    // choice = 0.5(u + v); item (4, 10) -> 7 beats outside (2, 2) -> 2, loses to (6, 10) -> 8
    const auto world = testutil::tiny_world(0.5, {{4, 10}}, {{6, 10}, {2, 2}});
    CHECK(expected_enrichment_perfect(world, 0, 0) == doctest::Approx(5.0));
  }
}

TEST_CASE("expected_enrichment_estimated closed form") {
  const OutsideBelief belief{2.0, 1.5, 7.0};
  CHECK(expected_enrichment_estimated(4.0, 2.0, belief) == doctest::Approx(0.5 * 4.0 + 0.5 * 7.0));
  CHECK(std::abs(expected_enrichment_estimated(4.0, 2.0 + 9.0 * 1.5, belief) - 4.0) < 1e-12);

  const OutsideBelief unit{0.0, 1.0, 0.0};
  const double expected = 4.0 * phi_by_quadrature(1.0);
  CHECK(expected_enrichment_estimated(4.0, 1.0, unit) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(expected_enrichment_estimated(4.0, 1.0, unit) == doctest::Approx(3.3655).epsilon(1e-4));

  CHECK_THROWS_AS(expected_enrichment_estimated(1.0, 1.0, OutsideBelief{0.0, 0.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(expected_enrichment_estimated(1.0, 1.0, OutsideBelief{0.0, -1.0, 0.0}), ConfigError);

  double previous = -1e9;
  for (double u = -5.0; u <= 5.0; u += 0.5) {
    const double value = expected_enrichment_estimated(u, 0.3, unit);
    CHECK(value > previous);
    previous = value;
  }
}

TEST_CASE("greedy_recommend: induced choice and slate fill") {
  const std::vector<GreedyCandidate> candidates{
      {0, 5.0, 3.0}, {1, 9.0, 4.0}, {2, 7.0, 6.0}, {3, 6.0, 1.0}, {4, 8.0, 2.0}, {5, 9.0, 0.5}};

  SUBCASE("s = 1 gives the argmax, ties to the lower id") {
    CHECK(greedy_recommend(candidates, -1e9, 1) == Slate{1});
  }
  SUBCASE("fill uses only items with strictly lower choice score, by value") {
    // best is item 1 (choice 4); item 2 has choice 6 and is excluded
    CHECK(greedy_recommend(candidates, -1e9, 4) == Slate{1, 5, 4, 3});
    CHECK(greedy_recommend(candidates, -1e9, 15) == Slate{1, 5, 4, 3, 0});
  }
  SUBCASE("recommending nothing when the outside option is strictly better") {
    CHECK(greedy_recommend(candidates, 9.5, 15).empty());
    CHECK(greedy_recommend(candidates, 9.0, 15).front() == 1);
  }
  SUBCASE("scaling values by a positive constant keeps the induced choice") {
    auto scaled = candidates;
    for (auto& c : scaled) c.value *= 3.7;
    CHECK(greedy_recommend(scaled, -1e9, 1) == greedy_recommend(candidates, -1e9, 1));
  }
}

TEST_CASE("greedy slate preserves the induced choice") {
  ScenarioConfig config;
  config.m = 20;
  config.n = 40;
  config.k = 10;
  config.seed = 5;
  const World world = make_world(config);
  const PolicyContext context{&world, InfoLevel::Perfect};
  for (UserId user = 0; user < 20; ++user) {
    const auto available = world.available_items(user);
    const Slate slate = greedy_slate(PolicyKind::GreedyPerfect, user, available, context, 15);
    if (slate.empty()) continue;
    const auto& profile = world.users[user];
    const double induced = choice_score(profile, world.items[slate[0]]);
    for (std::size_t k = 1; k < slate.size(); ++k) CHECK(choice_score(profile, world.items[slate[k]]) < induced);
    CHECK(std::adjacent_find(slate.begin(), slate.end()) == slate.end());
  }
}

TEST_CASE("greedy matches the oracle's best single recommendation on a 3-item world") {
  const auto world = testutil::tiny_world(0.3, {{4, 1}, {9, -6}, {2, 8}}, {{5, 0}, {1, 3}});
  const PolicyContext context{&world, InfoLevel::Perfect};
  const auto available = all_items(world);
  double best = expected_outside_enrichment(world, 0);
  for (ItemId item : available) best = std::max(best, expected_enrichment_perfect(world, 0, item));
  CHECK(brute_force_optimal(world, 0, 1) == doctest::Approx(best).epsilon(1e-12));
  const Slate slate = greedy_slate(PolicyKind::GreedyPerfect, 0, available, context, 1);
  const double greedy_value =
      slate.empty() ? expected_outside_enrichment(world, 0) : expected_enrichment_perfect(world, 0, slate[0]);
  CHECK(greedy_value == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("baseline rankings") {
  SUBCASE("lambda_c = lambda_f makes ratings and clicks coincide") {
    auto world = testutil::tiny_world(0.4, {{4, 1}, {9, -6}, {2, 8}, {0, 0}, {3, 3}}, {{0, 0}});
    world.users[0].lambda_f = 0.4;
    const PolicyContext context{&world, InfoLevel::Perfect};
    const auto available = all_items(world);
    CHECK(baseline_recommend(PolicyKind::RatingsBased, 0, available, context, 3) ==
          baseline_recommend(PolicyKind::ClickBased, 0, available, context, 3));
  }
  SUBCASE("pure enrichment with s = n is the full ranking") {
    const auto world = testutil::tiny_world(0.4, {{4, 1}, {9, -6}, {2, 8}, {0, 0}, {3, 3}}, {{0, 0}});
    const PolicyContext context{&world, InfoLevel::Perfect};
    CHECK(baseline_recommend(PolicyKind::PureEnrichment, 0, all_items(world), context, 5) == Slate{1, 0, 4, 2, 3});
  }
  SUBCASE("u = -v reverses the temptation ranking") {
    const auto world = testutil::tiny_world(0.4, {{4, -4}, {9, -9}, {-2, 2}, {0.5, -0.5}, {3, -3}}, {{0, 0}});
    const PolicyContext context{&world, InfoLevel::Perfect};
    auto enrich = baseline_recommend(PolicyKind::PureEnrichment, 0, all_items(world), context, 5);
    const auto tempt = baseline_recommend(PolicyKind::PureTemptation, 0, all_items(world), context, 5);
    std::reverse(enrich.begin(), enrich.end());
    CHECK(enrich == tempt);
  }
  SUBCASE("ties break by lowest item id") {
    const auto world = testutil::tiny_world(0.4, {{1, 0}, {1, 0}, {1, 0}}, {{0, 0}});
    const PolicyContext context{&world, InfoLevel::Perfect};
    CHECK(baseline_recommend(PolicyKind::PureEnrichment, 0, all_items(world), context, 2) == Slate{0, 1});
  }
  SUBCASE("greedy kinds are rejected") {
    const auto world = testutil::tiny_world(0.4, {{1, 0}}, {{0, 0}});
    const PolicyContext context{&world, InfoLevel::Perfect};
    CHECK_THROWS_AS(baseline_recommend(PolicyKind::GreedyPerfect, 0, all_items(world), context, 2), ConfigError);
  }
  SUBCASE("partial information without fitted models is a configuration error") {
    const PolicyContext context{nullptr, InfoLevel::Partial};
    const std::vector<ItemId> available{0};
    CHECK_THROWS_AS(baseline_recommend(PolicyKind::ClickBased, 0, available, context, 2), ConfigError);
    CHECK_THROWS_AS(greedy_slate(PolicyKind::GreedyEstimated, 0, available, context, 2), ConfigError);
  }
}

TEST_CASE("appending a tempting, unenriching item costs exactly its enrichment gap") {
  // score = 0.25 u + 0.75 v; outside options always lose.
  for (double gap : {1.0, 10.0, 100.0}) {
    auto world = testutil::tiny_world(0.25, {{10, 2}, {10 - gap, 50}}, {{-100, -100}});
    Rng rng(1);
    auto base = world;
    const std::vector<ItemId> alone{0};
    const std::vector<ItemId> both{0, 1};
    const auto a = step_round(base, 0, alone, rng);
    const auto b = step_round(world, 0, both, rng);
    CHECK(a.chosen == 0);
    CHECK(b.chosen == 1);
    CHECK(enrichment(world.users[0], world.items[a.chosen]) - enrichment(world.users[0], world.items[b.chosen]) ==
          gap);
  }
}
