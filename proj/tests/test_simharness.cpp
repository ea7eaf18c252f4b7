#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "extra_item.hpp"
#include "temptrec/errors.hpp"
#include "temptrec/simharness.hpp"
#include "tiny_worlds.hpp"

using namespace temptrec;

TEST_CASE("brute-force oracle base cases") {
  SUBCASE("T = 1 is the best single action") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      auto instance = testutil::random_tiny_instance(rng);
      const World& world = instance.world;
      double best = expected_outside_enrichment(world, 0);
      for (ItemId i = 0; i < static_cast<ItemId>(world.items.size()); ++i) {
        best = std::max(best, expected_enrichment_perfect(world, 0, i));
      }
      CHECK(brute_force_optimal(world, 0, 1) == doctest::Approx(best).epsilon(1e-12));
    }
  }
  SUBCASE("dominated items force the outside option") {
    // choice = 0.5(u + v); items score at most 1, outside options at least 5
    const auto world = testutil::tiny_world(0.5, {{30, -28}, {1, 0}, {-4, 4}}, {{2, 8}, {-1, 12}}, {0.25, 0.75});
    const double expected_outside = 0.25 * 2 + 0.75 * -1;
    for (int t = 1; t <= 3; ++t) CHECK(brute_force_optimal(world, 0, t) == doctest::Approx(t * expected_outside));
  }
  SUBCASE("instances that are too large are refused") {
    const auto world = testutil::tiny_world(0.5, {{1, 0}, {1, 0}, {1, 0}, {1, 0}, {1, 0}, {1, 0}}, {{0, 0}});
    CHECK_THROWS_AS(brute_force_optimal(world, 0, 2), ConfigError);
    const auto small = testutil::tiny_world(0.5, {{1, 0}}, {{0, 0}});
    CHECK_THROWS_AS(brute_force_optimal(small, 0, 5), ConfigError);
  }
}

TEST_CASE("greedy trajectory value equals the policy-tree optimum") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    auto instance = testutil::random_tiny_instance(rng);
    const double oracle = brute_force_optimal(instance.world, 0, instance.rounds);
    const double greedy = greedy_expected_value(instance.world, 0, instance.rounds);
    CHECK(std::abs(oracle - greedy) <= 1e-9);
  }
}

TEST_CASE("a tempting, unenriching extra item costs exactly its gap") {
  for (double gap : {1.0, 10.0, 100.0}) {
    const auto outcome = testutil::run_extra_item_instance(gap);
    CHECK(outcome.affected_rounds == 4);
    int hits = 0;
    for (double loss : outcome.per_round_loss) {
      CHECK((loss == 0.0 || loss == gap));
      hits += loss == gap;
    }
    CHECK(hits == outcome.affected_rounds);
  }
}

TEST_CASE("warm-up protocol") {
  ScenarioConfig sc;
  sc.m = 12;
  sc.n = 40;
  sc.k = 5;
  sc.seed = 1;
  World world = make_world(sc);
  World copy = world;
  Rng r1(3), r2(3);
  const auto log = run_warmup(world, r1, 25, 15);
  const auto log2 = run_warmup(copy, r2, 25, 15);
  CHECK(log.size() == 12u * 25u);
  CHECK(world.round == 25);
  for (UserId j = 0; j < 12; ++j) {
    int consumed = 0;
    for (char c : world.consumed[j]) consumed += c;
    CHECK(consumed <= 25);
  }
  for (std::size_t k = 0; k < log.size(); ++k) {
    CHECK(log[k].slate == log2[k].slate);
    CHECK(log[k].chosen == log2[k].chosen);
    CHECK(log[k].slate.size() == 15u);
  }

  SUBCASE("an always-dominant outside option means no consumption") {
    auto w = testutil::tiny_world(1.0, {{1, 0}, {2, 0}, {3, 0}}, {{100, 0}});
    Rng rng(1);
    const auto l = run_warmup(w, rng, 5, 2);
    for (const auto& r : l) CHECK(r.chosen == kOutside);
  }
}

TEST_CASE("policy rounds") {
  SUBCASE("a dominant item is consumed in round one") {
    auto world = testutil::tiny_world(0.5, {{1, 1}, {50, 50}, {2, 0}}, {{3, 3}, {0, 4}});
    const PolicyContext context{nullptr, InfoLevel::Perfect};
    const auto log = run_policy_rounds(world, PolicyKind::GreedyPerfect, context, Rng(1), 1, 15);
    REQUIRE(log.size() == 1u);
    CHECK(log[0].chosen == 1);
  }
  SUBCASE("dominated items leave the user on outside options for all 50 rounds") {
    auto world = testutil::tiny_world(0.5, {{1, 1}, {0, 0}, {2, 0}}, {{10, 10}, {9, 12}});
    const PolicyContext context{nullptr, InfoLevel::Perfect};
    const auto log = run_policy_rounds(world, PolicyKind::PureEnrichment, context, Rng(1), 50, 15);
    CHECK(log.size() == 50u);
    for (const auto& r : log) CHECK(r.chosen == kOutside);
  }
  SUBCASE("slate is whatever remains when the catalogue runs low") {
    auto world = testutil::tiny_world(1.0, {{5, 0}, {6, 0}, {7, 0}}, {{-10, 0}});
    const PolicyContext context{nullptr, InfoLevel::Perfect};
    const auto log = run_policy_rounds(world, PolicyKind::PureTemptation, context, Rng(1), 4, 15);
    CHECK(log[0].slate.size() == 3u);
    CHECK(log[2].slate.size() == 1u);
    CHECK(log[3].slate.empty());
    CHECK(log[3].chosen == kOutside);
  }
}

TEST_CASE("overall individual enrichment") {
  auto world = testutil::tiny_world(1.0, {{5, 0}}, {{4, 0}});
  world.users.push_back(world.users[0]);
  world.users[1].id = 1;
  world.reset_consumption();
  InteractionLog log;
  for (int t = 0; t < 50; ++t) {
    InteractionRecord r;
    r.user = 0;
    r.round = t;
    r.chosen = kOutside;
    r.outside_enrichment = 2.5;
    log.push_back(r);
  }
  CHECK(per_user_enrichment(log, world)[0] == doctest::Approx(50 * 2.5));

  InteractionLog two;
  InteractionRecord r;
  r.chosen = kOutside;
  r.user = 0;
  r.outside_enrichment = 10.0;
  two.push_back(r);
  r.user = 1;
  r.outside_enrichment = 30.0;
  two.push_back(r);
  CHECK(overall_individual_enrichment(two, world) == doctest::Approx(20.0));
  CHECK_THROWS_AS(overall_individual_enrichment({}, world), ContractError);
}

TEST_CASE("consumption histogram") {
  const auto world = testutil::tiny_world(1.0, {{3, 1}, {25, -15}, {100, 100}}, {{0, 0}});
  InteractionLog log;
  InteractionRecord outside;
  outside.chosen = kOutside;
  log.push_back(outside);
  CHECK(consumption_frequency(log, world).total == 0);

  InteractionRecord one;
  one.chosen = 0;
  log.push_back(one);
  const auto h = consumption_frequency(log, world);
  CHECK(h.total == 1);
  CHECK(h.at(h.u_bin_of(3), h.v_bin_of(1)) == 1);
  // bins are 2 wide from -10 (u) and -20 (v)
  CHECK(h.u_bin_of(3) == 6);
  CHECK(h.v_bin_of(1) == 10);

  InteractionRecord far;
  far.chosen = 2;
  log.push_back(far);
  log.push_back(InteractionRecord{0, 0, {}, 1});
  const auto g = consumption_frequency(log, world);
  long mass = 0;
  for (long c : g.counts) mass += c;
  CHECK(mass == 3);
  CHECK(g.total == 3);
  CHECK(g.at(19, 19) == 1);
}

TEST_CASE("replicate") {
  ExperimentConfig config;
  config.scenario.m = 8;
  config.scenario.n = 30;
  config.scenario.k = 6;
  config.warmup_rounds = 5;
  config.policy_rounds = 10;
  config.total_rounds = 15;
  config.replications = 2;
  config.seed = 4;
  config.policies = ExperimentConfig::default_policies(InfoLevel::Perfect);

  const auto a = replicate(config);
  const auto b = replicate(config);
  CHECK(a.results.size() == config.policies.size());
  for (std::size_t k = 0; k < a.results.size(); ++k) {
    CHECK(a.results[k].per_replication == b.results[k].per_replication);
    CHECK(a.results[k].per_replication.size() == 2u);
  }
  CHECK(a.metadata.at("seed") == "4");

  config.replications = 1;
  const auto single = replicate(config);
  for (const auto& r : single.results) CHECK(r.std == 0.0);

  SUBCASE("histogram mass equals on-platform consumption") {
    long consumed = 0;
    replicate(config, {}, [&](int, PolicyKind kind, const World&, const InteractionLog&, const InteractionLog& log) {
      if (kind != PolicyKind::ClickBased) return;
      for (const auto& r : log) consumed += r.chosen != kOutside;
    });
    CHECK(single.result(PolicyKind::ClickBased).histogram.total == consumed);
  }
  SUBCASE("policies fork from the same post-warm-up world") {
    std::vector<std::vector<std::vector<char>>> starts;
    replicate(config, {}, [&](int, PolicyKind, const World& world, const InteractionLog& warmup, const InteractionLog& log) {
      World start = world;
      for (const auto& r : log) {
        if (r.chosen != kOutside) start.consumed[r.user][r.chosen] = 0;
      }
      starts.push_back(start.consumed);
      CHECK(warmup.size() == 8u * 5u);
    });
    for (const auto& s : starts) CHECK(s == starts.front());
  }
  SUBCASE("configuration errors") {
    config.total_rounds = 99;
    CHECK_THROWS_AS(replicate(config), ConfigError);
    config.total_rounds = 15;
    config.info = InfoLevel::Partial;
    config.policies = {PolicyKind::GreedyPerfect};
    CHECK_THROWS_AS(replicate(config), ConfigError);
  }
}

TEST_CASE("partial-information replicate runs end to end") {
  ExperimentConfig config;
  config.scenario.m = 10;
  config.scenario.n = 30;
  config.scenario.k = 6;
  config.warmup_rounds = 6;
  config.policy_rounds = 5;
  config.total_rounds = 11;
  config.replications = 1;
  config.info = InfoLevel::Partial;
  config.train.epochs = 20;
  config.policies = ExperimentConfig::default_policies(InfoLevel::Partial);
  const auto report = replicate(config);
  CHECK(report.results.size() == 5u);
  CHECK(report.metadata.at("info_level") == "partial");
  for (const auto& r : report.results) CHECK(std::isfinite(r.mean));
}
