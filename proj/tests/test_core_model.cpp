#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "temptrec/core_model.hpp"
#include "temptrec/errors.hpp"

using namespace temptrec;
using testutil::item1;
using testutil::outside1;
using testutil::user1;

namespace {

UserProfile user_with(LatentVector a, LatentVector b, double lambda_c = 0.25, double lambda_f = 0.75) {
  return {0, std::move(a), std::move(b), lambda_c, lambda_f};
}

OptionProfile option_with(LatentVector x, LatentVector y) { return {0, OptionKind::OnPlatformItem, x, y}; }

Selection pick(const UserProfile& user, const std::vector<OptionProfile>& slate, const OptionProfile* outside) {
  std::vector<const OptionProfile*> ptrs;
  for (const auto& option : slate) ptrs.push_back(&option);
  return select_consumption(user, ptrs, outside);
}

}  // namespace

TEST_CASE("enrichment is the dot product a.x") {
  CHECK(enrichment(user_with({1, 0, 0}, {1, 0, 0}), option_with({10, 3, -2}, {0, 0, 0})) == 10.0);
  CHECK(enrichment(user_with({1, 1}, {1, 0}), option_with({2, -2}, {0, 0})) == 0.0);
  CHECK(enrichment(user_with({1, 0.5, -0.5}, {1, 0, 0}), option_with({4, 2, 2}, {0, 0, 0})) == 4.0);
  CHECK_THROWS_AS(enrichment(user_with({1, 0}, {1, 0}), option_with({1, 2, 3}, {0, 0})), ConfigError);
}

TEST_CASE("temptation is the dot product b.y") {
  CHECK(temptation(user_with({1, 0}, {1, 0}), option_with({0, 0}, {7, 9})) == 7.0);
  CHECK(temptation(user_with({1, 0}, {1, 1}), option_with({0, 0}, {0, 0})) == 0.0);
  CHECK(temptation(user_with({1, 0, 0}, {1, 2, -1}), option_with({0, 0, 0}, {1, 1, 1})) == 2.0);
  CHECK_THROWS_AS(temptation(user_with({1}, {1}), option_with({1}, {1, 2})), ConfigError);
}

TEST_CASE("choice and feedback scores mix enrichment and temptation") {
  CHECK(choice_score(user1(1.0), item1(0, 5, -100)) == 5.0);
  CHECK(choice_score(user1(0.0, 0.5), item1(0, 5, -100)) == -100.0);
  CHECK(choice_score(user1(0.25), item1(0, 4, 8)) == 7.0);

  CHECK(feedback_score(user1(0.0, 1.0), item1(0, 3, 9)) == 3.0);
  CHECK(feedback_score(user1(0.0, 0.5), item1(0, 2, 4)) == 3.0);
  CHECK(feedback_score(user1(0.0, 0.75), item1(0, 6.5, 6.5)) == doctest::Approx(6.5).epsilon(1e-15));
}

TEST_CASE("monotonicity of the choice score in u and v") {
  const auto user = user1(0.3, 0.8);
  CHECK(choice_score(user, item1(0, 2, 1)) < choice_score(user, item1(0, 3, 1)));
  CHECK(choice_score(user, item1(0, 2, 1)) < choice_score(user, item1(0, 2, 2)));
}

TEST_CASE("emit_rating applies the rating map") {
  const auto user = user1(0.0, 1.0);
  CHECK(emit_rating(user, item1(0, 3.2, 0), RatingMap::identity()) == 3.2);

  const auto stars = RatingMap::star_scale(0.0, 10.0);
  CHECK(emit_rating(user, item1(0, 25.0, 0), stars) == 5.0);
  CHECK(emit_rating(user, item1(0, -3.0, 0), stars) == 0.5);
  CHECK(stars(5.0) == doctest::Approx(2.75));
  CHECK(stars.inverse(stars(4.0)) == doctest::Approx(4.0));

  double previous = -1e9;
  for (double s = -5.0; s <= 15.0; s += 0.25) {
    const double r = stars(s);
    CHECK(r >= previous);
    previous = r;
  }
  CHECK_THROWS_AS(RatingMap::star_scale(1.0, 1.0), ConfigError);
}

TEST_CASE("select_consumption picks the argmax over slate and outside") {
  const auto user = user1(1.0);
  const std::vector<OptionProfile> slate{item1(0, 3, 0), item1(1, 7, 0)};
  const auto outside = outside1(0, 5, 0);
  const auto s = pick(user, slate, &outside);
  CHECK_FALSE(s.outside);
  CHECK(s.slate_pos == 1);

  CHECK(pick(user, {}, &outside).outside);

  SUBCASE("item tied with the outside option wins") {
    const auto tied = outside1(0, 7, 0);
    const auto t = pick(user, slate, &tied);
    CHECK_FALSE(t.outside);
    CHECK(t.slate_pos == 1);
  }
  SUBCASE("tied items resolve to the lowest id") {
    const std::vector<OptionProfile> ties{item1(5, 4, 0), item1(2, 4, 0), item1(9, 4, 0)};
    const auto t = pick(user, ties, nullptr);
    CHECK(t.slate_pos == 1);
  }
  SUBCASE("empty slate without an outside option is an invalid round") {
    CHECK_THROWS_AS(pick(user, {}, nullptr), ContractError);
  }
}

TEST_CASE("select_consumption is invariant to a common shift of all scores") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto user = user1(1.0);
    std::vector<OptionProfile> slate, shifted;
    const double c = rng.normal(0.0, 10.0);
    for (int i = 0; i < 6; ++i) {
      const double u = rng.normal(0.0, 3.0);
      slate.push_back(item1(i, u, 0));
      shifted.push_back(item1(i, u + c, 0));
    }
    const double uo = rng.normal(0.0, 3.0);
    const auto outside = outside1(0, uo, 0);
    const auto outside_shifted = outside1(0, uo + c, 0);
    const auto a = pick(user, slate, &outside);
    const auto b = pick(user, shifted, &outside_shifted);
    CHECK(a.outside == b.outside);
    if (!a.outside) CHECK(a.slate_pos == b.slate_pos);
  }
}

TEST_CASE("lambda_c = lambda_f = 1 gives a classical enrichment maximiser") {
  const auto user = user1(1.0, 1.0);
  const std::vector<OptionProfile> slate{item1(0, 3, 50), item1(1, 8, -50), item1(2, 5, 0)};
  const auto outside = outside1(0, 6, 100);
  CHECK(pick(user, slate, &outside).slate_pos == 1);
  CHECK(feedback_score(user, slate[1]) > feedback_score(user, slate[2]));
  CHECK(feedback_score(user, slate[2]) > feedback_score(user, slate[0]));
}

TEST_CASE("conditional enrichment follows the piecewise definition") {
  // score = 0.5 u + 0.5 v
  const auto user = user1(0.5);
  CHECK(conditional_enrichment(user, item1(0, 4, 10), outside1(0, 9, 3)) == 4.0);
  CHECK(conditional_enrichment(user, item1(0, 2, 4), outside1(0, 5, 1)) == 2.0);
  CHECK(conditional_enrichment(user, item1(0, 10, -8), outside1(0, 0, 4)) == 0.0);

  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto item = item1(0, rng.normal(0, 5), rng.normal(0, 5));
    const auto outside = outside1(0, rng.normal(0, 5), rng.normal(0, 5));
    const double value = conditional_enrichment(user, item, outside);
    CHECK((value == enrichment(user, item) || value == enrichment(user, outside)));
  }
}

TEST_CASE("step_round bookkeeping") {
  SUBCASE("K = 1 reduces to select_consumption") {
    auto world = testutil::tiny_world(1.0, {{3, 0}, {7, 0}}, {{5, 0}});
    Rng rng(1);
    const std::vector<ItemId> slate{0, 1};
    const auto record = step_round(world, 0, slate, rng);
    CHECK(record.chosen == 1);
    CHECK(record.outside_index == 0);
    CHECK(record.outside_enrichment == 5.0);
    REQUIRE(record.rating.has_value());
    CHECK(*record.rating == 7.0);
    CHECK(world.is_consumed(0, 1));
    CHECK_FALSE(world.is_consumed(0, 0));
    CHECK(world.round == 0);
  }
  SUBCASE("consumed items cannot be offered again") {
    auto world = testutil::tiny_world(1.0, {{3, 0}, {7, 0}}, {{5, 0}});
    Rng rng(1);
    const std::vector<ItemId> slate{0, 1};
    step_round(world, 0, slate, rng);
    CHECK_THROWS_AS(step_round(world, 0, slate, rng), ContractError);
    const auto available = world.available_items(0);
    const auto record = step_round(world, 0, available, rng);
    CHECK(record.chosen == kOutside);
    CHECK_FALSE(record.rating.has_value());
  }
  SUBCASE("fixed seed gives identical records") {
    auto w1 = testutil::tiny_world(0.5, {{3, 2}, {7, -1}, {1, 9}}, {{5, 0}, {2, 6}, {8, -4}});
    auto w2 = w1;
    Rng r1(42), r2(42);
    for (int t = 0; t < 3; ++t) {
      const auto s1 = w1.available_items(0);
      const auto s2 = w2.available_items(0);
      const auto a = step_round(w1, 0, s1, r1);
      const auto b = step_round(w2, 0, s2, r2);
      CHECK(a.chosen == b.chosen);
      CHECK(a.outside_index == b.outside_index);
      CHECK(a.slate == b.slate);
    }
  }
}

TEST_CASE("world validation") {
  auto world = testutil::tiny_world(0.25, {{1, 1}}, {{0, 0}});
  CHECK_NOTHROW(world.validate());
  world.users[0].lambda_c = 0.9;
  world.users[0].lambda_f = 0.5;
  CHECK_THROWS_AS(world.validate(), ConfigError);
  world.users[0].lambda_f = 1.0;
  world.users[0].a[0] = 2.0;
  CHECK_THROWS_AS(world.validate(), ConfigError);
  world.users[0].a[0] = 1.0;
  world.availability = {0.5};
  CHECK_THROWS_AS(world.validate(), ConfigError);
}

TEST_CASE("outside_with_scores reproduces requested enrichment and choice score") {
  const UserProfile user{0, {1, 0.4}, {1, -0.2}, 0.3, 0.7};
  const auto option = outside_with_scores(user, 2, 4.5, -1.25);
  CHECK(enrichment(user, option) == doctest::Approx(4.5));
  CHECK(choice_score(user, option) == doctest::Approx(-1.25));
}
