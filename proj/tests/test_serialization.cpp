#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "temptrec/errors.hpp"
#include "temptrec/serialization.hpp"
#include "temptrec/synthgen.hpp"

using namespace temptrec;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

TEST_CASE("world round trip") {
  ScenarioConfig config;
  config.m = 5;
  config.n = 7;
  config.k = 3;
  config.seed = 11;
  config.item_distribution.johnson = true;
  World world = make_world(config);
  world.consumed[2][4] = 1;
  const auto doc = to_json(world);
  CHECK(doc.at("format") == "temptrec.world");
  CHECK(doc.at("version") == kFormatVersion);
  const World back = world_from_json(nlohmann::json::parse(doc.dump()));
  REQUIRE(back.users.size() == world.users.size());
  for (std::size_t j = 0; j < world.users.size(); ++j) {
    CHECK(back.users[j].a == world.users[j].a);
    CHECK(same_bits(back.users[j].lambda_c, world.users[j].lambda_c));
  }
  for (std::size_t i = 0; i < world.items.size(); ++i) CHECK(back.items[i].y == world.items[i].y);
  CHECK(back.availability == world.availability);
  CHECK(back.consumed == world.consumed);
  CHECK(back.metadata == world.metadata);
  CHECK(back.seed == world.seed);
}

TEST_CASE("log and dataset round trip") {
  InteractionLog log;
  InteractionRecord a;
  a.user = 1;
  a.round = 3;
  a.slate = {4, 2, 9};
  a.chosen = 2;
  a.rating = 3.25;
  InteractionRecord b;
  b.user = 0;
  b.slate = {};
  b.chosen = kOutside;
  b.outside_index = 1;
  b.outside_enrichment = -0.1;
  log = {a, b};
  const auto doc = log_to_json(log);
  CHECK(doc.at("records")[1].at("chosen") == "OUTSIDE");
  const auto back = log_from_json(nlohmann::json::parse(doc.dump()));
  REQUIRE(back.size() == 2u);
  CHECK(back[0].slate == a.slate);
  CHECK(back[0].rating.value() == 3.25);
  CHECK(back[1].chosen == kOutside);
  CHECK_FALSE(back[1].rating.has_value());
  CHECK(same_bits(back[1].outside_enrichment, -0.1));

  const Dataset data = Dataset::from_log(log, 2, 10);
  const Dataset data_back = dataset_from_json(nlohmann::json::parse(to_json(data).dump()));
  CHECK(data_back.ratings.size() == 1u);
  CHECK(data_back.interactions.size() == 2u);
  CHECK(data_back.num_items == 10);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  EstimatedModel model(4, 6, 3);
  Rng rng(8);
  for (double& p : model.params()) p = rng.normal(0.0, 1.0) / 3.0;
  model.expected_outside_enrichment = {0.1, 1.0 / 3.0, -2.5, 7.0};
  TrainConfig config;
  config.seed = 77;
  config.alpha = 0.3;
  const auto text = checkpoint_to_json(model, config).dump();
  TrainConfig config_back;
  const auto back = model_from_checkpoint(nlohmann::json::parse(text), &config_back);
  REQUIRE(back.params().size() == model.params().size());
  for (std::size_t k = 0; k < model.params().size(); ++k) CHECK(same_bits(back.params()[k], model.params()[k]));
  CHECK(back.expected_outside_enrichment == model.expected_outside_enrichment);
  CHECK(config_back.seed == 77u);
  CHECK(config_back.alpha == 0.3);
  CHECK(back.dim() == 3);

  SUBCASE("through a file") {
    const auto path = (std::filesystem::temp_directory_path() / "temptrec_test_checkpoint.json").string();
    write_json_file(path, checkpoint_to_json(model, config));
    const auto from_file = model_from_checkpoint(read_json_file(path));
    for (std::size_t k = 0; k < model.params().size(); ++k) CHECK(same_bits(from_file.params()[k], model.params()[k]));
  }
  SUBCASE("format and version are checked") {
    auto doc = checkpoint_to_json(model, config);
    doc["version"] = kFormatVersion + 1;
    CHECK_THROWS_AS(model_from_checkpoint(doc), InputError);
    CHECK_THROWS_AS(model_from_checkpoint(to_json(World{})), InputError);
  }
}

TEST_CASE("report formats") {
  MetricsReport report;
  report.scenario = "enriching";
  report.info = InfoLevel::Perfect;
  PolicyResult r;
  r.policy = PolicyKind::ClickBased;
  r.per_replication = {1.5, 2.5};
  r.mean = 2.0;
  r.std = 0.7071;
  r.histogram.add(3.0, 1.0);
  report.results.push_back(r);
  report.metadata["seed"] = "7";

  std::ostringstream csv;
  write_report_csv(csv, report);
  const std::string text = csv.str();
  CHECK(text.rfind("scenario,info_level,policy,replication,metric,value\n", 0) == 0);
  CHECK(text.find("enriching,perfect,click_based,0,overall_individual_enrichment,1.5") != std::string::npos);
  CHECK(text.find("enriching,perfect,click_based,1,overall_individual_enrichment,2.5") != std::string::npos);

  std::ostringstream hist;
  write_histogram_csv(hist, report);
  std::istringstream lines(hist.str());
  std::string line;
  long total = 0;
  int rows = 0;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    ++rows;
    total += std::stol(line.substr(line.rfind(',') + 1));
  }
  CHECK(rows == 400);
  CHECK(total == 1);

  const auto doc = to_json(report);
  CHECK(doc.at("format") == "temptrec.report");
  CHECK(doc.at("metadata").at("seed") == "7");
}
