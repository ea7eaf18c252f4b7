#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "temptrec/errors.hpp"
#include "temptrec/movielens.hpp"
#include "temptrec/serialization.hpp"
#include "temptrec/simharness.hpp"

namespace py = pybind11;
using namespace temptrec;

namespace {

World world_from_string(const std::string& text) { return world_from_json(nlohmann::json::parse(text)); }

std::vector<ItemId> greedy_for(const World& world, UserId user, std::size_t slate_size) {
  const PolicyContext context{&world, InfoLevel::Perfect};
  const auto available = world.available_items(user);
  return greedy_slate(PolicyKind::GreedyPerfect, user, available, context, slate_size);
}

std::vector<ItemId> baseline_for(const World& world, const std::string& policy, UserId user, std::size_t slate_size) {
  const PolicyContext context{&world, InfoLevel::Perfect};
  const auto available = world.available_items(user);
  return baseline_recommend(parse_policy(policy), user, available, context, slate_size);
}

std::string warmup_log(World& world, std::uint64_t seed, int rounds, std::size_t slate_size) {
  Rng rng(seed);
  return log_to_json(run_warmup(world, rng, rounds, slate_size)).dump();
}

std::string policy_log(World& world, const std::string& policy, std::uint64_t seed, int rounds,
                       std::size_t slate_size) {
  const PolicyContext context{&world, InfoLevel::Perfect};
  return log_to_json(run_policy_rounds(world, parse_policy(policy), context, Rng(seed), rounds, slate_size)).dump();
}

double log_enrichment(const std::string& log, const World& world) {
  return overall_individual_enrichment(log_from_json(nlohmann::json::parse(log)), world);
}

EstimatedModel fit_log(const std::string& log, int num_users, int num_items, const TrainConfig& config,
                       const std::vector<double>& expected_outside) {
  const Dataset dataset = Dataset::from_log(log_from_json(nlohmann::json::parse(log)), num_users, num_items);
  return fit(dataset, config, expected_outside);
}

std::string movielens_report(const std::string& ratings_path, const SandboxConfig& sandbox, int rounds, int epochs) {
  MovieLensConfig config;
  config.sandbox = sandbox;
  config.rounds = rounds;
  config.train.epochs = epochs;
  config.train.latent_dim = sandbox.latent_dim;
  std::vector<MovieLensRun> runs;
  for (auto& box : build_sandboxes_from_file(ratings_path, config.sandbox)) {
    runs.push_back(prepare_movielens_run(std::move(box), config));
  }
  return to_json(run_movielens_experiment(runs, config)).dump();
}

}  // namespace

PYBIND11_MODULE(_temptrec, m) {
  m.doc() = "Enrichment/temptation recommender model, policies, estimation and experiments";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_IOError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("m", &ScenarioConfig::m)
      .def_readwrite("n", &ScenarioConfig::n)
      .def_readwrite("k", &ScenarioConfig::k)
      .def_readwrite("d", &ScenarioConfig::d)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_property(
          "scenario", [](const ScenarioConfig& c) { return std::string(to_string(c.scenario)); },
          [](ScenarioConfig& c, const std::string& name) { c.scenario = parse_scenario(name); })
      .def_property(
          "johnson", [](const ScenarioConfig& c) { return c.item_distribution.johnson; },
          [](ScenarioConfig& c, bool value) { c.item_distribution.johnson = value; });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("final_lr_fraction", &TrainConfig::final_lr_fraction)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("minibatch_size", &TrainConfig::minibatch_size)
      .def_readwrite("latent_dim", &TrainConfig::latent_dim)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("l2", &TrainConfig::l2)
      .def_readwrite("l2_universal", &TrainConfig::l2_universal)
      .def_readwrite("freeze_lambda_f", &TrainConfig::freeze_lambda_f);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("warmup_rounds", &ExperimentConfig::warmup_rounds)
      .def_readwrite("policy_rounds", &ExperimentConfig::policy_rounds)
      .def_readwrite("total_rounds", &ExperimentConfig::total_rounds)
      .def_readwrite("slate_size", &ExperimentConfig::slate_size)
      .def_readwrite("replications", &ExperimentConfig::replications)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("scenario", &ExperimentConfig::scenario)
      .def_readwrite("train", &ExperimentConfig::train)
      .def_property(
          "info", [](const ExperimentConfig& c) { return std::string(to_string(c.info)); },
          [](ExperimentConfig& c, const std::string& name) { c.info = parse_info_level(name); })
      .def_property(
          "policies",
          [](const ExperimentConfig& c) {
            std::vector<std::string> names;
            for (PolicyKind p : c.policies) names.emplace_back(to_string(p));
            return names;
          },
          [](ExperimentConfig& c, const std::vector<std::string>& names) {
            c.policies.clear();
            for (const auto& n : names) c.policies.push_back(parse_policy(n));
          });

  py::class_<SandboxConfig>(m, "SandboxConfig")
      .def(py::init<>())
      .def_readwrite("m_users", &SandboxConfig::m_users)
      .def_readwrite("n_movies", &SandboxConfig::n_movies)
      .def_readwrite("ratings_per_user", &SandboxConfig::ratings_per_user)
      .def_readwrite("resamples", &SandboxConfig::resamples)
      .def_readwrite("latent_dim", &SandboxConfig::latent_dim)
      .def_readwrite("seed", &SandboxConfig::seed);

  py::class_<World>(m, "World")
      .def_property_readonly("num_users", &World::num_users)
      .def_property_readonly("num_items", &World::num_items)
      .def("enrichment", [](const World& w, UserId j, ItemId i) { return enrichment(w.users.at(j), w.items.at(i)); })
      .def("temptation", [](const World& w, UserId j, ItemId i) { return temptation(w.users.at(j), w.items.at(i)); })
      .def("choice_score",
           [](const World& w, UserId j, ItemId i) { return choice_score(w.users.at(j), w.items.at(i)); })
      .def("feedback_score",
           [](const World& w, UserId j, ItemId i) { return feedback_score(w.users.at(j), w.items.at(i)); })
      .def("expected_enrichment", &expected_enrichment_perfect, py::arg("user"), py::arg("item"))
      .def("expected_outside_enrichment", &expected_outside_enrichment, py::arg("user"))
      .def("available_items", &World::available_items, py::arg("user"))
      .def("reset_consumption", &World::reset_consumption)
      .def("to_json", [](const World& w) { return to_json(w).dump(); })
      .def_static("from_json", &world_from_string, py::arg("text"));

  py::class_<EstimatedModel>(m, "EstimatedModel")
      .def_property_readonly("num_users", &EstimatedModel::num_users)
      .def_property_readonly("num_items", &EstimatedModel::num_items)
      .def_property_readonly("dim", &EstimatedModel::dim)
      .def_property_readonly("mu", &EstimatedModel::mu)
      .def_property_readonly("sigma", &EstimatedModel::sigma)
      .def("lambda_f", &EstimatedModel::lambda_f, py::arg("user"))
      .def("lambda_c", &EstimatedModel::lambda_c, py::arg("user"))
      .def("enrichment", &EstimatedModel::enrichment, py::arg("user"), py::arg("item"))
      .def("temptation", &EstimatedModel::temptation, py::arg("user"), py::arg("item"))
      .def("choice_score", &EstimatedModel::choice_score, py::arg("user"), py::arg("item"))
      .def("feedback_score", &EstimatedModel::feedback_score, py::arg("user"), py::arg("item"))
      .def("choice_probability",
           [](const EstimatedModel& model, UserId j, ItemId i) { return choice_probability(model, j, i); })
      .def("checkpoint", [](const EstimatedModel& model, const TrainConfig& config) {
        return checkpoint_to_json(model, config).dump();
      });

  m.def("make_world", py::overload_cast<const ScenarioConfig&>(&make_world), py::arg("config"));
  m.def("greedy_slate", &greedy_for, py::arg("world"), py::arg("user"), py::arg("slate_size") = kDefaultSlateSize);
  m.def("baseline_slate", &baseline_for, py::arg("world"), py::arg("policy"), py::arg("user"),
        py::arg("slate_size") = kDefaultSlateSize);
  m.def("run_warmup_json", &warmup_log, py::arg("world"), py::arg("seed"), py::arg("rounds") = 25,
        py::arg("slate_size") = kDefaultSlateSize);
  m.def("run_policy_json", &policy_log, py::arg("world"), py::arg("policy"), py::arg("seed"),
        py::arg("rounds") = 50, py::arg("slate_size") = kDefaultSlateSize);
  m.def("overall_individual_enrichment_json", &log_enrichment, py::arg("log"), py::arg("world"));
  m.def("brute_force_optimal", &brute_force_optimal, py::arg("world"), py::arg("user"), py::arg("rounds"));
  m.def("greedy_expected_value", &greedy_expected_value, py::arg("world"), py::arg("user"), py::arg("rounds"),
        py::arg("slate_size") = kDefaultSlateSize);
  m.def("fit_json", &fit_log, py::arg("log"), py::arg("num_users"), py::arg("num_items"), py::arg("config"),
        py::arg("expected_outside_enrichment"));
  m.def(
      "model_from_checkpoint",
      [](const std::string& text) { return model_from_checkpoint(nlohmann::json::parse(text)); }, py::arg("text"));
  m.def(
      "replicate_json",
      [](const ExperimentConfig& config) {
        if (config.policies.empty()) {
          ExperimentConfig copy = config;
          copy.policies = ExperimentConfig::default_policies(config.info);
          return to_json(replicate(copy)).dump();
        }
        return to_json(replicate(config)).dump();
      },
      py::arg("config"));
  m.def("movielens_report_json", &movielens_report, py::arg("ratings_path"), py::arg("sandbox"),
        py::arg("rounds") = 50, py::arg("epochs") = TrainConfig{}.epochs);
  m.def(
      "write_synthetic_ratings",
      [](const std::string& path, int users, int movies, std::uint64_t seed) {
        SyntheticRatingsConfig config;
        config.users = users;
        config.movies = movies;
        config.seed = seed;
        write_synthetic_ratings(path, config);
      },
      py::arg("path"), py::arg("users") = SyntheticRatingsConfig{}.users,
      py::arg("movies") = SyntheticRatingsConfig{}.movies, py::arg("seed") = 0);
}
