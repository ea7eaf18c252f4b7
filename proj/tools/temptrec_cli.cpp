#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "temptrec/errors.hpp"
#include "temptrec/movielens.hpp"
#include "temptrec/serialization.hpp"
#include "temptrec/simharness.hpp"

using namespace temptrec;
namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 2;

// Every option of `app` with its effective value, under "cli.<name>".
std::map<std::string, std::string> echo_flags(const CLI::App& app) {
  std::map<std::string, std::string> out;
  out["cli.command"] = app.get_name();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "-h") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_expected_max() == 0 ? "false" : opt->get_default_str();
    }
    std::string name = opt->get_name();
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    out["cli." + name] = value;
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

void write_report_files(const MetricsReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_json_file((dir / "report.json").string(), to_json(report));
  std::ostringstream csv, hist;
  write_report_csv(csv, report);
  write_histogram_csv(hist, report);
  write_text(dir / "report.csv", csv.str());
  write_text(dir / "histogram.csv", hist.str());
}

void print_summary(const MetricsReport& report) {
  std::cout << report.scenario << " (" << to_string(report.info) << ")\n";
  for (const auto& r : report.results) {
    std::cout << "  " << to_string(r.policy) << "  mean " << r.mean << "  std " << r.std << "\n";
  }
}

struct SynthOptions {
  std::string scenario = "enriching";
  std::string info = "perfect";
  int m = ScenarioConfig{}.m;
  int n = ScenarioConfig{}.n;
  int k = ScenarioConfig{}.k;
  int d = ScenarioConfig{}.d;
  bool johnson = false;
  int replications = 5;
  int warmup = 25;
  int rounds = 50;
  std::size_t slate = kDefaultSlateSize;
  std::uint64_t seed = 0;
  int epochs = TrainConfig{}.epochs;
  double alpha = TrainConfig{}.alpha;
  double learning_rate = TrainConfig{}.learning_rate;
  double l2 = TrainConfig{}.l2;
  double l2_universal = TrainConfig{}.l2_universal;
  std::vector<std::string> policies;
  std::string out_dir = "synth_out";
  bool save_logs = false;
};

int run_synth(const SynthOptions& o, const CLI::App& app) {
  ExperimentConfig config;
  config.info = parse_info_level(o.info);
  config.scenario.scenario = parse_scenario(o.scenario);
  config.scenario.m = o.m;
  config.scenario.n = o.n;
  config.scenario.k = o.k;
  config.scenario.d = o.d;
  config.scenario.item_distribution.johnson = o.johnson;
  config.replications = o.replications;
  config.warmup_rounds = o.warmup;
  config.policy_rounds = o.rounds;
  config.total_rounds = o.warmup + o.rounds;
  config.slate_size = o.slate;
  config.seed = o.seed;
  config.train.epochs = o.epochs;
  config.train.alpha = o.alpha;
  config.train.learning_rate = o.learning_rate;
  config.train.l2 = o.l2;
  config.train.l2_universal = o.l2_universal;
  config.train.latent_dim = o.d;
  if (o.policies.empty()) {
    config.policies = ExperimentConfig::default_policies(config.info);
  } else {
    for (const auto& p : o.policies) config.policies.push_back(parse_policy(p));
  }

  const fs::path dir = o.out_dir;
  RunObserver observer;
  if (o.save_logs) {
    fs::create_directories(dir / "logs");
    observer = [&](int rep, PolicyKind kind, const World& world, const InteractionLog& warmup,
                   const InteractionLog& log) {
      const std::string prefix = "rep" + std::to_string(rep) + "_";
      if (!fs::exists(dir / "logs" / (prefix + "world.json"))) {
        World pristine = world;
        pristine.reset_consumption();
        write_json_file((dir / "logs" / (prefix + "world.json")).string(), to_json(pristine));
        write_json_file((dir / "logs" / (prefix + "warmup.json")).string(), log_to_json(warmup));
      }
      write_json_file((dir / "logs" / (prefix + std::string(to_string(kind)) + ".json")).string(), log_to_json(log));
    };
  }
  MetricsReport report = replicate(config, {}, observer);
  for (const auto& [key, value] : echo_flags(app)) report.metadata[key] = value;
  write_report_files(report, dir);
  print_summary(report);
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
  return 0;
}

struct MlOptions {
  std::string ratings;
  int users = SandboxConfig{}.m_users;
  int movies = SandboxConfig{}.n_movies;
  int per_user = SandboxConfig{}.ratings_per_user;
  int resamples = SandboxConfig{}.resamples;
  int d = SandboxConfig{}.latent_dim;
  std::size_t slate = kDefaultSlateSize;
  int rounds = MovieLensConfig{}.rounds;
  int epochs = TrainConfig{}.epochs;
  std::uint64_t seed = 0;
  std::string out_dir = "ml_out";
};

int run_ml(const MlOptions& o, const CLI::App& app) {
  MovieLensConfig config;
  config.sandbox.m_users = o.users;
  config.sandbox.n_movies = o.movies;
  config.sandbox.ratings_per_user = o.per_user;
  config.sandbox.resamples = o.resamples;
  config.sandbox.latent_dim = o.d;
  config.sandbox.slate_size = o.slate;
  config.sandbox.seed = o.seed;
  config.reconstruction.slate_size = o.slate;
  config.train.epochs = o.epochs;
  config.train.latent_dim = o.d;
  config.rounds = o.rounds;

  std::vector<MovieLensRun> runs;
  for (auto& box : build_sandboxes_from_file(o.ratings, config.sandbox)) {
    runs.push_back(prepare_movielens_run(std::move(box), config));
    std::cerr << "resample " << runs.size() << ": held-out choice accuracy " << runs.back().holdout_choice_accuracy
              << "\n";
  }
  MetricsReport report = run_movielens_experiment(runs, config);
  for (const auto& [key, value] : echo_flags(app)) report.metadata[key] = value;
  write_report_files(report, o.out_dir);
  print_summary(report);
  std::cout << "wrote " << (fs::path(o.out_dir) / "report.json").string() << "\n";
  return 0;
}

struct EstimateOptions {
  std::string dataset;
  std::string log;
  std::string world;
  int users = 0;
  int items = 0;
  double outside_enrichment = 0.0;
  int d = 3;
  int epochs = TrainConfig{}.epochs;
  double alpha = TrainConfig{}.alpha;
  double learning_rate = TrainConfig{}.learning_rate;
  double l2 = TrainConfig{}.l2;
  double l2_universal = TrainConfig{}.l2_universal;
  bool freeze_lambda_f = false;
  std::uint64_t seed = 0;
  std::string out = "checkpoint.json";
};

int run_estimate(const EstimateOptions& o, const CLI::App& app) {
  std::optional<World> world;
  if (!o.world.empty()) world = world_from_json(read_json_file(o.world));

  Dataset dataset;
  if (!o.dataset.empty()) {
    dataset = dataset_from_json(read_json_file(o.dataset));
  } else {
    const int users = o.users > 0 ? o.users : world ? static_cast<int>(world->users.size()) : 0;
    const int items = o.items > 0 ? o.items : world ? static_cast<int>(world->items.size()) : 0;
    if (users <= 0 || items <= 0) throw ConfigError("--log needs --users/--items or --world");
    dataset = Dataset::from_log(log_from_json(read_json_file(o.log)), users, items);
  }

  TrainConfig config;
  config.latent_dim = o.d;
  config.epochs = o.epochs;
  config.alpha = o.alpha;
  config.learning_rate = o.learning_rate;
  config.l2 = o.l2;
  config.l2_universal = o.l2_universal;
  config.freeze_lambda_f = o.freeze_lambda_f;
  config.seed = o.seed;

  std::vector<double> outside(dataset.num_users, o.outside_enrichment);
  if (world) {
    for (UserId j = 0; j < dataset.num_users; ++j) outside[j] = expected_outside_enrichment(*world, j);
  }
  FitDiagnostics diag;
  const EstimatedModel model = fit(dataset, config, outside, &diag);
  auto doc = checkpoint_to_json(model, config);
  doc["diagnostics"] = {{"epochs_run", diag.epochs_run},
                        {"final_surrogate", diag.final_surrogate},
                        {"final_total_loss", diag.final_total_loss},
                        {"converged", diag.converged}};
  doc["metadata"] = echo_flags(app);
  write_json_file(o.out, doc);
  std::cout << "epochs " << diag.epochs_run << ", loss " << diag.final_total_loss << ", sigma " << model.sigma()
            << "\nwrote " << o.out << "\n";
  return 0;
}

struct ReportOptions {
  std::string world;
  std::vector<std::string> logs;
  std::string scenario = "custom";
  std::string info = "perfect";
  std::string out_dir = "report_out";
};

int run_report(const ReportOptions& o, const CLI::App& app) {
  const World world = world_from_json(read_json_file(o.world));
  MetricsReport report;
  report.scenario = o.scenario;
  report.info = parse_info_level(o.info);
  for (const auto& entry : o.logs) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ConfigError("--log expects POLICY=PATH, got " + entry);
    PolicyResult result;
    result.policy = parse_policy(entry.substr(0, eq));
    const auto log = log_from_json(read_json_file(entry.substr(eq + 1)));
    result.mean = overall_individual_enrichment(log, world);
    result.per_replication = {result.mean};
    result.histogram = consumption_frequency(log, world);
    report.results.push_back(std::move(result));
  }
  report.metadata = echo_flags(app);
  write_report_files(report, o.out_dir);
  print_summary(report);
  std::cout << "wrote " << (fs::path(o.out_dir) / "report.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Enrichment/temptation recommender simulations and estimation"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth-run", "Run a synthetic scenario and compare policies");
  synth_cmd->add_option("--scenario", synth.scenario, "enriching | tempting | similar")->capture_default_str();
  synth_cmd->add_option("--info", synth.info, "perfect | partial")->capture_default_str();
  synth_cmd->add_option("--m", synth.m, "number of users")->capture_default_str();
  synth_cmd->add_option("--n", synth.n, "number of items")->capture_default_str();
  synth_cmd->add_option("--k", synth.k, "outside options per user")->capture_default_str();
  synth_cmd->add_option("--d", synth.d, "latent dimension")->capture_default_str();
  synth_cmd->add_flag("--johnson", synth.johnson, "draw item (x1, y1) from Johnson S_U");
  synth_cmd->add_option("--replications", synth.replications, "independent replications")->capture_default_str();
  synth_cmd->add_option("--warmup", synth.warmup, "random warm-up rounds")->capture_default_str();
  synth_cmd->add_option("--rounds", synth.rounds, "policy rounds")->capture_default_str();
  synth_cmd->add_option("--slate", synth.slate, "slate size")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "master seed")->capture_default_str();
  synth_cmd->add_option("--policies", synth.policies, "policies to run (default: all five for --info)");
  synth_cmd->add_option("--epochs", synth.epochs, "training epochs (partial info)")->capture_default_str();
  synth_cmd->add_option("--alpha", synth.alpha, "rating loss weight")->capture_default_str();
  synth_cmd->add_option("--lr", synth.learning_rate, "learning rate")->capture_default_str();
  synth_cmd->add_option("--l2", synth.l2, "ridge on latent components")->capture_default_str();
  synth_cmd->add_option("--l2-universal", synth.l2_universal, "shrinkage of item universal components")
      ->capture_default_str();
  synth_cmd->add_option("--out-dir", synth.out_dir, "output directory")->capture_default_str();
  synth_cmd->add_flag("--save-logs", synth.save_logs, "also write worlds and interaction logs");

  MlOptions ml;
  auto* ml_cmd = app.add_subcommand("ml-run", "Run the MovieLens sandbox comparison");
  ml_cmd->add_option("--ratings", ml.ratings, "MovieLens ratings.csv")->required()->check(CLI::ExistingFile);
  ml_cmd->add_option("--users", ml.users, "users per sandbox")->capture_default_str();
  ml_cmd->add_option("--movies", ml.movies, "movies per sandbox")->capture_default_str();
  ml_cmd->add_option("--per-user", ml.per_user, "ratings per sampled user")->capture_default_str();
  ml_cmd->add_option("--resamples", ml.resamples, "independent sandboxes")->capture_default_str();
  ml_cmd->add_option("--d", ml.d, "latent dimension")->capture_default_str();
  ml_cmd->add_option("--slate", ml.slate, "slate size")->capture_default_str();
  ml_cmd->add_option("--rounds", ml.rounds, "policy rounds")->capture_default_str();
  ml_cmd->add_option("--epochs", ml.epochs, "training epochs")->capture_default_str();
  ml_cmd->add_option("--seed", ml.seed, "master seed")->capture_default_str();
  ml_cmd->add_option("--out-dir", ml.out_dir, "output directory")->capture_default_str();

  EstimateOptions est;
  auto* est_cmd = app.add_subcommand("estimate", "Fit the latent model to a dataset and write a checkpoint");
  auto* dataset_opt = est_cmd->add_option("--dataset", est.dataset, "dataset JSON")->check(CLI::ExistingFile);
  auto* log_opt = est_cmd->add_option("--log", est.log, "interaction log JSON")->check(CLI::ExistingFile);
  dataset_opt->excludes(log_opt);
  est_cmd->add_option("--world", est.world, "world JSON (sizes and expected outside enrichment)")
      ->check(CLI::ExistingFile);
  est_cmd->add_option("--users", est.users, "number of users (with --log)");
  est_cmd->add_option("--items", est.items, "number of items (with --log)");
  est_cmd->add_option("--outside-enrichment", est.outside_enrichment, "E[u_o] for every user when no --world")
      ->capture_default_str();
  est_cmd->add_option("--d", est.d, "latent dimension")->capture_default_str();
  est_cmd->add_option("--epochs", est.epochs, "training epochs")->capture_default_str();
  est_cmd->add_option("--alpha", est.alpha, "rating loss weight")->capture_default_str();
  est_cmd->add_option("--lr", est.learning_rate, "learning rate")->capture_default_str();
  est_cmd->add_option("--l2", est.l2, "ridge on latent components")->capture_default_str();
  est_cmd->add_option("--l2-universal", est.l2_universal, "shrinkage of item universal components")
      ->capture_default_str();
  est_cmd->add_flag("--freeze-lambda-f", est.freeze_lambda_f, "fix lambda_F = 1");
  est_cmd->add_option("--seed", est.seed, "training seed")->capture_default_str();
  est_cmd->add_option("--out", est.out, "checkpoint path")->capture_default_str();

  ReportOptions rep;
  auto* rep_cmd = app.add_subcommand("report", "Compute metrics and histograms from interaction logs");
  rep_cmd->add_option("--world", rep.world, "world JSON")->required()->check(CLI::ExistingFile);
  rep_cmd->add_option("--log", rep.logs, "POLICY=PATH, repeatable")->required();
  rep_cmd->add_option("--scenario", rep.scenario, "label for the report")->capture_default_str();
  rep_cmd->add_option("--info", rep.info, "perfect | partial")->capture_default_str();
  rep_cmd->add_option("--out-dir", rep.out_dir, "output directory")->capture_default_str();

  SyntheticRatingsConfig sr;
  std::string sr_out = "ratings.csv";
  auto* sr_cmd = app.add_subcommand("synth-ratings", "Write a synthetic ratings file in MovieLens format");
  sr_cmd->add_option("--out", sr_out, "output path")->capture_default_str();
  sr_cmd->add_option("--users", sr.users, "number of users")->capture_default_str();
  sr_cmd->add_option("--movies", sr.movies, "number of movies")->capture_default_str();
  sr_cmd->add_option("--seed", sr.seed, "seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*synth_cmd) return run_synth(synth, *synth_cmd);
    if (*ml_cmd) return run_ml(ml, *ml_cmd);
    if (*est_cmd) {
      if (est.dataset.empty() && est.log.empty()) {
        std::cerr << "estimate: one of --dataset or --log is required\n";
        return kUsageError;
      }
      return run_estimate(est, *est_cmd);
    }
    if (*rep_cmd) return run_report(rep, *rep_cmd);
    if (*sr_cmd) {
      write_synthetic_ratings(sr_out, sr);
      std::cout << "wrote " << sr_out << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
