#include "temptrec/serialization.hpp"

#include <fstream>
#include <ostream>

#include "temptrec/errors.hpp"

namespace temptrec {

using nlohmann::json;

namespace {

json option_to_json(const OptionProfile& option) {
  return {{"id", option.id}, {"x", option.x}, {"y", option.y}};
}

OptionProfile option_from_json(const json& doc, OptionKind kind) {
  OptionProfile option;
  option.id = doc.at("id").get<int>();
  option.kind = kind;
  option.x = doc.at("x").get<LatentVector>();
  option.y = doc.at("y").get<LatentVector>();
  return option;
}

json rating_map_to_json(const RatingMap& map) {
  if (map.kind == RatingMap::Kind::Identity) return {{"kind", "identity"}};
  return {{"kind", "affine_clamped"}, {"score_lo", map.score_lo}, {"score_hi", map.score_hi}};
}

RatingMap rating_map_from_json(const json& doc) {
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "identity") return RatingMap::identity();
  if (kind == "affine_clamped") return RatingMap::star_scale(doc.at("score_lo"), doc.at("score_hi"));
  throw InputError("unknown rating map kind: " + kind);
}

}  // namespace

void check_format(const json& doc, const std::string& format) {
  if (!doc.is_object() || !doc.contains("format") || doc.at("format") != format) {
    throw InputError("expected a '" + format + "' document");
  }
  const int version = doc.value("version", 0);
  if (version < 1 || version > kFormatVersion) {
    throw InputError("unsupported " + format + " version " + std::to_string(version));
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << doc.dump(1) << '\n';
}

// ---------------------------------------------------------------------------

json to_json(const World& world) {
  json users = json::array();
  for (const auto& user : world.users) {
    users.push_back({{"id", user.id}, {"a", user.a}, {"b", user.b}, {"lambda_c", user.lambda_c},
                     {"lambda_f", user.lambda_f}});
  }
  json items = json::array();
  for (const auto& item : world.items) items.push_back(option_to_json(item));
  json pool = json::array();
  for (const auto& option : world.outside_pool) pool.push_back(option_to_json(option));

  json consumed = json::array();
  for (const auto& row : world.consumed) {
    json ids = json::array();
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i]) ids.push_back(i);
    }
    consumed.push_back(std::move(ids));
  }

  json doc = {{"format", "temptrec.world"},
              {"version", kFormatVersion},
              {"dim", world.dim},
              {"seed", world.seed},
              {"round", world.round},
              {"emit_ratings", world.emit_ratings},
              {"rating_map", rating_map_to_json(world.rating_map)},
              {"metadata", world.metadata},
              {"users", std::move(users)},
              {"items", std::move(items)},
              {"outside_pool", std::move(pool)},
              {"availability", world.availability},
              {"consumed", std::move(consumed)}};
  if (world.parametric_outside) {
    const auto& p = *world.parametric_outside;
    doc["parametric_outside"] = {{"mu", p.mu},
                                 {"sigma", p.sigma},
                                 {"mean_enrichment", p.mean_enrichment},
                                 {"enrichment_sd", p.enrichment_sd}};
  }
  return doc;
}

World world_from_json(const json& doc) {
  check_format(doc, "temptrec.world");
  World world;
  world.dim = doc.at("dim");
  world.seed = doc.at("seed");
  world.round = doc.value("round", 0);
  world.emit_ratings = doc.value("emit_ratings", true);
  world.rating_map = rating_map_from_json(doc.at("rating_map"));
  world.metadata = doc.value("metadata", std::map<std::string, std::string>{});
  for (const auto& u : doc.at("users")) {
    UserProfile user;
    user.id = u.at("id");
    user.a = u.at("a").get<LatentVector>();
    user.b = u.at("b").get<LatentVector>();
    user.lambda_c = u.at("lambda_c");
    user.lambda_f = u.at("lambda_f");
    world.users.push_back(std::move(user));
  }
  for (const auto& i : doc.at("items")) world.items.push_back(option_from_json(i, OptionKind::OnPlatformItem));
  for (const auto& o : doc.at("outside_pool")) {
    world.outside_pool.push_back(option_from_json(o, OptionKind::OutsideOption));
  }
  world.availability = doc.at("availability").get<std::vector<double>>();
  if (doc.contains("parametric_outside")) {
    const auto& p = doc.at("parametric_outside");
    ParametricOutside outside;
    outside.mu = p.at("mu");
    outside.sigma = p.at("sigma");
    outside.mean_enrichment = p.at("mean_enrichment").get<std::vector<double>>();
    outside.enrichment_sd = p.value("enrichment_sd", std::vector<double>{});
    world.parametric_outside = std::move(outside);
  }
  world.reset_consumption();
  world.round = doc.value("round", 0);
  const auto& consumed = doc.at("consumed");
  if (consumed.size() != world.users.size()) throw InputError("consumed sets do not match the user count");
  for (std::size_t j = 0; j < consumed.size(); ++j) {
    for (const auto& id : consumed[j]) {
      const std::size_t item = id.get<std::size_t>();
      if (item >= world.items.size()) throw InputError("consumed set references unknown item");
      world.consumed[j][item] = 1;
    }
  }
  world.validate();
  return world;
}

// ---------------------------------------------------------------------------

json to_json(const InteractionRecord& record) {
  json doc = {{"user", record.user},
              {"round", record.round},
              {"slate", record.slate},
              {"chosen", record.chosen == kOutside ? json("OUTSIDE") : json(record.chosen)},
              {"outside_index", record.outside_index},
              {"outside_enrichment", record.outside_enrichment}};
  doc["rating"] = record.rating ? json(*record.rating) : json(nullptr);
  return doc;
}

InteractionRecord record_from_json(const json& doc) {
  InteractionRecord record;
  record.user = doc.at("user");
  record.round = doc.at("round");
  record.slate = doc.at("slate").get<std::vector<ItemId>>();
  const auto& chosen = doc.at("chosen");
  record.chosen = chosen.is_string() ? kOutside : chosen.get<ItemId>();
  if (chosen.is_string() && chosen.get<std::string>() != "OUTSIDE") throw InputError("bad chosen marker");
  record.outside_index = doc.value("outside_index", -1);
  record.outside_enrichment = doc.value("outside_enrichment", 0.0);
  if (doc.contains("rating") && !doc.at("rating").is_null()) record.rating = doc.at("rating").get<double>();
  return record;
}

json log_to_json(const InteractionLog& log) {
  json records = json::array();
  for (const auto& record : log) records.push_back(to_json(record));
  return {{"format", "temptrec.log"}, {"version", kFormatVersion}, {"records", std::move(records)}};
}

InteractionLog log_from_json(const json& doc) {
  check_format(doc, "temptrec.log");
  InteractionLog log;
  for (const auto& r : doc.at("records")) log.push_back(record_from_json(r));
  return log;
}

json to_json(const Dataset& dataset) {
  json ratings = json::array();
  for (const auto& r : dataset.ratings) ratings.push_back({{"user", r.user}, {"item", r.item}, {"rating", r.rating}});
  json interactions = json::array();
  for (const auto& record : dataset.interactions) interactions.push_back(to_json(record));
  return {{"format", "temptrec.dataset"},
          {"version", kFormatVersion},
          {"num_users", dataset.num_users},
          {"num_items", dataset.num_items},
          {"interactions", std::move(interactions)},
          {"ratings", std::move(ratings)}};
}

Dataset dataset_from_json(const json& doc) {
  check_format(doc, "temptrec.dataset");
  Dataset dataset;
  dataset.num_users = doc.at("num_users");
  dataset.num_items = doc.at("num_items");
  for (const auto& r : doc.at("interactions")) dataset.interactions.push_back(record_from_json(r));
  for (const auto& r : doc.at("ratings")) {
    dataset.ratings.push_back({r.at("user").get<UserId>(), r.at("item").get<ItemId>(), r.at("rating").get<double>()});
  }
  return dataset;
}

// ---------------------------------------------------------------------------

json to_json(const TrainConfig& config) {
  return {{"alpha", config.alpha},
          {"learning_rate", config.learning_rate},
          {"final_lr_fraction", config.final_lr_fraction},
          {"epochs", config.epochs},
          {"minibatch_size", config.minibatch_size},
          {"latent_dim", config.latent_dim},
          {"seed", config.seed},
          {"init_scale", config.init_scale},
          {"convergence_tol", config.convergence_tol},
          {"temperature", config.temperature},
          {"l2", config.l2},
          {"l2_universal", config.l2_universal},
          {"freeze_lambda_f", config.freeze_lambda_f},
          {"optimizer", config.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
          {"rating_map", rating_map_to_json(config.rating_map)}};
}

TrainConfig train_config_from_json(const json& doc) {
  TrainConfig config;
  config.alpha = doc.value("alpha", config.alpha);
  config.learning_rate = doc.value("learning_rate", config.learning_rate);
  config.final_lr_fraction = doc.value("final_lr_fraction", config.final_lr_fraction);
  config.epochs = doc.value("epochs", config.epochs);
  config.minibatch_size = doc.value("minibatch_size", config.minibatch_size);
  config.latent_dim = doc.value("latent_dim", config.latent_dim);
  config.seed = doc.value("seed", config.seed);
  config.init_scale = doc.value("init_scale", config.init_scale);
  config.convergence_tol = doc.value("convergence_tol", config.convergence_tol);
  config.temperature = doc.value("temperature", config.temperature);
  config.l2 = doc.value("l2", config.l2);
  config.l2_universal = doc.value("l2_universal", config.l2_universal);
  config.freeze_lambda_f = doc.value("freeze_lambda_f", config.freeze_lambda_f);
  config.optimizer = doc.value("optimizer", std::string("adam")) == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
  if (doc.contains("rating_map")) config.rating_map = rating_map_from_json(doc.at("rating_map"));
  return config;
}

json checkpoint_to_json(const EstimatedModel& model, const TrainConfig& config) {
  json lambda_f = json::array();
  json lambda_c = json::array();
  for (int j = 0; j < model.num_users(); ++j) {
    lambda_f.push_back(model.lambda_f(j));
    lambda_c.push_back(model.lambda_c(j));
  }
  const auto params = model.params();
  return {{"format", "temptrec.model"},
          {"version", kFormatVersion},
          {"num_users", model.num_users()},
          {"num_items", model.num_items()},
          {"dim", model.dim()},
          {"lambda_f_frozen", model.lambda_f_frozen()},
          {"seed", config.seed},
          {"config", to_json(config)},
          {"params", std::vector<double>(params.begin(), params.end())},
          {"expected_outside_enrichment", model.expected_outside_enrichment},
          {"derived", {{"lambda_f", std::move(lambda_f)},
                       {"lambda_c", std::move(lambda_c)},
                       {"mu", model.mu()},
                       {"sigma", model.sigma()}}}};
}

EstimatedModel model_from_checkpoint(const json& doc, TrainConfig* config) {
  check_format(doc, "temptrec.model");
  EstimatedModel model(doc.at("num_users"), doc.at("num_items"), doc.at("dim"), doc.at("lambda_f_frozen"));
  const auto params = doc.at("params").get<std::vector<double>>();
  if (params.size() != model.params().size()) throw InputError("checkpoint parameter block has the wrong size");
  std::copy(params.begin(), params.end(), model.params().begin());
  model.expected_outside_enrichment = doc.at("expected_outside_enrichment").get<std::vector<double>>();
  if (config) *config = train_config_from_json(doc.at("config"));
  model.check_invariants();
  return model;
}

// ---------------------------------------------------------------------------

json to_json(const MetricsReport& report) {
  json results = json::array();
  for (const auto& r : report.results) {
    results.push_back({{"policy", std::string(to_string(r.policy))},
                       {"overall_individual_enrichment", {{"mean", r.mean}, {"std", r.std},
                                                          {"per_replication", r.per_replication}}},
                       {"consumption", {{"count", r.histogram.total},
                                        {"mean_enrichment", r.histogram.mean_u()},
                                        {"mean_temptation", r.histogram.mean_v()}}}});
  }
  return {{"format", "temptrec.report"},
          {"version", kFormatVersion},
          {"scenario", report.scenario},
          {"info_level", std::string(to_string(report.info))},
          {"metadata", report.metadata},
          {"runtime_seconds", report.runtime_seconds},
          {"results", std::move(results)}};
}

void write_report_csv(std::ostream& out, const MetricsReport& report, bool header) {
  if (header) out << "scenario,info_level,policy,replication,metric,value\n";
  out.precision(17);
  const std::string prefix = report.scenario + "," + std::string(to_string(report.info)) + ",";
  for (const auto& r : report.results) {
    const std::string policy = std::string(to_string(r.policy));
    for (std::size_t rep = 0; rep < r.per_replication.size(); ++rep) {
      out << prefix << policy << "," << rep << ",overall_individual_enrichment," << r.per_replication[rep] << "\n";
    }
    out << prefix << policy << ",all,overall_individual_enrichment_mean," << r.mean << "\n";
    out << prefix << policy << ",all,overall_individual_enrichment_std," << r.std << "\n";
    out << prefix << policy << ",all,mean_consumed_enrichment," << r.histogram.mean_u() << "\n";
    out << prefix << policy << ",all,mean_consumed_temptation," << r.histogram.mean_v() << "\n";
    out << prefix << policy << ",all,on_platform_consumptions," << r.histogram.total << "\n";
  }
}

void write_histogram_csv(std::ostream& out, const MetricsReport& report) {
  out << "policy,u_lo,u_hi,v_lo,v_hi,count\n";
  for (const auto& r : report.results) {
    const auto& b = r.histogram.bins;
    const double du = (b.u_max - b.u_min) / b.u_bins;
    const double dv = (b.v_max - b.v_min) / b.v_bins;
    for (int iu = 0; iu < b.u_bins; ++iu) {
      for (int iv = 0; iv < b.v_bins; ++iv) {
        out << to_string(r.policy) << "," << b.u_min + iu * du << "," << b.u_min + (iu + 1) * du << ","
            << b.v_min + iv * dv << "," << b.v_min + (iv + 1) * dv << "," << r.histogram.at(iu, iv) << "\n";
      }
    }
  }
}

}  // namespace temptrec
