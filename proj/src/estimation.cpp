#include "temptrec/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "temptrec/errors.hpp"
#include "temptrec/rng.hpp"

namespace temptrec {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// temperature * log(1 + exp(z / temperature)), overflow-safe.
double softplus(double z, double temperature) {
  const double t = z / temperature;
  if (t > 30.0) return z;
  return temperature * std::log1p(std::exp(t));
}

constexpr std::uint64_t kInitStream = 0x696e6974;     // "init"
constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"

// Gradient bookkeeping for one (user, item) pair of the factor model.
struct PairView {
  const EstimatedModel& model;
  UserId user;
  ItemId item;
  double u = 0.0;
  double v = 0.0;

  PairView(const EstimatedModel& m, UserId j, ItemId i) : model(m), user(j), item(i) {
    u = m.enrichment(j, i);
    v = m.temptation(j, i);
  }

  // gradient += coef_u * d(u)/d(params) + coef_v * d(v)/d(params)
  void accumulate(std::span<double> gradient, double coef_u, double coef_v) const {
    const auto params = model.params();
    const int d = model.dim();
    const std::size_t uo = model.user_offset(user);
    const std::size_t io = model.item_offset(item);
    const std::size_t a_base = uo;
    const std::size_t b_base = uo + static_cast<std::size_t>(d - 1);
    const std::size_t x_base = io;
    const std::size_t y_base = io + static_cast<std::size_t>(d);
    // component 0: a_0 = b_0 = 1 are constants
    gradient[x_base] += coef_u;
    gradient[y_base] += coef_v;
    for (int k = 1; k < d; ++k) {
      const double a_k = params[a_base + k - 1];
      const double b_k = params[b_base + k - 1];
      gradient[a_base + k - 1] += coef_u * params[x_base + k];
      gradient[b_base + k - 1] += coef_v * params[y_base + k];
      gradient[x_base + k] += coef_u * a_k;
      gradient[y_base + k] += coef_v * b_k;
    }
  }
};

// d(lambda)/d(theta) for one user.
struct LambdaJacobian {
  double lambda_f = 1.0;
  double lambda_c = 0.0;
  double df_dthf = 0.0;
  double dc_dthf = 0.0;
  double dc_dthc = 0.0;

  LambdaJacobian(const EstimatedModel& model, UserId user) {
    const auto params = model.params();
    const std::size_t base = model.user_offset(user) + 2 * static_cast<std::size_t>(model.dim() - 1);
    const double s = sigmoid(params[base + 1]);
    if (!model.lambda_f_frozen()) {
      lambda_f = sigmoid(params[base]);
      df_dthf = lambda_f * (1.0 - lambda_f);
    }
    lambda_c = lambda_f * s;
    dc_dthf = s * df_dthf;
    dc_dthc = lambda_f * s * (1.0 - s);
  }

  void accumulate(const EstimatedModel& model, UserId user, std::span<double> gradient, double d_lambda_f,
                  double d_lambda_c) const {
    const std::size_t base = model.user_offset(user) + 2 * static_cast<std::size_t>(model.dim() - 1);
    gradient[base] += d_lambda_f * df_dthf + d_lambda_c * dc_dthf;
    gradient[base + 1] += d_lambda_c * dc_dthc;
  }
};

// Loss (and optionally gradient) of one rating observation, scaled by `weight`.
double rating_term(const EstimatedModel& model, const RatingObservation& obs, const RatingMap& f_rating,
                   double weight, std::span<double> gradient) {
  const PairView pair(model, obs.user, obs.item);
  const LambdaJacobian lam(model, obs.user);
  const double score = mix_scores(lam.lambda_f, pair.u, pair.v);
  const double residual = f_rating(score) - obs.rating;
  if (!gradient.empty()) {
    const double d_score = 2.0 * weight * residual * f_rating.derivative(score);
    pair.accumulate(gradient, d_score * lam.lambda_f, d_score * (1.0 - lam.lambda_f));
    lam.accumulate(model, obs.user, gradient, d_score * (pair.u - pair.v), 0.0);
  }
  return weight * residual * residual;
}

// Click loss of one round. temperature <= 0 means the exact hinge (no gradient).
double click_term(const EstimatedModel& model, const InteractionRecord& round, double temperature, double weight,
                  std::span<double> gradient) {
  const UserId user = round.user;
  const LambdaJacobian lam(model, user);
  const double mu = model.mu();

  std::vector<PairView> pairs;
  pairs.reserve(round.slate.size());
  double chosen_score = mu;
  std::size_t chosen_pos = round.slate.size();
  for (std::size_t pos = 0; pos < round.slate.size(); ++pos) {
    pairs.emplace_back(model, user, round.slate[pos]);
    if (round.slate[pos] == round.chosen) chosen_pos = pos;
  }
  auto score_of = [&](const PairView& p) { return mix_scores(lam.lambda_c, p.u, p.v); };
  if (round.chosen != kOutside) {
    if (chosen_pos == round.slate.size()) throw InputError("chosen item not in its slate");
    chosen_score = score_of(pairs[chosen_pos]);
  }

  const bool smooth = temperature > 0.0;
  auto hinge = [&](double z) { return smooth ? softplus(z, temperature) : std::max(0.0, z); };
  auto hinge_slope = [&](double z) { return sigmoid(z / temperature); };

  double loss = 0.0;
  double chosen_coef = 0.0;  // dL/dC(chosen)
  std::vector<double> coefs(pairs.size(), 0.0);
  double mu_coef = 0.0;
  for (std::size_t pos = 0; pos < pairs.size(); ++pos) {
    if (pos == chosen_pos) continue;
    const double z = score_of(pairs[pos]) - chosen_score;
    loss += hinge(z);
    if (smooth && !gradient.empty()) {
      const double g = weight * hinge_slope(z);
      coefs[pos] += g;
      chosen_coef -= g;
    }
  }
  if (round.chosen != kOutside) {
    const double z = mu - chosen_score;
    loss += hinge(z);
    if (smooth && !gradient.empty()) {
      const double g = weight * hinge_slope(z);
      mu_coef += g;
      chosen_coef -= g;
    }
  }

  if (smooth && !gradient.empty()) {
    if (chosen_pos < pairs.size()) {
      coefs[chosen_pos] += chosen_coef;
    } else {
      mu_coef += chosen_coef;
    }
    double d_lambda_c = 0.0;
    for (std::size_t pos = 0; pos < pairs.size(); ++pos) {
      const double g = coefs[pos];
      if (g == 0.0) continue;
      pairs[pos].accumulate(gradient, g * lam.lambda_c, g * (1.0 - lam.lambda_c));
      d_lambda_c += g * (pairs[pos].u - pairs[pos].v);
    }
    lam.accumulate(model, user, gradient, 0.0, d_lambda_c);
    gradient[model.mu_offset()] += mu_coef;
  }
  return weight * loss;
}

// Ridge over the non-universal latent components k >= 1.
double ridge_term(const EstimatedModel& model, double l2, std::span<double> gradient) {
  if (l2 <= 0.0) return 0.0;
  const auto params = model.params();
  double total = 0.0;
  const std::size_t latent_per_user = 2 * static_cast<std::size_t>(model.dim() - 1);
  auto visit = [&](std::size_t index) {
    total += params[index] * params[index];
    if (!gradient.empty()) gradient[index] += 2.0 * l2 * params[index];
  };
  for (int j = 0; j < model.num_users(); ++j) {
    for (std::size_t k = 0; k < latent_per_user; ++k) visit(model.user_offset(j) + k);
  }
  for (int i = 0; i < model.num_items(); ++i) {
    const std::size_t x_base = model.item_offset(i);
    const std::size_t y_base = x_base + static_cast<std::size_t>(model.dim());
    for (int k = 1; k < model.dim(); ++k) {
      visit(x_base + k);
      visit(y_base + k);
    }
  }
  return l2 * total;
}

// Shrinks each item's universal components toward their across-item means.
double universal_shrinkage_term(const EstimatedModel& model, double weight, std::span<double> gradient) {
  if (weight <= 0.0 || model.num_items() == 0) return 0.0;
  const auto params = model.params();
  const auto dim = static_cast<std::size_t>(model.dim());
  double total = 0.0;
  for (std::size_t offset : {std::size_t{0}, dim}) {
    double mean = 0.0;
    for (int i = 0; i < model.num_items(); ++i) mean += params[model.item_offset(i) + offset];
    mean /= model.num_items();
    for (int i = 0; i < model.num_items(); ++i) {
      const std::size_t index = model.item_offset(i) + offset;
      const double dev = params[index] - mean;
      total += dev * dev;
      if (!gradient.empty()) gradient[index] += 2.0 * weight * dev;
    }
  }
  return weight * total;
}

double mean_of(const std::vector<double>& values) {
  return values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / values.size();
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (values.size() - 1));
}

// Adam / plain SGD update over a dense parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::size_t size, double learning_rate)
      : kind_(kind), learning_rate_(learning_rate), first_(size, 0.0), second_(size, 0.0) {}

  void set_learning_rate(double value) { learning_rate_ = value; }

  void step(std::span<double> params, std::span<const double> gradient) {
    if (kind_ == OptimizerKind::Sgd) {
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= learning_rate_ * gradient[k];
      return;
    }
    ++steps_;
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    const double correction1 = 1.0 - std::pow(kBeta1, steps_);
    const double correction2 = 1.0 - std::pow(kBeta2, steps_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double g = gradient[k];
      if (g == 0.0 && first_[k] == 0.0) continue;
      first_[k] = kBeta1 * first_[k] + (1.0 - kBeta1) * g;
      second_[k] = kBeta2 * second_[k] + (1.0 - kBeta2) * g * g;
      params[k] -= learning_rate_ * (first_[k] / correction1) / (std::sqrt(second_[k] / correction2) + kEps);
    }
  }

 private:
  OptimizerKind kind_;
  double learning_rate_;
  std::vector<double> first_;
  std::vector<double> second_;
  long steps_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Dataset / config

Dataset Dataset::from_log(const InteractionLog& log, int num_users, int num_items) {
  Dataset data;
  data.num_users = num_users;
  data.num_items = num_items;
  data.interactions = log;
  for (const auto& record : log) {
    if (record.chosen != kOutside && record.rating) {
      data.ratings.push_back({record.user, record.chosen, *record.rating});
    }
  }
  return data;
}

void Dataset::validate() const {
  if (interactions.empty()) throw InputError("dataset has no interactions");
  std::vector<std::vector<char>> chosen(num_users);
  for (const auto& record : interactions) {
    if (record.user < 0 || record.user >= num_users) {
      throw InputError("interaction references unknown user " + std::to_string(record.user));
    }
    for (ItemId item : record.slate) {
      if (item < 0 || item >= num_items) throw InputError("slate references unknown item " + std::to_string(item));
    }
    if (record.chosen != kOutside) {
      if (std::find(record.slate.begin(), record.slate.end(), record.chosen) == record.slate.end()) {
        throw InputError("chosen item " + std::to_string(record.chosen) + " is not in its slate");
      }
      auto& row = chosen[record.user];
      if (row.empty()) row.assign(num_items, 0);
      row[record.chosen] = 1;
    }
  }
  for (const auto& rating : ratings) {
    if (rating.user < 0 || rating.user >= num_users || rating.item < 0 || rating.item >= num_items ||
        chosen[rating.user].empty() || !chosen[rating.user][rating.item]) {
      throw InputError("rating (" + std::to_string(rating.user) + ", " + std::to_string(rating.item) +
                       ") has no matching on-platform choice");
    }
  }
}

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) throw ConfigError("final_lr_fraction must lie in (0, 1]");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (minibatch_size < 1) throw ConfigError("minibatch_size must be >= 1");
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be > 0");
  if (!(convergence_tol > 0.0)) throw ConfigError("convergence_tol must be > 0");
  if (l2 < 0.0) throw ConfigError("l2 must be >= 0");
  if (l2_universal < 0.0) throw ConfigError("l2_universal must be >= 0");
}

// ---------------------------------------------------------------------------
// EstimatedModel

EstimatedModel::EstimatedModel(int num_users, int num_items, int dim, bool freeze_lambda_f)
    : num_users_(num_users), num_items_(num_items), dim_(dim), freeze_lambda_f_(freeze_lambda_f) {
  if (num_users < 0 || num_items < 0 || dim < 1) throw ConfigError("invalid model shape");
  params_.assign(static_cast<std::size_t>(num_users) * user_block() +
                     static_cast<std::size_t>(num_items) * item_block() + 2,
                 0.0);
  expected_outside_enrichment.assign(num_users, 0.0);
}

LatentVector EstimatedModel::a_hat(UserId user) const {
  LatentVector out(dim_, 1.0);
  const std::size_t base = user_offset(user);
  for (int k = 1; k < dim_; ++k) out[k] = params_[base + k - 1];
  return out;
}

LatentVector EstimatedModel::b_hat(UserId user) const {
  LatentVector out(dim_, 1.0);
  const std::size_t base = user_offset(user) + static_cast<std::size_t>(dim_ - 1);
  for (int k = 1; k < dim_; ++k) out[k] = params_[base + k - 1];
  return out;
}

LatentVector EstimatedModel::x_hat(ItemId item) const {
  const std::size_t base = item_offset(item);
  return LatentVector(params_.begin() + base, params_.begin() + base + dim_);
}

LatentVector EstimatedModel::y_hat(ItemId item) const {
  const std::size_t base = item_offset(item) + dim_;
  return LatentVector(params_.begin() + base, params_.begin() + base + dim_);
}

double EstimatedModel::lambda_f(UserId user) const {
  if (freeze_lambda_f_) return 1.0;
  return sigmoid(params_[user_offset(user) + 2 * static_cast<std::size_t>(dim_ - 1)]);
}

double EstimatedModel::lambda_c(UserId user) const {
  return lambda_f(user) * sigmoid(params_[user_offset(user) + 2 * static_cast<std::size_t>(dim_ - 1) + 1]);
}

double EstimatedModel::sigma() const { return std::exp(params_[log_sigma_offset()]); }

void EstimatedModel::set_sigma(double value) {
  if (!(value > 0.0)) throw ConfigError("sigma must be > 0");
  params_[log_sigma_offset()] = std::log(value);
}

void EstimatedModel::set_lambdas(UserId user, double lambda_f_value, double lambda_c_value) {
  if (!(lambda_c_value >= 0.0 && lambda_c_value <= lambda_f_value && lambda_f_value <= 1.0)) {
    throw ConfigError("lambdas must satisfy 0 <= lambda_c <= lambda_f <= 1");
  }
  const std::size_t base = user_offset(user) + 2 * static_cast<std::size_t>(dim_ - 1);
  static constexpr double kEdge = 1e-12;
  auto clamp_p = [](double p) { return std::clamp(p, kEdge, 1.0 - kEdge); };
  double effective_f = 1.0;
  if (!freeze_lambda_f_) {
    params_[base] = logit(clamp_p(lambda_f_value));
    effective_f = lambda_f(user);
  }
  params_[base + 1] = logit(clamp_p(lambda_c_value / effective_f));
}

void EstimatedModel::set_user_vectors(UserId user, const LatentVector& a, const LatentVector& b) {
  if (static_cast<int>(a.size()) != dim_ || static_cast<int>(b.size()) != dim_) {
    throw ConfigError("user vectors have the wrong dimension");
  }
  const std::size_t base = user_offset(user);
  for (int k = 1; k < dim_; ++k) {
    params_[base + k - 1] = a[k];
    params_[base + (dim_ - 1) + k - 1] = b[k];
  }
}

void EstimatedModel::set_item_vectors(ItemId item, const LatentVector& x, const LatentVector& y) {
  if (static_cast<int>(x.size()) != dim_ || static_cast<int>(y.size()) != dim_) {
    throw ConfigError("item vectors have the wrong dimension");
  }
  const std::size_t base = item_offset(item);
  std::copy(x.begin(), x.end(), params_.begin() + base);
  std::copy(y.begin(), y.end(), params_.begin() + base + dim_);
}

double EstimatedModel::dot_user_item(std::size_t user_base, std::size_t item_base) const {
  double total = params_[item_base];
  for (int k = 1; k < dim_; ++k) total += params_[user_base + k - 1] * params_[item_base + k];
  return total;
}

double EstimatedModel::enrichment(UserId user, ItemId item) const {
  return dot_user_item(user_offset(user), item_offset(item));
}

double EstimatedModel::temptation(UserId user, ItemId item) const {
  return dot_user_item(user_offset(user) + (dim_ - 1), item_offset(item) + dim_);
}

double EstimatedModel::choice_score(UserId user, ItemId item) const {
  return mix_scores(lambda_c(user), enrichment(user, item), temptation(user, item));
}

double EstimatedModel::feedback_score(UserId user, ItemId item) const {
  return mix_scores(lambda_f(user), enrichment(user, item), temptation(user, item));
}

void EstimatedModel::check_invariants() const {
  for (int j = 0; j < num_users_; ++j) {
    const double lf = lambda_f(j);
    const double lc = lambda_c(j);
    if (!(lc >= 0.0 && lc <= lf && lf <= 1.0)) {
      throw ConfigError("estimated lambdas out of order for user " + std::to_string(j));
    }
  }
  if (!(sigma() > 0.0)) throw ConfigError("estimated sigma must be > 0");
  for (double p : params_) {
    if (!std::isfinite(p)) throw ConfigError("estimated model has non-finite parameters");
  }
}

// ---------------------------------------------------------------------------
// Losses

double rating_loss(const EstimatedModel& model, std::span<const RatingObservation> ratings,
                   const RatingMap& f_rating) {
  double total = 0.0;
  for (const auto& obs : ratings) total += rating_term(model, obs, f_rating, 1.0, {});
  return total;
}

double click_loss(const EstimatedModel& model, std::span<const InteractionRecord> interactions) {
  double total = 0.0;
  for (const auto& round : interactions) total += click_term(model, round, 0.0, 1.0, {});
  return total;
}

double total_loss(const EstimatedModel& model, const Dataset& dataset, const TrainConfig& config) {
  return config.alpha * rating_loss(model, dataset.ratings, config.rating_map) +
         config.beta() * click_loss(model, dataset.interactions);
}

double surrogate_loss(const EstimatedModel& model, const Dataset& dataset, const TrainConfig& config,
                      double temperature, std::span<double> gradient) {
  if (!(temperature > 0.0)) throw ConfigError("surrogate temperature must be > 0");
  if (!gradient.empty()) {
    if (gradient.size() != model.params().size()) throw ConfigError("gradient buffer has the wrong size");
    std::fill(gradient.begin(), gradient.end(), 0.0);
  }
  double total = 0.0;
  if (config.alpha > 0.0) {
    for (const auto& obs : dataset.ratings) total += rating_term(model, obs, config.rating_map, config.alpha, gradient);
  }
  if (config.beta() > 0.0) {
    for (const auto& round : dataset.interactions) {
      total += click_term(model, round, temperature, config.beta(), gradient);
    }
  }
  total += ridge_term(model, config.l2, gradient);
  total += universal_shrinkage_term(model, config.l2_universal, gradient);
  return total;
}

double resolve_temperature(const Dataset& dataset, const TrainConfig& config) {
  if (config.temperature > 0.0) return config.temperature;
  std::vector<double> values;
  values.reserve(dataset.ratings.size());
  for (const auto& obs : dataset.ratings) values.push_back(obs.rating);
  const double scale = sample_std(values);
  return 0.05 * (scale > 0.0 ? scale : 1.0);
}

double gradient_descent_step(EstimatedModel& model, const Dataset& dataset, const TrainConfig& config,
                             double temperature, double step_size) {
  std::vector<double> gradient(model.params().size());
  const double loss = surrogate_loss(model, dataset, config, temperature, gradient);
  auto params = model.params();
  for (std::size_t k = 0; k < params.size(); ++k) params[k] -= step_size * gradient[k];
  return loss;
}

// ---------------------------------------------------------------------------
// Fitting

double estimate_outside_sigma(const EstimatedModel& model, std::span<const InteractionRecord> interactions) {
  std::vector<double> thresholds;
  for (const auto& round : interactions) {
    if (round.chosen != kOutside || round.slate.empty()) continue;
    double best = -INFINITY;
    for (ItemId item : round.slate) best = std::max(best, model.choice_score(round.user, item));
    thresholds.push_back(best);
  }
  return sample_std(thresholds);
}

EstimatedModel fit(const Dataset& dataset, const TrainConfig& config,
                   const std::vector<double>& expected_outside_enrichment, FitDiagnostics* diagnostics) {
  config.validate();
  dataset.validate();
  if (static_cast<int>(expected_outside_enrichment.size()) != dataset.num_users) {
    throw InputError("need one expected outside enrichment per user");
  }

  EstimatedModel model(dataset.num_users, dataset.num_items, config.latent_dim, config.freeze_lambda_f);
  model.expected_outside_enrichment = expected_outside_enrichment;

  Rng init_rng = Rng(config.seed).substream(kInitStream);
  for (int j = 0; j < dataset.num_users; ++j) {
    LatentVector a(config.latent_dim, 1.0);
    LatentVector b(config.latent_dim, 1.0);
    for (int k = 1; k < config.latent_dim; ++k) a[k] = init_rng.normal(0.0, config.init_scale);
    for (int k = 1; k < config.latent_dim; ++k) b[k] = init_rng.normal(0.0, config.init_scale);
    model.set_user_vectors(j, a, b);
    model.set_lambdas(j, config.freeze_lambda_f ? 1.0 : 0.75, 0.25);
  }
  for (int i = 0; i < dataset.num_items; ++i) {
    LatentVector x(config.latent_dim);
    LatentVector y(config.latent_dim);
    for (double& c : x) c = init_rng.normal(0.0, config.init_scale);
    for (double& c : y) c = init_rng.normal(0.0, config.init_scale);
    model.set_item_vectors(i, x, y);
  }
  {
    std::vector<double> outside_slate_scores;
    for (const auto& round : dataset.interactions) {
      if (round.chosen != kOutside) continue;
      for (ItemId item : round.slate) outside_slate_scores.push_back(model.choice_score(round.user, item));
    }
    model.set_mu(mean_of(outside_slate_scores));
    model.set_sigma(1.0);
  }

  const double temperature = resolve_temperature(dataset, config);

  // Terms: ratings first (index < R), then rounds.
  const std::size_t num_ratings = config.alpha > 0.0 ? dataset.ratings.size() : 0;
  const std::size_t num_rounds = config.beta() > 0.0 ? dataset.interactions.size() : 0;
  std::vector<std::size_t> order(num_ratings + num_rounds);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (order.empty()) throw InputError("nothing to fit: no ratings and no click weight");

  Rng shuffle_rng = Rng(config.seed).substream(kShuffleStream);
  Optimizer optimizer(config.optimizer, model.params().size(), config.learning_rate);
  std::vector<double> gradient(model.params().size());
  const double ridge_share = 1.0 / static_cast<double>(order.size());

  FitDiagnostics diag;
  double previous = INFINITY;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double progress = config.epochs > 1 ? static_cast<double>(epoch) / (config.epochs - 1) : 0.0;
    optimizer.set_learning_rate(config.learning_rate * std::pow(config.final_lr_fraction, progress));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.minibatch_size) {
      const std::size_t stop = std::min(order.size(), start + config.minibatch_size);
      std::fill(gradient.begin(), gradient.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t term = order[k];
        if (term < num_ratings) {
          batch_loss += rating_term(model, dataset.ratings[term], config.rating_map, config.alpha, gradient);
        } else {
          batch_loss += click_term(model, dataset.interactions[term - num_ratings], temperature, config.beta(),
                                   gradient);
        }
      }
      const double batch_share = ridge_share * static_cast<double>(stop - start);
      batch_loss += ridge_term(model, config.l2 * batch_share, gradient);
      batch_loss += universal_shrinkage_term(model, config.l2_universal * batch_share, gradient);
      epoch_loss += batch_loss;
      optimizer.step(model.params(), gradient);
    }
    diag.epochs_run = epoch + 1;
    if (!std::isfinite(epoch_loss)) {
      std::ostringstream msg;
      msg << "training diverged at epoch " << epoch << " (surrogate loss " << epoch_loss
          << ", learning_rate " << config.learning_rate << ", temperature " << temperature << ")";
      throw TrainingError(msg.str());
    }
    diag.final_surrogate = epoch_loss;
    if (std::isfinite(previous) && std::abs(previous - epoch_loss) <= config.convergence_tol * std::max(1.0, std::abs(previous))) {
      diag.converged = true;
      break;
    }
    previous = epoch_loss;
  }

  const double sigma = estimate_outside_sigma(model, dataset.interactions);
  model.set_sigma(sigma > 0.0 ? sigma : 1.0);
  model.check_invariants();
  diag.final_total_loss = total_loss(model, dataset, config);
  if (diagnostics) *diagnostics = diag;
  return model;
}

// ---------------------------------------------------------------------------
// Queries

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double choice_probability(const EstimatedModel& model, UserId user, ItemId item) {
  return standard_normal_cdf((model.choice_score(user, item) - model.mu()) / model.sigma());
}

std::pair<double, double> recover_scores(const EstimatedModel& model, UserId user, ItemId item) {
  return {model.enrichment(user, item), model.temptation(user, item)};
}

ItemId predict_choice(const EstimatedModel& model, const InteractionRecord& round) {
  ItemId best = kOutside;
  double best_score = -INFINITY;
  for (ItemId item : round.slate) {
    const double score = model.choice_score(round.user, item);
    if (score > best_score || (score == best_score && item < best)) {
      best = item;
      best_score = score;
    }
  }
  if (best == kOutside || model.mu() > best_score) return kOutside;
  return best;
}

// ---------------------------------------------------------------------------
// RatingFactorization

RatingFactorization::RatingFactorization(int num_users, int num_items, int dim)
    : num_users_(num_users),
      num_items_(num_items),
      dim_(dim),
      user_bias_(num_users, 0.0),
      item_bias_(num_items, 0.0),
      user_factors_(static_cast<std::size_t>(num_users) * dim, 0.0),
      item_factors_(static_cast<std::size_t>(num_items) * dim, 0.0) {}

double RatingFactorization::predict(UserId user, ItemId item) const {
  double total = global_mean_ + user_bias_[user] + item_bias_[item];
  for (int k = 0; k < dim_; ++k) {
    total += user_factors_[static_cast<std::size_t>(user) * dim_ + k] *
             item_factors_[static_cast<std::size_t>(item) * dim_ + k];
  }
  return total;
}

RatingFactorization RatingFactorization::train(std::span<const RatingObservation> ratings, int num_users,
                                               int num_items, const TrainConfig& config) {
  config.validate();
  RatingFactorization model(num_users, num_items, config.latent_dim);
  if (ratings.empty()) return model;
  double sum = 0.0;
  for (const auto& obs : ratings) sum += obs.rating;
  model.global_mean_ = sum / static_cast<double>(ratings.size());

  Rng init_rng = Rng(config.seed).substream(kInitStream, 1);
  for (double& v : model.user_factors_) v = init_rng.normal(0.0, config.init_scale);
  for (double& v : model.item_factors_) v = init_rng.normal(0.0, config.init_scale);

  // Parameters packed as [user_bias | item_bias | user_factors | item_factors].
  const std::size_t nu = model.user_bias_.size();
  const std::size_t ni = model.item_bias_.size();
  const std::size_t nuf = model.user_factors_.size();
  const std::size_t nif = model.item_factors_.size();
  std::vector<double> params;
  params.reserve(nu + ni + nuf + nif);
  params.insert(params.end(), model.user_bias_.begin(), model.user_bias_.end());
  params.insert(params.end(), model.item_bias_.begin(), model.item_bias_.end());
  params.insert(params.end(), model.user_factors_.begin(), model.user_factors_.end());
  params.insert(params.end(), model.item_factors_.begin(), model.item_factors_.end());
  const int d = config.latent_dim;
  auto uf = [&](UserId j) { return nu + ni + static_cast<std::size_t>(j) * d; };
  auto itf = [&](ItemId i) { return nu + ni + nuf + static_cast<std::size_t>(i) * d; };

  std::vector<std::size_t> order(ratings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng = Rng(config.seed).substream(kShuffleStream, 1);
  Optimizer optimizer(config.optimizer, params.size(), config.learning_rate);
  std::vector<double> gradient(params.size());
  const double l2_share = config.l2 / static_cast<double>(ratings.size());

  double previous = INFINITY;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double progress = config.epochs > 1 ? static_cast<double>(epoch) / (config.epochs - 1) : 0.0;
    optimizer.set_learning_rate(config.learning_rate * std::pow(config.final_lr_fraction, progress));
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.minibatch_size) {
      const std::size_t stop = std::min(order.size(), start + config.minibatch_size);
      std::fill(gradient.begin(), gradient.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& obs = ratings[order[k]];
        double pred = model.global_mean_ + params[obs.user] + params[nu + obs.item];
        for (int c = 0; c < d; ++c) pred += params[uf(obs.user) + c] * params[itf(obs.item) + c];
        const double residual = pred - obs.rating;
        epoch_loss += residual * residual;
        const double g = 2.0 * residual;
        gradient[obs.user] += g;
        gradient[nu + obs.item] += g;
        for (int c = 0; c < d; ++c) {
          gradient[uf(obs.user) + c] += g * params[itf(obs.item) + c];
          gradient[itf(obs.item) + c] += g * params[uf(obs.user) + c];
        }
      }
      const double ridge = l2_share * static_cast<double>(stop - start);
      for (std::size_t k = 0; k < params.size(); ++k) gradient[k] += 2.0 * ridge * params[k];
      optimizer.step(params, gradient);
    }
    if (!std::isfinite(epoch_loss)) throw TrainingError("rating factorization diverged at epoch " + std::to_string(epoch));
    if (std::isfinite(previous) && std::abs(previous - epoch_loss) <= config.convergence_tol * std::max(1.0, std::abs(previous))) break;
    previous = epoch_loss;
  }

  std::copy(params.begin(), params.begin() + nu, model.user_bias_.begin());
  std::copy(params.begin() + nu, params.begin() + nu + ni, model.item_bias_.begin());
  std::copy(params.begin() + nu + ni, params.begin() + nu + ni + nuf, model.user_factors_.begin());
  std::copy(params.begin() + nu + ni + nuf, params.end(), model.item_factors_.begin());
  return model;
}

}  // namespace temptrec
