#pragma once

// Joint estimation of enrichment/temptation factors, feedback and choice
// parameters and the outside-option score distribution from rating and click
// logs, by minibatch stochastic gradient descent.
//
// Constraints hold by construction:
//   lambda_f = sigmoid(theta_f)                (or frozen at 1)
//   lambda_c = lambda_f * sigmoid(theta_c)     so 0 <= lambda_c <= lambda_f <= 1
//   sigma    = exp(log_sigma)
//   a[0] = b[0] = 1 are constants, not parameters.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "temptrec/core_model.hpp"

namespace temptrec {

struct RatingObservation {
  UserId user = 0;
  ItemId item = 0;
  double rating = 0.0;
};

struct Dataset {
  int num_users = 0;
  int num_items = 0;
  std::vector<InteractionRecord> interactions;
  std::vector<RatingObservation> ratings;

  // Collects the ratings carried by on-platform choices in `log`.
  static Dataset from_log(const InteractionLog& log, int num_users, int num_items);
  // Throws InputError when a rating has no matching on-platform choice or ids are out of range.
  void validate() const;
};

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double alpha = 0.5;  // rating weight; click weight is 1 - alpha
  double learning_rate = 0.02;
  // Learning rate decays geometrically to learning_rate * final_lr_fraction at the last epoch.
  double final_lr_fraction = 0.05;
  int epochs = 600;
  int minibatch_size = 128;
  int latent_dim = 3;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  double convergence_tol = 1e-7;
  // Softplus temperature for the training surrogate of the click hinge.
  // <= 0 selects 0.05 * (std of observed ratings).
  double temperature = 0.0;
  double l2 = 0.1;  // ridge on latent components k >= 1, surrogate only
  // Pulls item x_0, y_0 toward their across-item means, surrogate only.
  double l2_universal = 0.003;
  bool freeze_lambda_f = false;
  OptimizerKind optimizer = OptimizerKind::Adam;
  RatingMap rating_map;

  double beta() const { return 1.0 - alpha; }
  void validate() const;
};

class EstimatedModel {
 public:
  EstimatedModel() = default;
  EstimatedModel(int num_users, int num_items, int dim, bool freeze_lambda_f = false);

  int num_users() const { return num_users_; }
  int num_items() const { return num_items_; }
  int dim() const { return dim_; }
  bool lambda_f_frozen() const { return freeze_lambda_f_; }

  LatentVector a_hat(UserId user) const;
  LatentVector b_hat(UserId user) const;
  LatentVector x_hat(ItemId item) const;
  LatentVector y_hat(ItemId item) const;
  double lambda_f(UserId user) const;
  double lambda_c(UserId user) const;
  double mu() const { return params_[mu_offset()]; }
  double sigma() const;

  double enrichment(UserId user, ItemId item) const;
  double temptation(UserId user, ItemId item) const;
  double choice_score(UserId user, ItemId item) const;
  double feedback_score(UserId user, ItemId item) const;

  // Flat parameter vector. Layout per user: [a_1..a_{d-1}, b_1..b_{d-1}, theta_f, theta_c];
  // per item: [x_0..x_{d-1}, y_0..y_{d-1}]; then mu, log_sigma.
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::size_t user_offset(UserId user) const { return static_cast<std::size_t>(user) * user_block(); }
  std::size_t item_offset(ItemId item) const {
    return static_cast<std::size_t>(num_users_) * user_block() + static_cast<std::size_t>(item) * item_block();
  }
  std::size_t mu_offset() const { return item_offset(num_items_); }
  std::size_t log_sigma_offset() const { return mu_offset() + 1; }
  std::size_t user_block() const { return 2 * static_cast<std::size_t>(dim_ - 1) + 2; }
  std::size_t item_block() const { return 2 * static_cast<std::size_t>(dim_); }

  void set_mu(double value) { params_[mu_offset()] = value; }
  void set_sigma(double value);
  // Sets theta_f/theta_c so that the model reports these lambdas.
  void set_lambdas(UserId user, double lambda_f, double lambda_c);
  void set_user_vectors(UserId user, const LatentVector& a, const LatentVector& b);
  void set_item_vectors(ItemId item, const LatentVector& x, const LatentVector& y);

  // Survey-style input: per-user E[u(o)], never fitted.
  std::vector<double> expected_outside_enrichment;

  // Throws ConfigError when an invariant does not hold.
  void check_invariants() const;

 private:
  double dot_user_item(std::size_t user_base, std::size_t item_base) const;

  int num_users_ = 0;
  int num_items_ = 0;
  int dim_ = 1;
  bool freeze_lambda_f_ = false;
  std::vector<double> params_;
};

double rating_loss(const EstimatedModel& model, std::span<const RatingObservation> ratings,
                   const RatingMap& f_rating);
// Exact hinge: sum over rounds and non-chosen options of max(0, C(option) - C(chosen)),
// with mu standing in for the outside option's score.
double click_loss(const EstimatedModel& model, std::span<const InteractionRecord> interactions);
double total_loss(const EstimatedModel& model, const Dataset& dataset, const TrainConfig& config);

// Smooth training objective (softplus hinge with the given temperature, plus
// ridge) and its gradient with respect to EstimatedModel::params(). `gradient`
// may be empty; otherwise it must have params().size() entries and is overwritten.
double surrogate_loss(const EstimatedModel& model, const Dataset& dataset, const TrainConfig& config,
                      double temperature, std::span<double> gradient);

// Resolves TrainConfig::temperature against the data's rating scale.
double resolve_temperature(const Dataset& dataset, const TrainConfig& config);

// One full-batch gradient-descent step on the surrogate; returns the loss before the step.
double gradient_descent_step(EstimatedModel& model, const Dataset& dataset, const TrainConfig& config,
                             double temperature, double step_size);

struct FitDiagnostics {
  int epochs_run = 0;
  double final_surrogate = 0.0;
  double final_total_loss = 0.0;
  bool converged = false;
};

EstimatedModel fit(const Dataset& dataset, const TrainConfig& config,
                   const std::vector<double>& expected_outside_enrichment, FitDiagnostics* diagnostics = nullptr);

// sigma as the standard deviation of the best slate score over OUTSIDE-chosen rounds.
double estimate_outside_sigma(const EstimatedModel& model, std::span<const InteractionRecord> interactions);

// Phi((C_hat - mu) / sigma)
double choice_probability(const EstimatedModel& model, UserId user, ItemId item);

// (u_hat, v_hat)
std::pair<double, double> recover_scores(const EstimatedModel& model, UserId user, ItemId item);

// Next-choice prediction: argmax of estimated choice score over slate + outside (scored at mu).
ItemId predict_choice(const EstimatedModel& model, const InteractionRecord& round);

double standard_normal_cdf(double z);

// Plain latent-factor rating predictor: global mean + user/item biases + p_u . q_i.
class RatingFactorization {
 public:
  RatingFactorization() = default;
  RatingFactorization(int num_users, int num_items, int dim);

  double predict(UserId user, ItemId item) const;
  int num_users() const { return num_users_; }
  int num_items() const { return num_items_; }
  int dim() const { return dim_; }

  static RatingFactorization train(std::span<const RatingObservation> ratings, int num_users, int num_items,
                                   const TrainConfig& config);

 private:
  int num_users_ = 0;
  int num_items_ = 0;
  int dim_ = 1;
  double global_mean_ = 0.0;
  std::vector<double> user_bias_;
  std::vector<double> item_bias_;
  std::vector<double> user_factors_;
  std::vector<double> item_factors_;
};

}  // namespace temptrec
