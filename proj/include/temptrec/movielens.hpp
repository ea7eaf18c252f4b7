#pragma once

// MovieLens ingestion and the rating-log sandbox: sampled users and movies,
// chronological consumption rounds, off-sample movies as outside options,
// reconstructed click history and the estimated world used for policy runs.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "temptrec/core_model.hpp"
#include "temptrec/estimation.hpp"
#include "temptrec/simharness.hpp"

namespace temptrec {

struct RatingRow {
  std::int64_t user_id = 0;
  std::int64_t movie_id = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  bool operator==(const RatingRow&) const = default;
};

bool is_half_star(double rating);

// Parses one `userId,movieId,rating,timestamp` line. Throws InputError naming `line_number`.
RatingRow parse_rating_line(std::string_view line, std::size_t line_number);

// Streams `path` (header row required) and calls `sink` for each validated row.
void scan_ratings(const std::string& path, const std::function<void(const RatingRow&)>& sink);
std::vector<RatingRow> load_ratings(const std::string& path);

struct SandboxConfig {
  int m_users = 300;
  int n_movies = 200;
  int ratings_per_user = 25;
  int resamples = 5;
  int latent_dim = 3;
  std::size_t slate_size = kDefaultSlateSize;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SandboxRound {
  std::int64_t movie_id = 0;
  ItemId item = kOutside;  // index into Sandbox::movie_ids, kOutside when off-sample
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

struct Sandbox {
  std::vector<std::int64_t> user_ids;   // sampled users; sandbox user j is user_ids[j]
  std::vector<std::int64_t> movie_ids;  // sampled movies, ascending; item i is movie_ids[i]
  std::vector<std::vector<SandboxRound>> rounds;  // per user, (timestamp, movie id) order
  std::uint64_t seed = 0;

  std::size_t outside_events(std::size_t user) const;
};

// Samples m users with >= ratings_per_user ratings, ratings_per_user of each
// user's ratings, then n movies weighted by how often they occur in those
// sampled rounds. Rounds on unsampled movies become outside consumptions.
Sandbox build_sandbox(const std::vector<RatingRow>& rows, const SandboxConfig& config, Rng& rng);

// Same sampling as build_sandbox for each resample, reading `path` in two streaming passes.
std::vector<Sandbox> build_sandboxes_from_file(const std::string& path, const SandboxConfig& config);
std::vector<Sandbox> build_sandboxes(const std::vector<RatingRow>& rows, const SandboxConfig& config);

struct ReconstructionConfig {
  std::size_t slate_size = kDefaultSlateSize;
  TrainConfig recommender;  // latent-factor recommender settings
  int min_training_ratings = 8;
};

// Rebuilds recommended slates round by round from a ratings-based recommender
// trained only on sandbox ratings timestamped strictly before the round.
// `training_cutoffs`, when given, receives for every record the newest rating
// timestamp the recommender had seen (INT64_MIN when none).
InteractionLog reconstruct_click_history(const Sandbox& sandbox, const ReconstructionConfig& config,
                                         std::vector<std::int64_t>* training_cutoffs = nullptr);

struct SandboxEstimate {
  EstimatedModel model;
  std::vector<double> outside_rating_sd;
  std::vector<std::string> notes;  // fallbacks taken
};

// Fits the joint model with lambda_f frozen at 1 (ratings read as enrichment).
// E[u(o)] per user is the mean rating of that user's outside rounds, falling
// back to the population mean for users without any.
SandboxEstimate estimate_world_from_sandbox(const InteractionLog& log, const Sandbox& sandbox,
                                            const TrainConfig& config);

// World whose users, items and outside-score distribution are the estimates.
// Items the user consumed in the sandbox start out consumed.
World world_from_estimate(const SandboxEstimate& estimate, const InteractionLog& history);

struct MovieLensRun {
  Sandbox sandbox;
  InteractionLog history;
  SandboxEstimate estimate;
  World world;
  double holdout_choice_accuracy = 0.0;
};

struct MovieLensConfig {
  SandboxConfig sandbox;
  ReconstructionConfig reconstruction;
  TrainConfig train;
  int rounds = 50;
  double holdout_fraction = 0.2;  // last rounds per user held out for the accuracy check
};

// Reconstruction + estimation for one sandbox. The accuracy check refits on the
// non-held-out rounds; the returned estimate uses every round.
MovieLensRun prepare_movielens_run(Sandbox sandbox, const MovieLensConfig& config);

// Greedy (on the estimated world), ratings-based and click-based policies for
// `rounds` rounds on each prepared run; one replication per run.
MetricsReport run_movielens_experiment(const std::vector<MovieLensRun>& runs, const MovieLensConfig& config,
                                       const HistogramBins& bins = {});

// MovieLens-format ratings from a latent enrichment/temptation world, for demos
// and tests when the real file is not at hand.
struct SyntheticRatingsConfig {
  int users = 1500;
  int movies = 800;
  int min_ratings = 30;
  int max_ratings = 120;
  int slate_size = 20;
  int d = 3;
  std::uint64_t seed = 0;
};
void write_synthetic_ratings(const std::string& path, const SyntheticRatingsConfig& config);

}  // namespace temptrec
