#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace temptrec {

// splitmix64 finaliser; used to derive independent sub-seeds from (seed, tag, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  auto step = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return step(step(step(seed) ^ tag) ^ index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream keyed by (tag, index); does not advance this generator.
  Rng substream(std::uint64_t tag, std::uint64_t index = 0) const {
    return Rng(mix_seed(seed_material(), tag, index));
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

  double beta(double alpha, double beta_param) {
    const double x = gamma(alpha);
    const double y = gamma(beta_param);
    return x / (x + y);
  }

  // Bivariate normal with the given means and 2x2 covariance (Cholesky of the covariance).
  std::pair<double, double> bivariate_normal(double mean_x, double mean_y, double var_x, double var_y,
                                             double cov) {
    const double l11 = std::sqrt(var_x);
    const double l21 = cov / l11;
    const double l22 = std::sqrt(var_y - l21 * l21);
    const double z1 = normal();
    const double z2 = normal();
    return {mean_x + l11 * z1, mean_y + l21 * z1 + l22 * z2};
  }

  // variate = xi + lambda * sinh((z - gamma) / delta), z ~ N(0, 1)
  double johnson_su(double gamma_param, double delta, double xi, double lambda) {
    return xi + lambda * std::sinh((normal() - gamma_param) / delta);
  }

  std::size_t categorical(std::span<const double> probs) {
    const double r = uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      acc += probs[k];
      if (r < acc) return k;
    }
    return probs.size() - 1;
  }

  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  // k distinct indices drawn uniformly from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(pool[i], pool[i + index(n - i)]);
    }
    pool.resize(k);
    return pool;
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    std::shuffle(values.begin(), values.end(), engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_material() const {
    auto copy = engine_;
    return copy();
  }

  std::mt19937_64 engine_;
};

}  // namespace temptrec
