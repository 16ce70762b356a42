#include "spmix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "spmix/numeric.hpp"

namespace spmix {

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(index + 1)));
}

RngStream RngStream::fork() { return RngStream(next_u64()); }

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() {
  // 53-bit mantissa, offset by half an ulp so the result is never 0 or 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
  // Box-Muller, cosine branch only: stateless, so substream draws never
  // depend on a cached mate.
  double u1 = uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::normal(double mean, double sd) { return mean + sd * normal(); }

double RngStream::exponential(double rate) {
  if (rate <= 0.0) throw std::invalid_argument("exponential: rate must be > 0");
  return -std::log(uniform()) / rate;
}

double RngStream::gamma(double shape, double rate) {
  if (shape <= 0.0 || rate <= 0.0) throw std::invalid_argument("gamma: shape and rate must be > 0");
  // Marsaglia-Tsang squeeze; shapes below 1 are boosted and scaled back.
  if (shape < 1.0) {
    double u = uniform();
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double RngStream::inv_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }

double RngStream::chi_squared(double df) { return gamma(0.5 * df, 0.5); }

double RngStream::beta(double a, double b) {
  double x = gamma(a, 1.0);
  double y = gamma(b, 1.0);
  return x / (x + y);
}

double RngStream::student_t(double df) { return normal() / std::sqrt(chi_squared(df) / df); }

double RngStream::cauchy(double loc, double scale) {
  return loc + scale * std::tan(std::numbers::pi * (uniform() - 0.5));
}

double RngStream::skew_normal(double loc, double scale, double shape) {
  // Two-Gaussian construction: delta*|Z0| + sqrt(1-delta^2)*Z1.
  const double delta = shape / std::sqrt(1.0 + shape * shape);
  double z0 = normal();
  double z1 = normal();
  return loc + scale * (delta * std::abs(z0) + std::sqrt(1.0 - delta * delta) * z1);
}

double RngStream::truncated_normal(double mean, double sd, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("truncated_normal: empty support");
  for (int attempt = 0; attempt < 100000; ++attempt) {
    double x = normal(mean, sd);
    if (x > lo && x < hi) return x;
  }
  throw std::runtime_error("truncated_normal: window mass too small for rejection sampling");
}

int RngStream::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be > 0");
  // Rejection on the top bits keeps the draw exactly uniform.
  const std::uint64_t span = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<int>(x % span);
}

int RngStream::categorical_log(const Eigen::VectorXd& log_weights) {
  if (log_weights.size() == 0) throw std::invalid_argument("categorical_log: empty weights");
  const double m = log_weights.maxCoeff();
  if (!std::isfinite(m)) throw std::domain_error("categorical_log: no finite weight");
  double total = 0.0;
  Eigen::VectorXd cum(log_weights.size());
  for (int i = 0; i < log_weights.size(); ++i) {
    total += std::exp(log_weights[i] - m);
    cum[i] = total;
  }
  const double u = uniform() * total;
  for (int i = 0; i < cum.size(); ++i) {
    if (u <= cum[i]) return i;
  }
  return static_cast<int>(cum.size()) - 1;
}

Eigen::VectorXd RngStream::normal_vector(int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = normal();
  return v;
}

Eigen::MatrixXd RngStream::normal_matrix(int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order is part of the determinism contract.
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

Eigen::VectorXd RngStream::dirichlet(const Eigen::VectorXd& alpha) {
  if (alpha.size() < 1 || alpha.minCoeff() <= 0.0)
    throw std::invalid_argument("dirichlet: parameters must be positive");
  Eigen::VectorXd g(alpha.size());
  for (int i = 0; i < alpha.size(); ++i) g[i] = gamma(alpha[i], 1.0);
  return g / g.sum();
}

double log_sum_exp(const Vector& x) {
  if (x.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf, or a stray +inf/nan propagates
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

double log_normal_pdf(double y, double mean, double var) {
  const double r = y - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + r * r / var);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile: p outside [0,1]");
  std::sort(xs.begin(), xs.end());
  const double h = p * (static_cast<double>(xs.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= xs.size()) return xs.back();
  const double frac = h - static_cast<double>(lo);
  return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double variance_of(const std::vector<double>& xs) {
  if (xs.size() < 2) throw std::invalid_argument("variance_of: need at least two values");
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / (static_cast<double>(xs.size()) - 1.0);
}

}  // namespace spmix
