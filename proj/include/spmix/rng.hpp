#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace spmix {

// SplitMix64 finalizer, used to key engines and derive substreams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded random stream. Every variate mapping is implemented here on top of
// the raw mt19937_64 output; the std::<distribution> adaptors are
// implementation-defined and would break bit-reproducibility of seeded runs
// across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  // Stream keyed by (this stream's seed, index). Pure derivation: the same
  // pair yields the same stream no matter how many draws were taken, which
  // is what makes per-draw / per-chain substreams schedule-independent.
  RngStream substream(std::uint64_t index) const;

  // Consumes one draw and keys a fresh stream by it, so consecutive forks
  // of one stream differ while remaining deterministic.
  RngStream fork();

  std::uint64_t next_u64();
  double uniform();  // strictly inside (0, 1)
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double sd);
  double exponential(double rate = 1.0);
  double gamma(double shape, double rate);
  double inv_gamma(double shape, double rate);
  double chi_squared(double df);
  double beta(double a, double b);
  double student_t(double df);
  double cauchy(double loc, double scale);
  double skew_normal(double loc, double scale, double shape);
  // Rejection sampling; the proposal scale must give the window
  // non-negligible mass (the MH move keeps it that way).
  double truncated_normal(double mean, double sd, double lo, double hi);
  int uniform_int(int n);  // uniform on {0, ..., n-1}
  // Index draw from unnormalized log weights (max-subtraction inside).
  int categorical_log(const Eigen::VectorXd& log_weights);
  Eigen::VectorXd normal_vector(int n);
  Eigen::MatrixXd normal_matrix(int rows, int cols);
  Eigen::VectorXd dirichlet(const Eigen::VectorXd& alpha);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace spmix
