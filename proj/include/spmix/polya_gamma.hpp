#pragma once

#include <cstdint>

#include "spmix/rng.hpp"

namespace spmix {

// Sampler for PG(b, c) with integer shape b >= 1. Exact draws sum b
// independent PG(1, c) variates from the alternating-series rejection
// sampler on the tilted Jacobi density; above approx_threshold the draw
// switches to a moment-matched Gaussian and the approximate counter
// records it (surfaced in chain metadata).
class PolyaGammaSampler {
 public:
  struct Counters {
    std::uint64_t exact = 0;
    std::uint64_t approximate = 0;
  };

  explicit PolyaGammaSampler(int approx_threshold = 170);

  double draw(int shape, double tilt, RngStream& rng);
  double draw_unit(double tilt, RngStream& rng);  // PG(1, tilt)

  int approx_threshold() const { return approx_threshold_; }
  const Counters& counters() const { return counters_; }
  void reset_counters() { counters_ = Counters{}; }

 private:
  int approx_threshold_;
  Counters counters_;
};

// E[PG(b, c)] = b/4 at c = 0, else (b / 2c) tanh(c / 2).
double pg_mean(double b, double c);
double pg_variance(double b, double c);

// Truncated version of the defining Gamma series. Test oracle only: O(n_terms)
// per draw, truncation bias below b / (2 pi^2 n_terms). Requires n_terms >= 1000.
double pg_series_oracle(double b, double c, int n_terms, RngStream& rng);

}  // namespace spmix
