#pragma once

#include "spmix/numeric.hpp"

namespace spmix {

// Density tabulated on a strictly increasing grid. Tails may be truncated,
// so the trapezoid mass is only required to land in [0.98, 1.02].
struct GridDensity {
  Vector grid;
  Vector values;

  void validate() const;
};

// Trapezoid mass of values over grid (no validity checks).
double trapezoid(const Vector& grid, const Vector& values);

// Kullback-Leibler divergence by trapezoid quadrature of p log(p/q); points
// with p = 0 contribute nothing and q is floored at 1e-300.
double kl_divergence_grid(const GridDensity& p, const GridDensity& q);

// Hellinger distance sqrt(1 - integral of sqrt(pq)), clamped to [0, 1].
double hellinger_grid(const GridDensity& p, const GridDensity& q);

// Log-pseudo marginal likelihood from a log-likelihood table (row = stored
// state, column = observation): the sum over observations of log CPO, the
// harmonic mean of per-state likelihoods, all in log space.
double lpml(const Matrix& loglik);

// Widely applicable information criterion on the deviance scale (lower is
// better) with the variance-based penalty.
double waic(const Matrix& loglik);

// Mean squared prediction error.
double pmse(const Vector& predicted, const Vector& observed);

}  // namespace spmix
