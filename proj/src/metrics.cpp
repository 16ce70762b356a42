#include "spmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spmix {

namespace {

void check_common_grid(const GridDensity& p, const GridDensity& q) {
  p.validate();
  q.validate();
  if (p.grid.size() != q.grid.size() || (p.grid - q.grid).cwiseAbs().maxCoeff() != 0.0) {
    throw std::invalid_argument("grid densities are tabulated on different grids");
  }
}

}  // namespace

void GridDensity::validate() const {
  if (grid.size() != values.size()) {
    throw std::invalid_argument("grid and values have different lengths");
  }
  if (grid.size() < 2) throw std::invalid_argument("grid needs at least 2 points");
  for (int i = 1; i < grid.size(); ++i) {
    if (!(grid(i) > grid(i - 1))) {
      throw std::invalid_argument("grid must be strictly increasing");
    }
  }
  if (!values.allFinite() || values.minCoeff() < 0.0) {
    throw std::invalid_argument("density values must be finite and nonnegative");
  }
  const double mass = trapezoid(grid, values);
  if (mass < 0.98 || mass > 1.02) {
    throw std::invalid_argument("grid density mass " + std::to_string(mass) +
                                " is outside [0.98, 1.02]");
  }
}

double trapezoid(const Vector& grid, const Vector& values) {
  double acc = 0.0;
  for (int i = 1; i < grid.size(); ++i) {
    acc += 0.5 * (values(i - 1) + values(i)) * (grid(i) - grid(i - 1));
  }
  return acc;
}

double kl_divergence_grid(const GridDensity& p, const GridDensity& q) {
  check_common_grid(p, q);
  Vector integrand = Vector::Zero(p.grid.size());
  for (int i = 0; i < p.grid.size(); ++i) {
    if (p.values(i) > 0.0) {
      integrand(i) = p.values(i) * std::log(p.values(i) / std::max(q.values(i), 1e-300));
    }
  }
  return trapezoid(p.grid, integrand);
}

double hellinger_grid(const GridDensity& p, const GridDensity& q) {
  check_common_grid(p, q);
  const Vector integrand = (p.values.array() * q.values.array()).sqrt().matrix();
  const double overlap = trapezoid(p.grid, integrand);
  return std::sqrt(std::clamp(1.0 - overlap, 0.0, 1.0));
}

double lpml(const Matrix& loglik) {
  if (loglik.rows() < 1 || loglik.cols() < 1) {
    throw std::invalid_argument("log-likelihood table must be non-empty");
  }
  if (!loglik.allFinite()) {
    throw std::invalid_argument("log-likelihood table has non-finite entries");
  }
  const double log_s = std::log(static_cast<double>(loglik.rows()));
  double acc = 0.0;
  for (int j = 0; j < loglik.cols(); ++j) {
    acc += log_s - log_sum_exp(-loglik.col(j));
  }
  return acc;
}

double waic(const Matrix& loglik) {
  if (loglik.rows() < 2) {
    throw std::invalid_argument("WAIC needs at least 2 stored states");
  }
  if (!loglik.allFinite()) {
    throw std::invalid_argument("log-likelihood table has non-finite entries");
  }
  const int s = static_cast<int>(loglik.rows());
  const double log_s = std::log(static_cast<double>(s));
  double acc = 0.0;
  for (int j = 0; j < loglik.cols(); ++j) {
    const Vector col = loglik.col(j);
    const double lppd = log_sum_exp(col) - log_s;
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / (s - 1);
    acc += lppd - var;
  }
  return -2.0 * acc;
}

double pmse(const Vector& predicted, const Vector& observed) {
  if (predicted.size() != observed.size()) {
    throw std::invalid_argument("prediction and observation lengths differ");
  }
  if (predicted.size() == 0) throw std::invalid_argument("pMSE needs at least one pair");
  return (predicted - observed).squaredNorm() / static_cast<double>(predicted.size());
}

}  // namespace spmix
