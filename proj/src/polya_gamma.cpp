#include "spmix/polya_gamma.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "spmix/numeric.hpp"

namespace spmix {

namespace {

constexpr double kPi = std::numbers::pi;
// Crossover point of the two proposal pieces (the standard choice).
constexpr double kTrunc = 0.64;
constexpr double kTruncRecip = 1.0 / kTrunc;

double log_norm_cdf(double x) { return std::log(std_normal_cdf(x)); }

// Terms of the alternating series for the tilted Jacobi density at x.
double series_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x > 0.0) {
    const double expnt =
        -1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
    return std::exp(expnt);
  }
  return 0.0;
}

// Probability of proposing from the right-tail exponential piece.
double mass_texpon(double z) {
  const double t = kTrunc;
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
  const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);

  const double x0 = std::log(fz) + fz * t;
  const double xb = x0 - z + log_norm_cdf(b);
  const double xa = x0 + z + log_norm_cdf(a);

  const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + qdivp);
}

// Inverse-Gaussian(1/z, 1) restricted to (0, kTrunc).
double rtigauss(double z, RngStream& rng) {
  z = std::abs(z);
  const double t = kTrunc;
  double x = t + 1.0;
  if (kTruncRecip > z) {
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = rng.exponential(1.0);
      double e2 = rng.exponential(1.0);
      while (e1 * e1 > 2.0 * e2 / t) {
        e1 = rng.exponential(1.0);
        e2 = rng.exponential(1.0);
      }
      x = 1.0 + e1 * t;
      x = t / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    const double mu = 1.0 / z;
    while (x > t) {
      double y = rng.normal();
      y *= y;
      const double half_mu = 0.5 * mu;
      const double mu_y = mu * y;
      x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

// First two moments of the J*(b, z) law underlying PG (PG(b,c) = J*(b,c/2)/4).
double jj_m1(double b, double z) {
  z = std::abs(z);
  if (z > 1e-12) return b * std::tanh(z) / z;
  const double z2 = z * z;
  return b * (1.0 - z2 / 3.0 + 2.0 / 15.0 * z2 * z2);
}

double jj_m2(double b, double z) {
  z = std::abs(z);
  if (z > 1e-12) {
    const double r = std::tanh(z) / z;
    return (b + 1.0) * b * r * r + b * ((std::tanh(z) - z) / (z * z * z));
  }
  const double z2 = z * z;
  const double r = 1.0 - z2 / 3.0 + 2.0 / 15.0 * z2 * z2;
  return (b + 1.0) * b * r * r + b * (-1.0 / 3.0 + 2.0 / 15.0 * z2);
}

}  // namespace

PolyaGammaSampler::PolyaGammaSampler(int approx_threshold) : approx_threshold_(approx_threshold) {
  if (approx_threshold < 1) throw std::invalid_argument("PolyaGammaSampler: threshold must be >= 1");
}

double PolyaGammaSampler::draw_unit(double tilt, RngStream& rng) {
  // Sample 0.25 * J*(1, |tilt| / 2) by rejection: propose from the
  // two-piece envelope, accept via the alternating-series squeeze.
  const double z = 0.5 * std::abs(tilt);
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;

  for (;;) {
    double x;
    if (rng.uniform() < mass_texpon(z))
      x = kTrunc + rng.exponential(1.0) / fz;
    else
      x = rtigauss(z, rng);

    double s = series_coef(0, x);
    const double y = rng.uniform() * s;
    int n = 0;
    for (;;) {
      ++n;
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

double PolyaGammaSampler::draw(int shape, double tilt, RngStream& rng) {
  if (shape < 1) throw std::invalid_argument("PolyaGammaSampler::draw: shape must be >= 1");
  if (shape > approx_threshold_) {
    ++counters_.approximate;
    const double mean = pg_mean(shape, tilt);
    const double sd = std::sqrt(pg_variance(shape, tilt));
    // PG mass is well separated from 0 at large shape; the loop guards the
    // strict-positivity contract all the same.
    for (;;) {
      const double x = rng.normal(mean, sd);
      if (x > 0.0) return x;
    }
  }
  ++counters_.exact;
  double sum = 0.0;
  for (int i = 0; i < shape; ++i) sum += draw_unit(tilt, rng);
  return sum;
}

double pg_mean(double b, double c) {
  if (b <= 0.0) throw std::invalid_argument("pg_mean: shape must be > 0");
  return 0.25 * jj_m1(b, 0.5 * c);
}

double pg_variance(double b, double c) {
  if (b <= 0.0) throw std::invalid_argument("pg_variance: shape must be > 0");
  const double m1 = jj_m1(b, 0.5 * c);
  return 0.0625 * (jj_m2(b, 0.5 * c) - m1 * m1);
}

double pg_series_oracle(double b, double c, int n_terms, RngStream& rng) {
  if (b <= 0.0) throw std::invalid_argument("pg_series_oracle: shape must be > 0");
  if (n_terms < 1000) throw std::invalid_argument("pg_series_oracle: need n_terms >= 1000");
  const double shift = c * c / (4.0 * kPi * kPi);
  double sum = 0.0;
  for (int k = 1; k <= n_terms; ++k) {
    const double d = k - 0.5;
    sum += rng.gamma(b, 1.0) / (d * d + shift);
  }
  return sum / (2.0 * kPi * kPi);
}

}  // namespace spmix
