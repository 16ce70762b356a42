#include "spmix/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spmix {

namespace {

void check_finite_nonneg(const Vector& v, const char* who) {
  for (int i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw std::invalid_argument(std::string(who) + ": non-finite entry");
    if (v[i] < 0.0) throw std::invalid_argument(std::string(who) + ": negative entry");
  }
}

}  // namespace

SimplexVector::SimplexVector(Vector values) : values_(std::move(values)) {
  if (values_.size() < 2) throw std::invalid_argument("SimplexVector: need at least 2 parts");
  check_finite_nonneg(values_, "SimplexVector");
  const double s = values_.sum();
  if (std::abs(s - 1.0) > 1e-10) throw std::invalid_argument("SimplexVector: entries must sum to 1");
  values_ /= s;
}

bool SimplexVector::interior() const { return values_.minCoeff() > 0.0; }

AlrVector::AlrVector(Vector values) : values_(std::move(values)) {
  if (values_.size() < 1) throw std::invalid_argument("AlrVector: need at least 1 coordinate");
  for (int i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i])) throw std::invalid_argument("AlrVector: non-finite entry");
}

SimplexVector closure(const Vector& v) {
  if (v.size() < 2) throw std::invalid_argument("closure: need at least 2 parts");
  for (int i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw std::invalid_argument("closure: non-finite entry");
    if (v[i] <= 0.0) throw std::domain_error("closure: entries must be strictly positive");
  }
  return SimplexVector(v / v.sum());
}

AlrVector alr(const SimplexVector& w) {
  if (!w.interior()) throw std::domain_error("alr: requires strictly positive entries");
  const int H = w.size();
  Vector out(H - 1);
  const double ref = std::log(w[H - 1]);
  for (int j = 0; j < H - 1; ++j) out[j] = std::log(w[j]) - ref;
  return AlrVector(std::move(out));
}

SimplexVector alr_inv(const AlrVector& wt) {
  const int H = wt.size() + 1;
  // Shift by the max of (coordinates, 0) before exponentiating; the
  // reference part contributes exp(-m).
  double m = 0.0;
  for (int j = 0; j < H - 1; ++j) m = std::max(m, wt[j]);
  Vector out(H);
  double denom = std::exp(-m);
  for (int j = 0; j < H - 1; ++j) {
    out[j] = std::exp(wt[j] - m);
    denom += out[j];
  }
  out[H - 1] = std::exp(-m);
  return SimplexVector(out / denom);
}

SimplexVector perturb(const SimplexVector& w1, const SimplexVector& w2) {
  if (w1.size() != w2.size()) throw std::invalid_argument("perturb: size mismatch");
  if (!w1.interior() || !w2.interior())
    throw std::domain_error("perturb: requires interior points");
  return closure(w1.values().cwiseProduct(w2.values()));
}

SimplexVector power(double alpha, const SimplexVector& w) {
  if (!std::isfinite(alpha)) throw std::invalid_argument("power: non-finite exponent");
  if (!w.interior()) throw std::domain_error("power: requires an interior point");
  return closure(w.values().array().pow(alpha).matrix());
}

double aitchison_inner(const SimplexVector& w1, const SimplexVector& w2) {
  if (w1.size() != w2.size()) throw std::invalid_argument("aitchison_inner: size mismatch");
  if (!w1.interior() || !w2.interior())
    throw std::domain_error("aitchison_inner: requires interior points");
  const int H = w1.size();
  double s = 0.0;
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < H; ++j)
      s += std::log(w1[i] / w1[j]) * std::log(w2[i] / w2[j]);
  return s / (2.0 * H);
}

double aitchison_norm(const SimplexVector& w) { return std::sqrt(aitchison_inner(w, w)); }

double aitchison_distance(const SimplexVector& w1, const SimplexVector& w2) {
  if (w1.size() != w2.size()) throw std::invalid_argument("aitchison_distance: size mismatch");
  if (!w1.interior() || !w2.interior())
    throw std::domain_error("aitchison_distance: requires interior points");
  const int H = w1.size();
  double s = 0.0;
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < H; ++j) {
      const double d = std::log(w1[i] / w1[j]) - std::log(w2[i] / w2[j]);
      s += d * d;
    }
  return std::sqrt(s / (2.0 * H));
}

}  // namespace spmix
