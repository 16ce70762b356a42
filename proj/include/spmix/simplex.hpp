#pragma once

#include "spmix/numeric.hpp"

namespace spmix {

// Point of the H-part simplex: nonnegative entries summing to 1 (within
// 1e-10 on construction; stored exactly normalized). H >= 2.
class SimplexVector {
 public:
  explicit SimplexVector(Vector values);

  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int h) const { return values_[h]; }
  const Vector& values() const { return values_; }
  // True when every entry is strictly positive (required by alr).
  bool interior() const;

 private:
  Vector values_;
};

// Additive log-ratio coordinates of an interior simplex point; H-1 finite
// entries, the last simplex coordinate is the reference.
class AlrVector {
 public:
  explicit AlrVector(Vector values);

  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int j) const { return values_[j]; }
  const Vector& values() const { return values_; }

 private:
  Vector values_;
};

// Normalize a nonnegative, nonzero vector onto the simplex.
SimplexVector closure(const Vector& v);

AlrVector alr(const SimplexVector& w);

// Stabilized inverse transform: valid for arbitrarily large coordinates
// (entries may underflow to 0, never overflow or turn NaN).
SimplexVector alr_inv(const AlrVector& wt);

// Aitchison group operation: componentwise product followed by closure.
SimplexVector perturb(const SimplexVector& w1, const SimplexVector& w2);

// Aitchison scalar action: componentwise power followed by closure.
SimplexVector power(double alpha, const SimplexVector& w);

// Log-ratio inner product, the (1/2H) double sum over all ordered pairs.
double aitchison_inner(const SimplexVector& w1, const SimplexVector& w2);

double aitchison_norm(const SimplexVector& w);
double aitchison_distance(const SimplexVector& w1, const SimplexVector& w2);

}  // namespace spmix
