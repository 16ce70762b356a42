#pragma once

#include <vector>

#include <Eigen/Dense>

namespace spmix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// log(sum_i exp(x_i)) with max subtraction; -inf for an empty vector.
double log_sum_exp(const Vector& x);

// log N(y | mean, var)
double log_normal_pdf(double y, double mean, double var);

// Standard normal CDF.
double std_normal_cdf(double x);

// Linear-interpolation sample quantile (the common "type 7" definition).
// Sorts a copy of xs.
double quantile(std::vector<double> xs, double p);

double mean_of(const std::vector<double>& xs);
double variance_of(const std::vector<double>& xs);  // unbiased, n >= 2

}  // namespace spmix
