#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spmix/graph.hpp"
#include "spmix/rng.hpp"
#include "spmix/simplex.hpp"

namespace spmix {

// Joint law of I area weight vectors: the Gaussian field
// N(m_tilde, ((F - rho G) kron Sigma^{-1})^{-1}) pushed through alr^{-1}
// areawise. m_tilde is either one vector per connected component (tied, the
// fitted model's form) or one per area.
struct LogisticMcarParams {
  ProximityGraph graph;
  double rho = 0.5;
  Matrix sigma;                  // (H-1) x (H-1), SPD
  std::vector<Vector> m_tilde;   // k vectors (tied) or I vectors (untied)

  int n_areas() const { return graph.n_areas(); }
  int H() const { return static_cast<int>(sigma.rows()) + 1; }
  bool tied() const;
  void validate() const;
  // Mean vector for area i under either form.
  const Vector& m_for_area(int i, const ComponentPartition& part) const;
};

// Size n_draws, each entry I simplex vectors. Per-draw substreams: draw d
// depends only on (rng fork key, d), so batches are schedule-independent.
std::vector<std::vector<SimplexVector>> sample_prior(const LogisticMcarParams& params,
                                                     int n_draws, RngStream& rng);

// Same field with the component-level means integrated out by Monte Carlo:
// each draw first samples one N(0, eta2 I) mean per connected component.
std::vector<std::vector<SimplexVector>> sample_prior_integrated(const ProximityGraph& graph,
                                                                double rho, const Matrix& sigma,
                                                                double eta2, int n_draws,
                                                                RngStream& rng);

// E[log(w_il / w_ik) | w_{-i}]: weighted combination of the prior mean
// log-ratio and the neighbors' log-ratios. Indices are 0-based; the
// reference coordinate is H-1. w must hold I vectors (entry i is unused).
// Exact for the tied form, where it coincides with the Gaussian
// conditional mean of the joint law.
double conditional_mean_logratio(const LogisticMcarParams& params, int i, int l, int k,
                                 const std::vector<SimplexVector>& w);

// Cov(log(w_il / w_im), log(w_jl / w_jm)) under the joint law; exactly zero
// across connected components. 0-based indices, reference coordinate H-1.
double marginal_logratio_cov(const LogisticMcarParams& params, int i, int j, int l, int m);

// Comparator prior: one univariate CAR field per component level, centered
// at a deterministically decreasing sequence, normalized areawise by
// softmax across levels.
struct CkSsmParams {
  ProximityGraph graph;
  double a = 1.0;
  double b = 1.0;
  double tau2 = 1.0;
  double rho = 0.5;
  int H = 10;

  void validate() const;
  // Level centers theta_h = log sigmoid(b - a(h+1)), 0-based h.
  double level_center(int h) const;
};

std::vector<std::vector<SimplexVector>> sample_ck_ssm_prior(const CkSsmParams& params, int n_draws,
                                                            RngStream& rng);

std::vector<SimplexVector> sample_dirichlet(const Vector& alpha, int n_draws, RngStream& rng);

// |{h : w_h > threshold}|.
int active_components(const SimplexVector& w, double threshold = 0.01);

struct DistanceSummaryRow {
  std::string label;
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

// Euclidean distances ||w_i - w_j|| between prior draws for the requested
// area pairs, plus an independent-Dirichlet(baseline_alpha) pair baseline.
std::vector<DistanceSummaryRow> pairwise_distance_study(
    const LogisticMcarParams& params, const std::vector<std::pair<int, int>>& pairs,
    const Vector& baseline_alpha, int n_draws, RngStream& rng);

}  // namespace spmix
