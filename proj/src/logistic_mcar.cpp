#include "spmix/logistic_mcar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "spmix/numeric.hpp"

namespace spmix {

namespace {

void check_spd(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) {
    throw std::invalid_argument("sigma must be square with at least one row");
  }
  if (!sigma.isApprox(sigma.transpose(), 1e-12)) {
    throw std::invalid_argument("sigma must be symmetric");
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("sigma must be positive definite");
  }
}

// Lower Cholesky factors of the precision blocks F - rho G, one per
// connected component, in component label order.
std::vector<Matrix> component_precision_factors(const ProximityGraph& graph, double rho,
                                                const ComponentPartition& part) {
  const Matrix p = precision_matrix(graph, rho);
  std::vector<Matrix> factors;
  factors.reserve(part.members.size());
  for (const auto& members : part.members) {
    const int n = static_cast<int>(members.size());
    Matrix block(n, n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        block(r, c) = p(members[r], members[c]);
      }
    }
    Eigen::LLT<Matrix> llt(block);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("precision block is not positive definite");
    }
    factors.push_back(llt.matrixL());
  }
  return factors;
}

// One field draw: X_C = L_P^{-T} Z L_Sigma^T per component gives
// Cov(X_il, X_jm) = (P^{-1})_ij Sigma_lm.
Matrix sample_field(const ComponentPartition& part, const std::vector<Matrix>& prec_factors,
                    const Matrix& sigma_factor, int n_areas, int hm1, RngStream& rng) {
  Matrix field(n_areas, hm1);
  for (std::size_t c = 0; c < part.members.size(); ++c) {
    const auto& members = part.members[c];
    const int n = static_cast<int>(members.size());
    const Matrix z = rng.normal_matrix(n, hm1);
    const Matrix x =
        prec_factors[c].transpose().triangularView<Eigen::Upper>().solve(z) *
        sigma_factor.transpose();
    for (int r = 0; r < n; ++r) {
      field.row(members[r]) = x.row(r);
    }
  }
  return field;
}

SimplexVector softmax_closure(const Vector& v) {
  const double m = v.maxCoeff();
  Vector w = (v.array() - m).exp();
  w /= w.sum();
  return SimplexVector(w);
}

DistanceSummaryRow summarize_distances(std::string label, std::vector<double> d) {
  DistanceSummaryRow row;
  row.label = std::move(label);
  auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  row.min = *lo;
  row.max = *hi;
  row.q25 = quantile(d, 0.25);
  row.median = quantile(d, 0.50);
  row.q75 = quantile(d, 0.75);
  return row;
}

}  // namespace

bool LogisticMcarParams::tied() const {
  const auto part = connected_components(graph);
  if (m_tilde.size() == static_cast<std::size_t>(part.count)) return true;
  if (m_tilde.size() == static_cast<std::size_t>(graph.n_areas())) return false;
  throw std::invalid_argument("m_tilde must hold one vector per component or per area");
}

void LogisticMcarParams::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("rho must lie in (0, 1)");
  }
  check_spd(sigma);
  tied();
  const auto hm1 = sigma.rows();
  for (const auto& m : m_tilde) {
    if (m.size() != hm1) {
      throw std::invalid_argument("each m_tilde vector must have H-1 coordinates");
    }
    if (!m.allFinite()) {
      throw std::invalid_argument("m_tilde must be finite");
    }
  }
}

const Vector& LogisticMcarParams::m_for_area(int i, const ComponentPartition& part) const {
  if (m_tilde.size() == static_cast<std::size_t>(part.count)) {
    return m_tilde[part.label[i]];
  }
  return m_tilde[i];
}

std::vector<std::vector<SimplexVector>> sample_prior(const LogisticMcarParams& params,
                                                     int n_draws, RngStream& rng) {
  params.validate();
  if (n_draws < 1) throw std::invalid_argument("n_draws must be positive");
  const auto part = connected_components(params.graph);
  const auto prec_factors = component_precision_factors(params.graph, params.rho, part);
  const Matrix sigma_factor = Eigen::LLT<Matrix>(params.sigma).matrixL();
  const int n_areas = params.n_areas();
  const int hm1 = static_cast<int>(params.sigma.rows());

  RngStream base = rng.fork();
  std::vector<std::vector<SimplexVector>> draws;
  draws.reserve(n_draws);
  for (int d = 0; d < n_draws; ++d) {
    RngStream sub = base.substream(static_cast<uint64_t>(d));
    Matrix field = sample_field(part, prec_factors, sigma_factor, n_areas, hm1, sub);
    std::vector<SimplexVector> areas;
    areas.reserve(n_areas);
    for (int i = 0; i < n_areas; ++i) {
      Vector wt = field.row(i).transpose() + params.m_for_area(i, part);
      areas.push_back(alr_inv(AlrVector(wt)));
    }
    draws.push_back(std::move(areas));
  }
  return draws;
}

std::vector<std::vector<SimplexVector>> sample_prior_integrated(const ProximityGraph& graph,
                                                                double rho, const Matrix& sigma,
                                                                double eta2, int n_draws,
                                                                RngStream& rng) {
  if (!(eta2 > 0.0)) throw std::invalid_argument("eta2 must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
  check_spd(sigma);
  if (n_draws < 1) throw std::invalid_argument("n_draws must be positive");
  const auto part = connected_components(graph);
  const auto prec_factors = component_precision_factors(graph, rho, part);
  const Matrix sigma_factor = Eigen::LLT<Matrix>(sigma).matrixL();
  const int n_areas = graph.n_areas();
  const int hm1 = static_cast<int>(sigma.rows());
  const double eta = std::sqrt(eta2);

  RngStream base = rng.fork();
  std::vector<std::vector<SimplexVector>> draws;
  draws.reserve(n_draws);
  for (int d = 0; d < n_draws; ++d) {
    RngStream sub = base.substream(static_cast<uint64_t>(d));
    std::vector<Vector> means(part.count);
    for (int c = 0; c < part.count; ++c) {
      means[c] = eta * sub.normal_vector(hm1);
    }
    Matrix field = sample_field(part, prec_factors, sigma_factor, n_areas, hm1, sub);
    std::vector<SimplexVector> areas;
    areas.reserve(n_areas);
    for (int i = 0; i < n_areas; ++i) {
      Vector wt = field.row(i).transpose() + means[part.label[i]];
      areas.push_back(alr_inv(AlrVector(wt)));
    }
    draws.push_back(std::move(areas));
  }
  return draws;
}

double conditional_mean_logratio(const LogisticMcarParams& params, int i, int l, int k,
                                 const std::vector<SimplexVector>& w) {
  params.validate();
  const int n_areas = params.n_areas();
  const int h = params.H();
  if (i < 0 || i >= n_areas) throw std::invalid_argument("area index out of range");
  if (l < 0 || l >= h || k < 0 || k >= h) {
    throw std::invalid_argument("coordinate index out of range");
  }
  if (w.size() != static_cast<std::size_t>(n_areas)) {
    throw std::invalid_argument("w must hold one simplex vector per area");
  }
  const auto part = connected_components(params.graph);
  const Vector& m = params.m_for_area(i, part);
  const auto coord = [&](const Vector& v, int t) { return t == h - 1 ? 0.0 : v(t); };

  const auto& neighbors = params.graph.neighbors(i);
  double neighbor_sum = 0.0;
  for (int j : neighbors) {
    if (!w[j].interior()) {
      throw std::domain_error("neighboring weights must be interior for log-ratios");
    }
    neighbor_sum += std::log(w[j][l]) - std::log(w[j][k]);
  }
  const double kappa = params.rho * static_cast<double>(neighbors.size()) + 1.0 - params.rho;
  const double prior_term = (1.0 - params.rho) * (coord(m, l) - coord(m, k));
  return (prior_term + params.rho * neighbor_sum) / kappa;
}

double marginal_logratio_cov(const LogisticMcarParams& params, int i, int j, int l, int m) {
  params.validate();
  const int n_areas = params.n_areas();
  const int h = params.H();
  if (i < 0 || i >= n_areas || j < 0 || j >= n_areas) {
    throw std::invalid_argument("area index out of range");
  }
  if (l < 0 || l >= h || m < 0 || m >= h) {
    throw std::invalid_argument("coordinate index out of range");
  }
  if (l == m) return 0.0;
  const Matrix a = marginal_scale_matrix(params.graph, params.rho);
  const double aij = a(i, j);
  const Matrix& s = params.sigma;
  if (m == h - 1) return aij * s(l, l);
  if (l == h - 1) return aij * s(m, m);
  return aij * (s(l, l) - 2.0 * s(l, m) + s(m, m));
}

void CkSsmParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("a and b must be positive");
  if (!(tau2 > 0.0)) throw std::invalid_argument("tau2 must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
  if (H < 2) throw std::invalid_argument("H must be at least 2");
}

double CkSsmParams::level_center(int h) const {
  // log sigmoid(b - a(h+1)), stable on both tails.
  const double x = b - a * static_cast<double>(h + 1);
  if (x > 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

std::vector<std::vector<SimplexVector>> sample_ck_ssm_prior(const CkSsmParams& params, int n_draws,
                                                            RngStream& rng) {
  params.validate();
  if (n_draws < 1) throw std::invalid_argument("n_draws must be positive");
  const auto part = connected_components(params.graph);
  const auto prec_factors = component_precision_factors(params.graph, params.rho, part);
  const int n_areas = params.graph.n_areas();
  const double tau = std::sqrt(params.tau2);

  RngStream base = rng.fork();
  std::vector<std::vector<SimplexVector>> draws;
  draws.reserve(n_draws);
  for (int d = 0; d < n_draws; ++d) {
    RngStream sub = base.substream(static_cast<uint64_t>(d));
    Matrix levels(n_areas, params.H);
    for (int h = 0; h < params.H; ++h) {
      const double center = params.level_center(h);
      for (std::size_t c = 0; c < part.members.size(); ++c) {
        const auto& members = part.members[c];
        const int n = static_cast<int>(members.size());
        const Vector z = sub.normal_vector(n);
        const Vector x =
            prec_factors[c].transpose().triangularView<Eigen::Upper>().solve(z);
        for (int r = 0; r < n; ++r) {
          levels(members[r], h) = center + tau * x(r);
        }
      }
    }
    std::vector<SimplexVector> areas;
    areas.reserve(n_areas);
    for (int i = 0; i < n_areas; ++i) {
      areas.push_back(softmax_closure(levels.row(i).transpose()));
    }
    draws.push_back(std::move(areas));
  }
  return draws;
}

std::vector<SimplexVector> sample_dirichlet(const Vector& alpha, int n_draws, RngStream& rng) {
  if (n_draws < 1) throw std::invalid_argument("n_draws must be positive");
  RngStream base = rng.fork();
  std::vector<SimplexVector> draws;
  draws.reserve(n_draws);
  for (int d = 0; d < n_draws; ++d) {
    RngStream sub = base.substream(static_cast<uint64_t>(d));
    draws.push_back(SimplexVector(sub.dirichlet(alpha)));
  }
  return draws;
}

int active_components(const SimplexVector& w, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("threshold must lie in (0, 1)");
  }
  int count = 0;
  for (int h = 0; h < w.size(); ++h) {
    if (w[h] > threshold) ++count;
  }
  return count;
}

std::vector<DistanceSummaryRow> pairwise_distance_study(
    const LogisticMcarParams& params, const std::vector<std::pair<int, int>>& pairs,
    const Vector& baseline_alpha, int n_draws, RngStream& rng) {
  params.validate();
  if (n_draws < 2) throw std::invalid_argument("n_draws must be at least 2");
  const int n_areas = params.n_areas();
  for (const auto& [i, j] : pairs) {
    if (i < 0 || i >= n_areas || j < 0 || j >= n_areas || i == j) {
      throw std::invalid_argument("distance pair indices must name two distinct areas");
    }
  }
  const auto draws = sample_prior(params, n_draws, rng);

  std::vector<DistanceSummaryRow> rows;
  rows.reserve(pairs.size() + 1);
  for (const auto& [i, j] : pairs) {
    std::vector<double> d(n_draws);
    for (int t = 0; t < n_draws; ++t) {
      d[t] = (draws[t][i].values() - draws[t][j].values()).norm();
    }
    rows.push_back(summarize_distances(
        "d_" + std::to_string(i) + "_" + std::to_string(j), std::move(d)));
  }

  RngStream base = rng.fork();
  std::vector<double> d(n_draws);
  for (int t = 0; t < n_draws; ++t) {
    RngStream sub = base.substream(static_cast<uint64_t>(t));
    const Vector w1 = sub.dirichlet(baseline_alpha);
    const Vector w2 = sub.dirichlet(baseline_alpha);
    d[t] = (w1 - w2).norm();
  }
  rows.push_back(summarize_distances("dirichlet", std::move(d)));
  return rows;
}

}  // namespace spmix
