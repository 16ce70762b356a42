#include "spmix/mixture_model.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace spmix {

namespace {

double regression_shift(const MixtureState& state, int h, const Vector& x) {
  switch (state.variant()) {
    case ModelVariant::plain:
      if (x.size() != 0) {
        throw std::invalid_argument("covariates supplied to a model without regression terms");
      }
      return 0.0;
    case ModelVariant::m1:
      if (x.size() != state.beta.size()) {
        throw std::invalid_argument("covariate row does not match the shared coefficient vector");
      }
      return state.beta.dot(x);
    case ModelVariant::m2:
      if (x.size() != state.atoms[h].beta.size()) {
        throw std::invalid_argument("covariate row does not match the component coefficients");
      }
      return state.atoms[h].beta.dot(x);
  }
  return 0.0;
}

}  // namespace

ModelVariant MixtureState::variant() const {
  if (beta.size() > 0) return ModelVariant::m1;
  if (!atoms.empty() && atoms.front().beta.size() > 0) return ModelVariant::m2;
  return ModelVariant::plain;
}

void MixtureState::validate() const {
  const int h = H();
  if (h < 1) throw std::invalid_argument("state needs at least one component");
  const auto bdim = atoms.front().beta.size();
  for (const auto& atom : atoms) {
    if (!(atom.sigma2 > 0.0) || !std::isfinite(atom.sigma2) || !std::isfinite(atom.mu)) {
      throw std::invalid_argument("atom parameters must be finite with positive variance");
    }
    if (atom.beta.size() != bdim) {
      throw std::invalid_argument("component coefficient dimensions must agree");
    }
  }
  if (beta.size() > 0 && bdim > 0) {
    throw std::invalid_argument("shared and component coefficients cannot both be present");
  }
  for (const auto& wt : w_tilde) {
    if (wt.size() != h - 1 || !wt.allFinite()) {
      throw std::invalid_argument("each w_tilde vector must have H-1 finite coordinates");
    }
  }
  for (const auto& area : allocations) {
    for (int s : area) {
      if (s < 0 || s >= h) throw std::invalid_argument("allocation out of range");
    }
  }
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
  if (h > 1) {
    if (sigma.rows() != h - 1 || sigma.cols() != h - 1) {
      throw std::invalid_argument("sigma must be (H-1) x (H-1)");
    }
    if (Eigen::LLT<Matrix>(sigma).info() != Eigen::Success) {
      throw std::invalid_argument("sigma must be positive definite");
    }
  }
  for (const auto& m : m_tilde) {
    if (m.size() != h - 1 || !m.allFinite()) {
      throw std::invalid_argument("each m_tilde vector must have H-1 finite coordinates");
    }
  }
}

int Dataset::n_observations() const {
  int n = 0;
  for (const auto& yi : y) n += static_cast<int>(yi.size());
  return n;
}

int Dataset::covariate_dim() const {
  return x.empty() ? 0 : static_cast<int>(x.front().cols());
}

void Dataset::validate() const {
  if (y.empty()) throw std::invalid_argument("dataset needs at least one area");
  if (static_cast<int>(y.size()) != graph.n_areas()) {
    throw std::invalid_argument("area count does not match the graph");
  }
  for (const auto& yi : y) {
    if (!yi.allFinite()) throw std::invalid_argument("responses must be finite");
  }
  if (!x.empty()) {
    if (x.size() != y.size()) {
      throw std::invalid_argument("covariates must cover every area");
    }
    const auto d = x.front().cols();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].cols() != d || x[i].rows() != y[i].size()) {
        throw std::invalid_argument("covariate rows must match observations with a common width");
      }
      if (!x[i].allFinite()) throw std::invalid_argument("covariates must be finite");
    }
  }
}

Matrix PriorConfig::scale_matrix() const {
  if (V.size() == 0) return Matrix::Identity(H - 1, H - 1);
  return V;
}

void PriorConfig::validate() const {
  if (H < 1) throw std::invalid_argument("H must be at least 1");
  if (!(lambda > 0.0) || !(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("NIG hyperparameters must be positive");
  }
  if (!(eta2 > 0.0)) throw std::invalid_argument("eta2 must be positive");
  if (!(nu > H - 2)) throw std::invalid_argument("nu must exceed H - 2");
  if (!(sigma2_beta > 0.0) || !(m2_prior_precision > 0.0)) {
    throw std::invalid_argument("coefficient prior variances must be positive");
  }
  if (V.size() != 0) {
    if (V.rows() != H - 1 || V.cols() != H - 1) {
      throw std::invalid_argument("V must be (H-1) x (H-1)");
    }
    if (!V.isApprox(V.transpose(), 1e-12) ||
        Eigen::LLT<Matrix>(V).info() != Eigen::Success) {
      throw std::invalid_argument("V must be symmetric positive definite");
    }
  }
}

Vector log_weights_from_alr(const Vector& w_tilde) {
  const int h = static_cast<int>(w_tilde.size()) + 1;
  Vector z(h);
  z.head(h - 1) = w_tilde;
  z(h - 1) = 0.0;
  const double norm = log_sum_exp(z);
  return z.array() - norm;
}

double log_mixture_density(const MixtureState& state, int area, double y, const Vector& x) {
  if (area < 0 || area >= state.n_areas()) {
    throw std::invalid_argument("area index out of range");
  }
  const int h = state.H();
  const Vector lw = log_weights_from_alr(state.w_tilde[area]);
  Vector terms(h);
  for (int k = 0; k < h; ++k) {
    const double shift = regression_shift(state, k, x);
    terms(k) = lw(k) + log_normal_pdf(y, state.atoms[k].mu + shift, state.atoms[k].sigma2);
  }
  return log_sum_exp(terms);
}

double mixture_density(const MixtureState& state, int area, double y, const Vector& x) {
  return std::exp(log_mixture_density(state, area, y, x));
}

double mixture_mean(const MixtureState& state, int area, const Vector& x) {
  if (area < 0 || area >= state.n_areas()) {
    throw std::invalid_argument("area index out of range");
  }
  const int h = state.H();
  const Vector lw = log_weights_from_alr(state.w_tilde[area]);
  double mean = 0.0;
  for (int k = 0; k < h; ++k) {
    mean += std::exp(lw(k)) * (state.atoms[k].mu + regression_shift(state, k, x));
  }
  return mean;
}

Vector log_likelihood_row(const MixtureState& state, const Dataset& data) {
  if (state.n_areas() != data.n_areas()) {
    throw std::invalid_argument("state and data disagree on the number of areas");
  }
  Vector row(data.n_observations());
  int pos = 0;
  for (int i = 0; i < data.n_areas(); ++i) {
    for (int j = 0; j < data.y[i].size(); ++j) {
      const Vector x = data.x.empty() ? Vector() : Vector(data.x[i].row(j).transpose());
      row(pos++) = log_mixture_density(state, i, data.y[i](j), x);
    }
  }
  return row;
}

DensityEstimate posterior_mean_density(const Chain& chain, int area, const Vector& grid,
                                       const Vector& x) {
  if (chain.states.empty()) throw std::invalid_argument("chain holds no states");
  const int s = static_cast<int>(chain.states.size());
  const int v = static_cast<int>(grid.size());
  Matrix dens(s, v);
  for (int t = 0; t < s; ++t) {
    for (int g = 0; g < v; ++g) {
      dens(t, g) = mixture_density(chain.states[t], area, grid(g), x);
    }
  }
  DensityEstimate est;
  est.grid = grid;
  est.mean = dens.colwise().mean();
  est.lo95.resize(v);
  est.hi95.resize(v);
  for (int g = 0; g < v; ++g) {
    std::vector<double> col(dens.col(g).data(), dens.col(g).data() + s);
    est.lo95(g) = quantile(col, 0.025);
    est.hi95(g) = quantile(std::move(col), 0.975);
  }
  return est;
}

}  // namespace spmix
