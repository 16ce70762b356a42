#include "spmix/gibbs.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

namespace spmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::plain:
      return "plain";
    case ModelVariant::m1:
      return "m1";
    case ModelVariant::m2:
      return "m2";
  }
  return "plain";
}

Matrix symmetric_inverse(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("matrix expected to be positive definite is not");
  }
  Matrix inv = llt.solve(Matrix::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

// Bartlett construction. Draw order: for each row, the subdiagonal normals
// then the chi-squared diagonal entry.
Matrix sample_inv_wishart(double df, const Matrix& scale, RngStream& rng) {
  const int p = static_cast<int>(scale.rows());
  Eigen::LLT<Matrix> llt(scale);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("inverse-Wishart scale matrix is not positive definite");
  }
  // phi = L^{-T} satisfies phi phi^T = scale^{-1}, which is the Wishart
  // scale of the precision draw.
  const Matrix phi = Matrix(llt.matrixL())
                         .triangularView<Eigen::Lower>()
                         .solve(Matrix::Identity(p, p))
                         .transpose();
  Matrix a = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
    a(i, i) = std::sqrt(rng.chi_squared(df - i));
  }
  const Matrix root = phi * a;  // W = root root^T ~ Wishart(df, scale^{-1})
  const Matrix w = root * root.transpose();
  return symmetric_inverse(w);
}

}  // namespace

void ChainConfig::validate() const {
  if (n_burnin < 0) throw std::invalid_argument("n_burnin must be nonnegative");
  if (n_samples < 1) throw std::invalid_argument("n_samples must be at least 1");
  if (thin < 1) throw std::invalid_argument("thin must be at least 1");
  if (!(rho_proposal_sd > 0.0)) throw std::invalid_argument("rho proposal sd must be positive");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw std::invalid_argument("target acceptance must lie in (0, 1)");
  }
  prior.validate();
}

GibbsSampler::GibbsSampler(ChainConfig config, Dataset data)
    : cfg_(std::move(config)),
      data_(std::move(data)),
      variant_(cfg_.prior.variant),
      part_(connected_components(data_.graph)),
      rho_sd_(cfg_.rho_proposal_sd) {
  cfg_.validate();
  data_.validate();
  if (variant_ != ModelVariant::plain && data_.covariate_dim() == 0) {
    throw std::invalid_argument("regression variants need covariates in the dataset");
  }
  if (variant_ == ModelVariant::plain && data_.covariate_dim() > 0) {
    throw std::invalid_argument("covariates supplied but the model variant ignores them");
  }
  RngStream init_rng(cfg_.seed);
  initialize(init_rng);
}

void GibbsSampler::set_data(Dataset data) {
  data.validate();
  if (data.n_areas() != data_.n_areas() || data.covariate_dim() != data_.covariate_dim()) {
    throw std::invalid_argument("replacement data must keep the area and covariate shape");
  }
  for (int i = 0; i < data_.n_areas(); ++i) {
    if (data.y[i].size() != data_.y[i].size()) {
      throw std::invalid_argument("replacement data must keep per-area observation counts");
    }
  }
  data_ = std::move(data);
}

void GibbsSampler::initialize(RngStream& rng) {
  const int h = cfg_.prior.H;
  const int hm1 = h - 1;
  const int n_areas = data_.n_areas();
  const int d = data_.covariate_dim();

  state_ = MixtureState{};
  state_.allocations.resize(n_areas);
  for (int i = 0; i < n_areas; ++i) {
    state_.allocations[i].resize(data_.y[i].size());
    for (auto& s : state_.allocations[i]) s = rng.uniform_int(h);
  }
  state_.atoms.resize(h);
  for (auto& atom : state_.atoms) {
    atom.sigma2 = rng.inv_gamma(cfg_.prior.a, cfg_.prior.b);
    atom.mu = rng.normal(cfg_.prior.mu0, std::sqrt(atom.sigma2 / cfg_.prior.lambda));
    if (variant_ == ModelVariant::m2) atom.beta = Vector::Zero(d);
  }
  if (variant_ == ModelVariant::m1) state_.beta = Vector::Zero(d);
  state_.w_tilde.assign(n_areas, Vector::Zero(hm1));
  state_.sigma = cfg_.prior.nu > h ? Matrix(cfg_.prior.scale_matrix() / (cfg_.prior.nu - h))
                                   : Matrix(Matrix::Identity(hm1, hm1));
  state_.rho = 0.5;
  state_.m_tilde.assign(part_.count, Vector::Zero(hm1));
  omega_ = Matrix::Ones(n_areas, hm1);
  rho_sd_ = cfg_.rho_proposal_sd;
  adapt_step_ = 0;
}

Vector GibbsSampler::residuals() const {
  Vector r(data_.n_observations());
  int pos = 0;
  for (int i = 0; i < data_.n_areas(); ++i) {
    for (int j = 0; j < data_.y[i].size(); ++j) {
      double shift = 0.0;
      if (variant_ == ModelVariant::m1) shift = state_.beta.dot(data_.x[i].row(j));
      r(pos++) = data_.y[i](j) - shift;
    }
  }
  return r;
}

void GibbsSampler::update_allocations(RngStream& rng) {
  const int h = state_.H();
  Vector terms(h);
  for (int i = 0; i < data_.n_areas(); ++i) {
    const Vector lw = log_weights_from_alr(state_.w_tilde[i]);
    for (int j = 0; j < data_.y[i].size(); ++j) {
      const double y = data_.y[i](j);
      double shared = 0.0;
      if (variant_ == ModelVariant::m1) shared = state_.beta.dot(data_.x[i].row(j));
      for (int k = 0; k < h; ++k) {
        double shift = shared;
        if (variant_ == ModelVariant::m2) shift = state_.atoms[k].beta.dot(data_.x[i].row(j));
        terms(k) = lw(k) +
                   log_normal_pdf(y, state_.atoms[k].mu + shift, state_.atoms[k].sigma2);
      }
      try {
        state_.allocations[i][j] = rng.categorical_log(terms);
      } catch (const std::exception&) {
        throw std::runtime_error("all component densities vanished at area " +
                                 std::to_string(i) + ", observation " + std::to_string(j) +
                                 ", y = " + std::to_string(y));
      }
    }
  }
}

void GibbsSampler::update_atoms(RngStream& rng) {
  if (variant_ == ModelVariant::m2) {
    throw std::invalid_argument("component regressions replace the atom update under m2");
  }
  const int h = state_.H();
  const Vector r = residuals();
  // Welford accumulators per component.
  std::vector<double> n(h, 0.0), mean(h, 0.0), m2(h, 0.0);
  int pos = 0;
  for (int i = 0; i < data_.n_areas(); ++i) {
    for (int j = 0; j < data_.y[i].size(); ++j, ++pos) {
      const int s = state_.allocations[i][j];
      n[s] += 1.0;
      const double delta = r(pos) - mean[s];
      mean[s] += delta / n[s];
      m2[s] += delta * (r(pos) - mean[s]);
    }
  }
  const auto& pr = cfg_.prior;
  for (int k = 0; k < h; ++k) {
    const double lambda_n = pr.lambda + n[k];
    const double mu_n = (pr.lambda * pr.mu0 + n[k] * mean[k]) / lambda_n;
    const double a_n = pr.a + 0.5 * n[k];
    const double dev = mean[k] - pr.mu0;
    const double b_n = pr.b + 0.5 * m2[k] + 0.5 * pr.lambda * n[k] * dev * dev / lambda_n;
    state_.atoms[k].sigma2 = rng.inv_gamma(a_n, b_n);
    state_.atoms[k].mu = rng.normal(mu_n, std::sqrt(state_.atoms[k].sigma2 / lambda_n));
  }
}

void GibbsSampler::update_beta(RngStream& rng) {
  if (variant_ != ModelVariant::m1) {
    throw std::invalid_argument("the shared coefficient update applies to m1 only");
  }
  const int d = data_.covariate_dim();
  Matrix prec = Matrix::Identity(d, d) / cfg_.prior.sigma2_beta;
  Vector rhs = Vector::Zero(d);
  for (int i = 0; i < data_.n_areas(); ++i) {
    for (int j = 0; j < data_.y[i].size(); ++j) {
      const int s = state_.allocations[i][j];
      const Vector x = data_.x[i].row(j).transpose();
      const double inv_var = 1.0 / state_.atoms[s].sigma2;
      prec.noalias() += inv_var * x * x.transpose();
      rhs.noalias() += inv_var * (data_.y[i](j) - state_.atoms[s].mu) * x;
    }
  }
  Eigen::LLT<Matrix> llt(prec);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("coefficient posterior precision is not positive definite");
  }
  const Vector mean = llt.solve(rhs);
  const Vector z = rng.normal_vector(d);
  state_.beta = mean + Matrix(llt.matrixL()).transpose().triangularView<Eigen::Upper>().solve(z);
}

void GibbsSampler::update_component_regression(RngStream& rng) {
  if (variant_ != ModelVariant::m2) {
    throw std::invalid_argument("component regressions apply to m2 only");
  }
  const int h = state_.H();
  const int d = data_.covariate_dim();
  const int p = d + 1;
  const auto& pr = cfg_.prior;
  for (int k = 0; k < h; ++k) {
    Matrix delta = pr.m2_prior_precision * Matrix::Identity(p, p);
    Vector zty = Vector::Zero(p);
    double yty = 0.0;
    double n_h = 0.0;
    for (int i = 0; i < data_.n_areas(); ++i) {
      for (int j = 0; j < data_.y[i].size(); ++j) {
        if (state_.allocations[i][j] != k) continue;
        Vector z(p);
        z(0) = 1.0;
        z.tail(d) = data_.x[i].row(j).transpose();
        delta.noalias() += z * z.transpose();
        zty.noalias() += data_.y[i](j) * z;
        yty += data_.y[i](j) * data_.y[i](j);
        n_h += 1.0;
      }
    }
    Eigen::LLT<Matrix> llt(delta);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("component regression precision is not positive definite");
    }
    const Vector mu_p = llt.solve(zty);
    const double a_p = pr.a + 0.5 * n_h;
    const double b_p = pr.b + 0.5 * (yty - mu_p.dot(delta * mu_p));
    const double sigma2 = rng.inv_gamma(a_p, b_p);
    const Vector z = rng.normal_vector(p);
    const Vector coef =
        mu_p + std::sqrt(sigma2) *
                   Matrix(llt.matrixL()).transpose().triangularView<Eigen::Upper>().solve(z);
    state_.atoms[k].mu = coef(0);
    state_.atoms[k].beta = coef.tail(d);
    state_.atoms[k].sigma2 = sigma2;
  }
}

void GibbsSampler::update_sigma(RngStream& rng) {
  const int h = state_.H();
  if (h == 1) return;
  const int n_areas = data_.n_areas();
  const Matrix p = precision_matrix(data_.graph, state_.rho);
  Matrix resid(n_areas, h - 1);
  for (int i = 0; i < n_areas; ++i) {
    resid.row(i) = (state_.w_tilde[i] - state_.m_tilde[part_.label[i]]).transpose();
  }
  Matrix v_p = resid.transpose() * p * resid + cfg_.prior.scale_matrix();
  v_p = 0.5 * (v_p + v_p.transpose());
  state_.sigma = sample_inv_wishart(cfg_.prior.nu + n_areas, v_p, rng);
}

double GibbsSampler::log_weight_field_density(double rho) const {
  const int h = state_.H();
  if (h == 1) return 0.0;
  const int n_areas = data_.n_areas();
  const int hm1 = h - 1;
  const Matrix p = precision_matrix(data_.graph, rho);
  Matrix resid(n_areas, hm1);
  for (int i = 0; i < n_areas; ++i) {
    resid.row(i) = (state_.w_tilde[i] - state_.m_tilde[part_.label[i]]).transpose();
  }
  Eigen::LLT<Matrix> sig_llt(state_.sigma);
  if (sig_llt.info() != Eigen::Success) {
    throw std::runtime_error("sigma is not positive definite");
  }
  const double logdet_sigma =
      2.0 * Matrix(sig_llt.matrixL()).diagonal().array().log().sum();
  double logdet_p = 0.0;
  for (const auto& members : part_.members) {
    const int n = static_cast<int>(members.size());
    Matrix block(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) block(r, c) = p(members[r], members[c]);
    Eigen::LLT<Matrix> llt(block);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("precision block is not positive definite");
    }
    logdet_p += 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  }
  const Matrix siginv = sig_llt.solve(Matrix::Identity(hm1, hm1));
  const double quad = (siginv * (resid.transpose() * p * resid)).trace();
  return 0.5 * (hm1 * logdet_p - n_areas * logdet_sigma) - 0.5 * quad -
         0.5 * n_areas * hm1 * kLog2Pi;
}

bool GibbsSampler::update_rho(RngStream& rng) {
  const double current = state_.rho;
  const double proposal = rng.truncated_normal(current, rho_sd_, 0.0, 1.0);
  // Truncation normalizer of a proposal centered at x with sd rho_sd_.
  const auto log_window = [&](double x) {
    return std::log(std_normal_cdf((1.0 - x) / rho_sd_) - std_normal_cdf(-x / rho_sd_));
  };
  const double log_ratio = log_weight_field_density(proposal) -
                           log_weight_field_density(current) + log_window(current) -
                           log_window(proposal);
  const bool accept = std::log(rng.uniform()) < log_ratio;
  if (accept) state_.rho = proposal;
  if (adapt_) {
    ++adapt_step_;
    const double step = std::pow(static_cast<double>(adapt_step_), -0.6);
    rho_sd_ *= std::exp(step * ((accept ? 1.0 : 0.0) - cfg_.target_acceptance));
    rho_sd_ = std::min(std::max(rho_sd_, 1e-4), 5.0);
  }
  return accept;
}

std::pair<double, double> GibbsSampler::scalar_conditional(int area, int h,
                                                            const Matrix& precision,
                                                            const Matrix& siginv) const {
  const int hm1 = state_.H() - 1;
  const Vector& m_i = state_.m_tilde[part_.label[area]];
  // Joint precision of the field is (F - rho G) kron Sigma^{-1}; the scalar
  // conditional of coordinate (area, h) follows from its row.
  const double q = precision(area, area) * siginv(h, h);
  double cross = 0.0;
  for (int t = 0; t < hm1; ++t) {
    if (t != h) cross += siginv(h, t) * (state_.w_tilde[area](t) - m_i(t));
  }
  cross *= precision(area, area);
  for (int j : data_.graph.neighbors(area)) {
    const Vector& m_j = state_.m_tilde[part_.label[j]];
    cross += precision(area, j) * siginv.row(h).dot(state_.w_tilde[j] - m_j);
  }
  return {m_i(h) - cross / q, 1.0 / q};
}

std::pair<double, double> GibbsSampler::weight_prior_conditional(int area, int h) const {
  if (state_.H() == 1) throw std::invalid_argument("the single-component state has no weights");
  if (area < 0 || area >= data_.n_areas() || h < 0 || h >= state_.H() - 1) {
    throw std::invalid_argument("weight coordinate out of range");
  }
  const Matrix p = precision_matrix(data_.graph, state_.rho);
  const Matrix siginv = symmetric_inverse(state_.sigma);
  return scalar_conditional(area, h, p, siginv);
}

std::pair<double, double> GibbsSampler::weight_posterior(double mu_star, double var_star,
                                                         int n_allocated, int n_total,
                                                         double omega, double c) {
  const double var_hat = 1.0 / (1.0 / var_star + omega);
  const double mu_hat =
      (mu_star / var_star + n_allocated - 0.5 * n_total + omega * c) * var_hat;
  return {mu_hat, var_hat};
}

void GibbsSampler::update_weights(RngStream& rng) {
  const int h = state_.H();
  if (h == 1) return;
  const int hm1 = h - 1;
  const Matrix p = precision_matrix(data_.graph, state_.rho);
  const Matrix siginv = symmetric_inverse(state_.sigma);

  for (int i = 0; i < data_.n_areas(); ++i) {
    const int n_i = static_cast<int>(data_.y[i].size());
    std::vector<int> counts(h, 0);
    for (int s : state_.allocations[i]) ++counts[s];

    for (int k = 0; k < hm1; ++k) {
      // C_ih over the other coordinates, reference included as zero.
      Vector others(hm1);
      int pos = 0;
      for (int t = 0; t < hm1; ++t) {
        if (t != k) others(pos++) = state_.w_tilde[i](t);
      }
      others(pos) = 0.0;
      const double c_ih = log_sum_exp(others);
      const double eta = state_.w_tilde[i](k) - c_ih;

      const auto [mu_star, var_star] = scalar_conditional(i, k, p, siginv);
      if (n_i > 0) {
        const double omega = pg_.draw(n_i, eta, rng);
        omega_(i, k) = omega;
        const auto [mu_hat, var_hat] =
            weight_posterior(mu_star, var_star, counts[k], n_i, omega, c_ih);
        state_.w_tilde[i](k) = rng.normal(mu_hat, std::sqrt(var_hat));
      } else {
        state_.w_tilde[i](k) = rng.normal(mu_star, std::sqrt(var_star));
      }
    }
  }
}

void GibbsSampler::update_m(RngStream& rng) {
  const int h = state_.H();
  if (h == 1) return;
  const int hm1 = h - 1;
  const Matrix p = precision_matrix(data_.graph, state_.rho);
  const Matrix siginv = symmetric_inverse(state_.sigma);

  for (int c = 0; c < part_.count; ++c) {
    const auto& members = part_.members[c];
    double total = 0.0;
    Vector t = Vector::Zero(hm1);
    for (int j : members) {
      double colsum = 0.0;
      for (int i : members) colsum += p(i, j);
      total += colsum;
      t.noalias() += colsum * state_.w_tilde[j];
    }
    Matrix prec = total * siginv + Matrix::Identity(hm1, hm1) / cfg_.prior.eta2;
    Eigen::LLT<Matrix> llt(prec);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("location posterior precision is not positive definite");
    }
    const Vector mean = llt.solve(siginv * t);
    const Vector z = rng.normal_vector(hm1);
    state_.m_tilde[c] =
        mean + Matrix(llt.matrixL()).transpose().triangularView<Eigen::Upper>().solve(z);
  }
}

void GibbsSampler::sweep(RngStream& rng) {
  const auto step = [](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("update ") + name + ": " + e.what());
    }
  };
  step("allocations", [&] { update_allocations(rng); });
  if (variant_ == ModelVariant::m2) {
    step("component_regression", [&] { update_component_regression(rng); });
  } else {
    step("atoms", [&] { update_atoms(rng); });
  }
  if (variant_ == ModelVariant::m1) {
    step("beta", [&] { update_beta(rng); });
  }
  step("sigma", [&] { update_sigma(rng); });
  step("rho", [&] { update_rho(rng); });
  step("weights", [&] { update_weights(rng); });
  step("m", [&] { update_m(rng); });
#ifndef NDEBUG
  state_.validate();
#endif
}

Chain GibbsSampler::run() {
  const auto start = std::chrono::steady_clock::now();
  RngStream rng(cfg_.seed);
  initialize(rng);
  pg_.reset_counters();

  const int total = cfg_.n_burnin + cfg_.thin * cfg_.n_samples;
  Chain chain;
  chain.states.reserve(cfg_.n_samples);
  chain.log_lik.resize(cfg_.n_samples, data_.n_observations());
  int stored = 0;
  long long post_accepts = 0;
  long long post_steps = 0;

  for (int iter = 1; iter <= total; ++iter) {
    adapt_ = iter <= cfg_.n_burnin;
    try {
      const double rho_before = state_.rho;
      sweep(rng);
      if (iter > cfg_.n_burnin) {
        ++post_steps;
        if (state_.rho != rho_before) ++post_accepts;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("iteration " + std::to_string(iter) + ", " + e.what());
    }
    if (iter > cfg_.n_burnin && (iter - cfg_.n_burnin) % cfg_.thin == 0) {
      chain.states.push_back(state_);
      chain.log_lik.row(stored++) = log_likelihood_row(state_, data_).transpose();
    }
  }

  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
  chain.metadata["version"] = kVersion;
  chain.metadata["seed"] = std::to_string(cfg_.seed);
  chain.metadata["n_burnin"] = std::to_string(cfg_.n_burnin);
  chain.metadata["n_samples"] = std::to_string(cfg_.n_samples);
  chain.metadata["thin"] = std::to_string(cfg_.thin);
  chain.metadata["H"] = std::to_string(cfg_.prior.H);
  chain.metadata["variant"] = variant_name(variant_);
  chain.metadata["rho_acceptance"] =
      std::to_string(post_steps > 0 ? static_cast<double>(post_accepts) / post_steps : 0.0);
  chain.metadata["rho_proposal_sd"] = std::to_string(rho_sd_);
  chain.metadata["pg_exact"] = std::to_string(pg_.counters().exact);
  chain.metadata["pg_approximate"] = std::to_string(pg_.counters().approximate);
  chain.metadata["wall_time_s"] = std::to_string(elapsed.count());
  return chain;
}

}  // namespace spmix
