#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "spmix/data_io.hpp"
#include "spmix/gibbs.hpp"
#include "spmix/numeric.hpp"
#include "test_util.hpp"

using namespace spmix;
using namespace spmix::testutil;

namespace {

bool states_equal(const MixtureState& a, const MixtureState& b) {
  if (a.rho != b.rho || a.allocations != b.allocations) return false;
  if ((a.sigma - b.sigma).cwiseAbs().maxCoeff() != 0.0) return false;
  for (std::size_t k = 0; k < a.atoms.size(); ++k) {
    if (a.atoms[k].mu != b.atoms[k].mu || a.atoms[k].sigma2 != b.atoms[k].sigma2) return false;
  }
  for (int i = 0; i < a.n_areas(); ++i) {
    if ((a.w_tilde[i] - b.w_tilde[i]).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  for (std::size_t c = 0; c < a.m_tilde.size(); ++c) {
    if ((a.m_tilde[c] - b.m_tilde[c]).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

// Geweke configuration: hyperparameters with finite prior moments for the
// tested statistics (the variance-two defaults do not have them).
ChainConfig geweke_config() {
  ChainConfig cfg;
  cfg.prior.H = 3;
  cfg.prior.a = 4.0;
  cfg.prior.b = 4.0;
  cfg.prior.lambda = 0.5;
  cfg.prior.nu = 10.0;
  cfg.prior.eta2 = 1.0;
  cfg.n_burnin = 0;
  cfg.n_samples = 1;
  cfg.thin = 1;
  return cfg;
}

// One draw of the full latent state from the model prior, with the weight
// field sampled through its per-component Cholesky factorization.
MixtureState prior_draw(const PriorConfig& prior, const ProximityGraph& graph, RngStream& rng) {
  const int h = prior.H;
  const int hm1 = h - 1;
  const int n = graph.n_areas();
  MixtureState st;
  st.atoms.resize(h);
  for (auto& atom : st.atoms) {
    atom.sigma2 = rng.inv_gamma(prior.a, prior.b);
    atom.mu = rng.normal(prior.mu0, std::sqrt(atom.sigma2 / prior.lambda));
  }
  st.rho = rng.uniform();
  st.sigma = inv_wishart(prior.nu, prior.scale_matrix(), rng);
  st.m_tilde = {std::sqrt(prior.eta2) * rng.normal_vector(hm1)};
  const Matrix p = precision_matrix(graph, st.rho);
  const Matrix z = rng.normal_matrix(n, hm1);
  const Eigen::LLT<Matrix> lp(p), ls(st.sigma);
  const Matrix x = Matrix(lp.matrixL()).transpose().triangularView<Eigen::Upper>().solve(z) *
                   Matrix(ls.matrixL()).transpose();
  st.w_tilde.resize(n);
  st.allocations.resize(n);
  for (int i = 0; i < n; ++i) st.w_tilde[i] = st.m_tilde[0] + x.row(i).transpose();
  return st;
}

void draw_allocations_and_data(MixtureState& st, Dataset& data, RngStream& rng) {
  for (int i = 0; i < st.n_areas(); ++i) {
    const Vector lw = log_weights_from_alr(st.w_tilde[i]);
    for (int j = 0; j < data.y[i].size(); ++j) {
      const int k = rng.categorical_log(lw);
      st.allocations[i][j] = k;
      data.y[i](j) = rng.normal(st.atoms[k].mu, std::sqrt(st.atoms[k].sigma2));
    }
  }
}

double z_stat(const std::vector<double>& mc, const std::vector<double>& sc) {
  const double se_mc = std::sqrt(variance_of(mc) / static_cast<double>(mc.size()));
  const double se_sc = batch_means_se(sc, 100);
  return (mean_of(mc) - mean_of(sc)) / std::sqrt(se_mc * se_mc + se_sc * se_sc);
}

std::vector<double> squared(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
  return out;
}

}  // namespace

TEST_CASE("storage bookkeeping: burn-in and thinning select the right sweeps") {
  const auto sim = generate_scenario({ScenarioId::three, 3});
  ChainConfig cfg;
  cfg.prior.H = 3;
  cfg.n_burnin = 4;
  cfg.n_samples = 3;
  cfg.thin = 2;
  cfg.seed = 11;
  const Chain full = GibbsSampler(cfg, sim.data).run();
  REQUIRE(full.states.size() == 3);
  CHECK(full.log_lik.rows() == 3);
  CHECK(full.log_lik.cols() == sim.data.n_observations());

  // Mirror the schedule sweep by sweep, snapshotting every iteration: the
  // stored states must be exactly those of iterations 6, 8 and 10.
  GibbsSampler mirror(cfg, sim.data);
  RngStream rng(cfg.seed);
  mirror.initialize(rng);
  std::vector<MixtureState> snaps;
  for (int iter = 1; iter <= cfg.n_burnin + cfg.thin * cfg.n_samples; ++iter) {
    mirror.set_adaptation(iter <= cfg.n_burnin);
    mirror.sweep(rng);
    snaps.push_back(mirror.state());
  }
  REQUIRE(snaps.size() == 10);
  CHECK(states_equal(full.states[0], snaps[5]));
  CHECK(states_equal(full.states[1], snaps[7]));
  CHECK(states_equal(full.states[2], snaps[9]));
  CHECK_FALSE(states_equal(full.states[0], snaps[4]));
  CHECK((full.log_lik.row(2).transpose() - log_likelihood_row(snaps[9], sim.data)).cwiseAbs().maxCoeff() ==
        0.0);

  for (const char* key :
       {"version", "seed", "n_burnin", "n_samples", "thin", "H", "variant", "rho_acceptance",
        "rho_proposal_sd", "pg_exact", "pg_approximate", "wall_time_s"}) {
    CAPTURE(key);
    CHECK(full.metadata.count(key) == 1);
  }
  CHECK(full.metadata.at("version") == "spmix 0.1.0");
  CHECK(full.metadata.at("seed") == "11");
  CHECK(full.metadata.at("H") == "3");
  CHECK(full.metadata.at("variant") == "plain");
}

TEST_CASE("equal seeds give bit-identical chains") {
  const auto sim = generate_scenario({ScenarioId::three, 8});
  ChainConfig cfg;
  cfg.prior.H = 4;
  cfg.n_burnin = 20;
  cfg.n_samples = 10;
  cfg.thin = 2;
  cfg.seed = 123;
  const Chain a = GibbsSampler(cfg, sim.data).run();
  const Chain b = GibbsSampler(cfg, sim.data).run();
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t s = 0; s < a.states.size(); ++s) CHECK(states_equal(a.states[s], b.states[s]));
  CHECK((a.log_lik - b.log_lik).cwiseAbs().maxCoeff() == 0.0);

  ChainConfig other = cfg;
  other.seed = 124;
  const Chain c = GibbsSampler(other, sim.data).run();
  CHECK_FALSE(states_equal(a.states.back(), c.states.back()));
}

TEST_CASE("joint-distribution check: prior simulator vs Gibbs round trips") {
  const ChainConfig cfg = geweke_config();
  const ProximityGraph graph(2, {{0, 1}});
  const int n_i = 5;

  // Marginal side: independent prior draws; the tested statistics do not
  // involve the data, so the observation step can be skipped.
  const int n_mc = 50000;
  RngStream mc_rng(2024);
  std::vector<double> mc_rho, mc_s11, mc_w11, mc_mu1;
  mc_rho.reserve(n_mc);
  for (int t = 0; t < n_mc; ++t) {
    const MixtureState st = prior_draw(cfg.prior, graph, mc_rng);
    mc_rho.push_back(st.rho);
    mc_s11.push_back(st.sigma(0, 0));
    mc_w11.push_back(st.w_tilde[0](0));
    mc_mu1.push_back(st.atoms[0].mu);
  }

  // Successive side: alternate a full Gibbs sweep with regeneration of the
  // observations from the current latent state.
  Dataset data;
  data.graph = graph;
  data.y = {Vector::Zero(n_i), Vector::Zero(n_i)};
  RngStream sc_rng(4048);
  MixtureState start = prior_draw(cfg.prior, graph, sc_rng);
  for (auto& a : start.allocations) a.assign(n_i, 0);
  draw_allocations_and_data(start, data, sc_rng);

  GibbsSampler sampler(cfg, data);
  sampler.state() = start;

  const int n_sc = 50000;
  std::vector<double> sc_rho, sc_s11, sc_w11, sc_mu1;
  sc_rho.reserve(n_sc);
  Dataset work = data;
  for (int t = 0; t < n_sc; ++t) {
    sampler.sweep(sc_rng);
    draw_allocations_and_data(sampler.state(), work, sc_rng);
    sampler.set_data(work);
    sc_rho.push_back(sampler.state().rho);
    sc_s11.push_back(sampler.state().sigma(0, 0));
    sc_w11.push_back(sampler.state().w_tilde[0](0));
    sc_mu1.push_back(sampler.state().atoms[0].mu);
  }

  const std::vector<std::pair<const char*, double>> stats = {
      {"rho mean", z_stat(mc_rho, sc_rho)},
      {"rho second moment", z_stat(squared(mc_rho), squared(sc_rho))},
      {"Sigma11 mean", z_stat(mc_s11, sc_s11)},
      {"Sigma11 second moment", z_stat(squared(mc_s11), squared(sc_s11))},
      {"w11 mean", z_stat(mc_w11, sc_w11)},
      {"w11 second moment", z_stat(squared(mc_w11), squared(sc_w11))},
      {"mu1 mean", z_stat(mc_mu1, sc_mu1)},
      {"mu1 second moment", z_stat(squared(mc_mu1), squared(sc_mu1))},
  };
  for (const auto& [name, z] : stats) {
    CAPTURE(name);
    CHECK(std::abs(z) < 4.0);
  }
}

TEST_CASE("weights block alone reproduces its full conditional") {
  // Single area, two components: the alr weight is scalar with a logistic
  // likelihood tilt, so the exact conditional density is available on a
  // grid. Allocations stay fixed at 3 + 7.
  ChainConfig cfg;
  cfg.prior.H = 2;
  cfg.n_burnin = 0;
  cfg.n_samples = 1;
  cfg.thin = 1;
  Dataset data;
  data.graph = ProximityGraph(1, {});
  data.y = {Vector::Zero(10)};
  GibbsSampler s(cfg, data);
  auto& st = s.state();
  st.m_tilde[0](0) = 0.4;
  st.sigma(0, 0) = 1.2;
  st.rho = 0.6;
  for (int j = 0; j < 10; ++j) st.allocations[0][j] = j < 3 ? 0 : 1;

  const double mu_star = 0.4;
  const double var_star = 1.2 / (1.0 - 0.6);
  const auto [got_mu, got_var] = s.weight_prior_conditional(0, 0);
  REQUIRE(got_mu == doctest::Approx(mu_star).epsilon(1e-12));
  REQUIRE(got_var == doctest::Approx(var_star).epsilon(1e-12));

  const int grid_n = 40001;
  std::vector<double> grid(grid_n), logf(grid_n);
  double logmax = -1e300;
  for (int g = 0; g < grid_n; ++g) {
    grid[g] = -14.0 + 26.0 * g / (grid_n - 1);
    const double v = grid[g];
    logf[g] = -0.5 * (v - mu_star) * (v - mu_star) / var_star + 3.0 * v -
              10.0 * std::log1p(std::exp(v));
    logmax = std::max(logmax, logf[g]);
  }
  std::vector<double> cdf(grid_n, 0.0);
  for (int g = 1; g < grid_n; ++g) {
    const double fa = std::exp(logf[g - 1] - logmax);
    const double fb = std::exp(logf[g] - logmax);
    cdf[g] = cdf[g - 1] + 0.5 * (fa + fb) * (grid[g] - grid[g - 1]);
  }
  for (int g = 0; g < grid_n; ++g) cdf[g] /= cdf[grid_n - 1];

  RngStream rng(606);
  const int n_draws = 10000, thin = 20;
  for (int t = 0; t < 2000; ++t) s.update_weights(rng);
  std::vector<double> draws;
  draws.reserve(n_draws);
  for (int t = 0; t < n_draws * thin; ++t) {
    s.update_weights(rng);
    if (t % thin == thin - 1) draws.push_back(st.w_tilde[0](0));
  }
  const double d = ks_statistic_vs_cdf(draws, grid, cdf);
  CHECK(d < ks_threshold_one_sample(0.001, draws.size()));
}

TEST_CASE("rho block alone reproduces its full conditional") {
  ChainConfig cfg;
  cfg.prior.H = 3;
  cfg.n_burnin = 0;
  cfg.n_samples = 1;
  cfg.thin = 1;
  Dataset data;
  data.graph = ProximityGraph(2, {{0, 1}});
  data.y = {Vector::Zero(1), Vector::Zero(1)};
  GibbsSampler s(cfg, data);
  auto& st = s.state();
  st.w_tilde[0] << 0.9, -0.4;
  st.w_tilde[1] << 0.7, -0.1;
  st.m_tilde[0] << 0.2, 0.1;
  st.sigma << 0.8, 0.3, 0.3, 0.6;
  s.set_adaptation(false);
  s.set_rho_proposal_sd(0.1);

  // Exact conditional on a midpoint grid: the Gaussian field density as a
  // function of rho with a flat prior on (0, 1).
  const Matrix siginv = st.sigma.inverse();
  Matrix resid(2, 2);
  resid.row(0) = (st.w_tilde[0] - st.m_tilde[0]).transpose();
  resid.row(1) = (st.w_tilde[1] - st.m_tilde[0]).transpose();
  const int grid_n = 20001;
  std::vector<double> grid(grid_n), logf(grid_n);
  double logmax = -1e300;
  for (int g = 0; g < grid_n; ++g) {
    grid[g] = (g + 0.5) / grid_n;
    const Matrix p = precision_matrix(data.graph, grid[g]);
    const Matrix quad = resid.transpose() * p * resid;
    logf[g] = 0.5 * 2.0 * std::log(1.0 - grid[g] * grid[g]) - 0.5 * (siginv * quad).trace();
    logmax = std::max(logmax, logf[g]);
  }
  std::vector<double> cdf(grid_n, 0.0);
  for (int g = 1; g < grid_n; ++g) {
    cdf[g] = cdf[g - 1] + 0.5 * (std::exp(logf[g - 1] - logmax) + std::exp(logf[g] - logmax)) *
                              (grid[g] - grid[g - 1]);
  }
  for (int g = 0; g < grid_n; ++g) cdf[g] /= cdf[grid_n - 1];

  RngStream rng(707);
  for (int t = 0; t < 2000; ++t) s.update_rho(rng);
  const int n_draws = 10000, thin = 50;
  std::vector<double> draws;
  draws.reserve(n_draws);
  for (int t = 0; t < n_draws * thin; ++t) {
    s.update_rho(rng);
    if (t % thin == thin - 1) draws.push_back(st.rho);
  }
  const double d = ks_statistic_vs_cdf(draws, grid, cdf);
  CHECK(d < ks_threshold_one_sample(0.001, draws.size()));
}

TEST_CASE("over-dispersed starts converge to the same density estimate") {
  const auto sim = generate_scenario({ScenarioId::three, 21});
  ChainConfig cfg;
  cfg.prior.H = 4;
  cfg.n_burnin = 0;
  cfg.n_samples = 1;
  cfg.thin = 1;

  const int burn = 2500, keep = 1000, thin = 3;
  const Vector grid = Vector::LinSpaced(241, -12.0, 12.0);

  const auto run_chain = [&](double atom_center, double atom_scale, double wt, double rho,
                             int alloc, std::uint64_t seed) {
    GibbsSampler s(cfg, sim.data);
    auto& st = s.state();
    for (int k = 0; k < 4; ++k) {
      st.atoms[k].mu = atom_center + 0.5 * k;
      st.atoms[k].sigma2 = atom_scale;
    }
    for (auto& w : st.w_tilde) w.setConstant(wt);
    for (auto& m : st.m_tilde) m.setConstant(-wt);
    st.rho = rho;
    for (auto& area : st.allocations) {
      for (auto& v : area) v = alloc;
    }
    RngStream rng(seed);
    Chain chain;
    for (int t = 0; t < burn + keep * thin; ++t) {
      s.sweep(rng);
      if (t >= burn && (t - burn) % thin == 0) chain.states.push_back(s.state());
    }
    return chain;
  };

  const Chain a = run_chain(-8.0, 25.0, 3.0, 0.05, 0, 31);
  const Chain b = run_chain(8.0, 0.04, -3.0, 0.95, 3, 32);
  REQUIRE(a.states.size() == keep);
  REQUIRE(b.states.size() == keep);

  const double step = grid(1) - grid(0);
  for (int i = 0; i < sim.data.n_areas(); ++i) {
    const DensityEstimate da = posterior_mean_density(a, i, grid);
    const DensityEstimate db = posterior_mean_density(b, i, grid);
    double l1 = 0.0;
    for (int g = 0; g < grid.size(); ++g) {
      const double w = (g == 0 || g == grid.size() - 1) ? 0.5 : 1.0;
      l1 += w * std::abs(da.mean(g) - db.mean(g)) * step;
    }
    CAPTURE(i);
    CHECK(l1 < 0.05);
  }
}
