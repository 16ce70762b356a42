#pragma once

#include <map>
#include <string>
#include <vector>

#include "spmix/graph.hpp"
#include "spmix/numeric.hpp"

namespace spmix {

enum class ModelVariant { plain, m1, m2 };

// One mixture component kernel. beta is populated only under the
// component-specific regression variant.
struct Atom {
  double mu = 0.0;
  double sigma2 = 1.0;
  Vector beta;
};

// Full parameter state of the spatial mixture. Weights live in alr
// coordinates (H-1 per area, reference coordinate fixed at zero); the
// variant is implied by which regression fields are populated. Snapshots
// are plain values, so concurrent read-only evaluation is safe.
struct MixtureState {
  std::vector<Atom> atoms;                    // H kernels
  std::vector<Vector> w_tilde;                // per area, H-1 coordinates
  std::vector<std::vector<int>> allocations;  // per area, 0-based component ids
  Matrix sigma;                               // (H-1) x (H-1), SPD
  double rho = 0.5;
  std::vector<Vector> m_tilde;                // per connected component
  Vector beta;                                // shared coefficients, M1 only

  int H() const { return static_cast<int>(atoms.size()); }
  int n_areas() const { return static_cast<int>(w_tilde.size()); }
  ModelVariant variant() const;
  void validate() const;
};

// Observations grouped by area. x is either empty (no covariates) or holds
// one N_i x d matrix per area with a common d.
struct Dataset {
  std::vector<Vector> y;
  std::vector<Matrix> x;
  ProximityGraph graph{1, {}};

  int n_areas() const { return static_cast<int>(y.size()); }
  int n_observations() const;
  int covariate_dim() const;
  void validate() const;
};

// Hyperparameters of the hierarchical prior. V empty means the identity
// scale matrix of order H-1.
struct PriorConfig {
  int H = 4;
  double mu0 = 0.0;
  double lambda = 0.1;
  double a = 2.0;
  double b = 2.0;
  double eta2 = 1.0;
  double nu = 100.0;
  Matrix V;
  ModelVariant variant = ModelVariant::plain;
  double sigma2_beta = 10.0;
  // Precision multiplier of the component-regression coefficient prior
  // N(0, sigma2_h / m2_prior_precision * I).
  double m2_prior_precision = 10.0;

  Matrix scale_matrix() const;
  void validate() const;
};

// Stored draws plus the per-state log-likelihood rows (row = stored state,
// column = observation in area-major order) and free-form run metadata.
struct Chain {
  std::vector<MixtureState> states;
  Matrix log_lik;
  std::map<std::string, std::string> metadata;
};

// Log weights of the H components implied by alr coordinates: log-softmax
// of (w_tilde, 0). Handles H = 1 (empty input) and large coordinates.
Vector log_weights_from_alr(const Vector& w_tilde);

// Mixture density at y for one area, optionally conditional on a covariate
// row. The covariate row must be present exactly when the state's variant
// uses regression terms.
double log_mixture_density(const MixtureState& state, int area, double y,
                           const Vector& x = Vector());
double mixture_density(const MixtureState& state, int area, double y,
                       const Vector& x = Vector());

// Log mixture density of every observation under one state, area-major.
Vector log_likelihood_row(const MixtureState& state, const Dataset& data);

// Mean of the area's mixture, optionally conditional on a covariate row:
// sum_h w_ih (mu_h + shift_h(x)).
double mixture_mean(const MixtureState& state, int area, const Vector& x = Vector());

struct DensityEstimate {
  Vector grid;
  Vector mean;
  Vector lo95;
  Vector hi95;
};

// Pointwise posterior mean and 95% credible band of the density over a
// grid, averaging across the stored states of a chain.
DensityEstimate posterior_mean_density(const Chain& chain, int area, const Vector& grid,
                                       const Vector& x = Vector());

}  // namespace spmix
