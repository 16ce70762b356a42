#pragma once

#include <cstdint>
#include <utility>

#include "spmix/graph.hpp"
#include "spmix/mixture_model.hpp"
#include "spmix/polya_gamma.hpp"
#include "spmix/rng.hpp"

namespace spmix {

inline constexpr char kVersion[] = "spmix 0.1.0";

struct ChainConfig {
  int n_burnin = 10000;
  int n_samples = 2000;  // stored states; total sweeps = n_burnin + thin * n_samples
  int thin = 5;
  std::uint64_t seed = 0;
  double rho_proposal_sd = 0.1;
  double target_acceptance = 0.44;
  PriorConfig prior;

  void validate() const;
};

// Blocked Gibbs sampler over the augmented state (mixture state plus the
// I x (H-1) matrix of Polya-Gamma latents). One sweep updates, in order:
// allocations, atoms (or component regressions), shared coefficients,
// Sigma, rho, weights, component locations. A sweep is sequential by
// contract; concurrency is obtained by running independent chains on
// independent streams.
class GibbsSampler {
 public:
  GibbsSampler(ChainConfig config, Dataset data);

  // Full schedule from the config seed: initialize, burn in with rho
  // proposal adaptation, then store every thin-th state and its
  // log-likelihood row. Deterministic given (config, data).
  Chain run();

  // Default initialization: uniform allocations, atoms from the base
  // measure, flat weights, prior-mean Sigma when defined, rho = 0.5,
  // zero locations and coefficients.
  void initialize(RngStream& rng);

  // One full sweep in the contract order. Errors gain the update name.
  void sweep(RngStream& rng);

  // Individual blocks, exposed so tests can drive them in isolation.
  void update_allocations(RngStream& rng);
  void update_atoms(RngStream& rng);
  void update_beta(RngStream& rng);
  void update_component_regression(RngStream& rng);
  void update_sigma(RngStream& rng);
  bool update_rho(RngStream& rng);  // true when the proposal was accepted
  void update_weights(RngStream& rng);
  void update_m(RngStream& rng);

  // Gaussian log density (constants included) of the current weight field
  // under the spatial prior evaluated at the given rho.
  double log_weight_field_density(double rho) const;

  // Scalar Gaussian conditional (mean, variance) of weight coordinate
  // (area, h) given every other coordinate of the field.
  std::pair<double, double> weight_prior_conditional(int area, int h) const;

  // Posterior (mean, variance) of one weight coordinate after Polya-Gamma
  // augmentation with latent omega and offset c.
  static std::pair<double, double> weight_posterior(double mu_star, double var_star,
                                                    int n_allocated, int n_total, double omega,
                                                    double c);

  MixtureState& state() { return state_; }
  const MixtureState& state() const { return state_; }
  Matrix& omega() { return omega_; }
  const Dataset& data() const { return data_; }
  // Replaces responses/covariates with same-shaped ones (simulator and
  // cross-validation support).
  void set_data(Dataset data);
  PolyaGammaSampler& pg() { return pg_; }
  ModelVariant variant() const { return variant_; }
  const ComponentPartition& partition() const { return part_; }

  double rho_proposal_sd() const { return rho_sd_; }
  void set_rho_proposal_sd(double sd) { rho_sd_ = sd; }
  void set_adaptation(bool on) { adapt_ = on; }

 private:
  Vector residuals() const;  // y minus the shared regression shift, area-major
  std::pair<double, double> scalar_conditional(int area, int h, const Matrix& precision,
                                               const Matrix& siginv) const;

  ChainConfig cfg_;
  Dataset data_;
  ModelVariant variant_;
  ComponentPartition part_;
  MixtureState state_;
  Matrix omega_;
  PolyaGammaSampler pg_;
  double rho_sd_;
  bool adapt_ = false;
  std::int64_t adapt_step_ = 0;
};

}  // namespace spmix
