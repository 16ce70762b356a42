#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spmix/data_io.hpp"
#include "spmix/gibbs.hpp"
#include "spmix/graph.hpp"
#include "spmix/logistic_mcar.hpp"
#include "spmix/metrics.hpp"
#include "spmix/mixture_model.hpp"
#include "spmix/numeric.hpp"
#include "spmix/rng.hpp"
#include "spmix/simplex.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace spmix;

// Shortest decimal form that round-trips the double, the same encoder the
// JSON writers use, so repeated seeded runs emit byte-identical text.
std::string num(double v) { return json(v).dump(); }

std::string digest_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string() + " for digesting");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf), in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 1099511628211ULL;
    }
  }
  std::ostringstream hex;
  hex << std::hex << std::setfill('0') << std::setw(16) << h;
  return hex.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path prepare_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// Record of one invocation: resolved flag values, input digests, outputs,
// wall time. Written atomically, last, into the output directory.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed, std::string config_echo)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["version"] = kVersion;
    doc_["seed"] = seed;
    doc_["config"] = std::move(config_echo);
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::array();
  }

  void add_input(const fs::path& path) { doc_["inputs"][path.string()] = digest_file(path); }
  void add_output(const std::string& relative) { doc_["outputs"].push_back(relative); }

  void write(const fs::path& dir) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    doc_["wall_time_s"] = elapsed.count();
    write_file_atomic(dir / "manifest.json", doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

Vector make_grid(double lo, double hi, int points) {
  if (!(hi > lo)) throw std::invalid_argument("grid upper bound must exceed the lower bound");
  return Vector::LinSpaced(points, lo, hi);
}

std::vector<std::string> split_fields(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double_field(const std::string& text, const std::string& context) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": cannot parse number '" + text + "'");
  }
  if (used != text.size()) {
    throw std::runtime_error(context + ": trailing junk in number '" + text + "'");
  }
  return v;
}

long parse_long_field(const std::string& text, const std::string& context) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(text, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": cannot parse integer '" + text + "'");
  }
  if (used != text.size()) {
    throw std::runtime_error(context + ": trailing junk in integer '" + text + "'");
  }
  return v;
}

Vector parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::string field;
  std::stringstream ss(text);
  while (std::getline(ss, field, ',')) vals.push_back(parse_double_field(field, "--covariate"));
  Vector x(static_cast<int>(vals.size()));
  for (int k = 0; k < x.size(); ++k) x(k) = vals[static_cast<std::size_t>(k)];
  return x;
}

// Per-area densities over one common grid, read back from the CSV layouts
// this tool writes (truth tables use a `density` column, estimates `mean`).
std::vector<GridDensity> read_density_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open density table " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty density table");
  const auto header = split_fields(line);
  int area_col = -1, grid_col = -1, value_col = -1;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[static_cast<std::size_t>(c)] == "area") area_col = c;
    if (header[static_cast<std::size_t>(c)] == "grid") grid_col = c;
    if (header[static_cast<std::size_t>(c)] == "density") value_col = c;
    if (header[static_cast<std::size_t>(c)] == "mean" && value_col < 0) value_col = c;
  }
  if (area_col < 0 || grid_col < 0 || value_col < 0) {
    throw std::runtime_error(path + ": header must name area, grid, and density (or mean) columns");
  }
  const int need = std::max(area_col, std::max(grid_col, value_col));
  std::vector<std::vector<double>> grids, values;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_fields(line);
    const std::string context = path + " row " + std::to_string(row);
    if (static_cast<int>(f.size()) <= need) throw std::runtime_error(context + ": too few fields");
    const long area = parse_long_field(f[static_cast<std::size_t>(area_col)], context);
    if (area == static_cast<long>(grids.size())) {
      grids.emplace_back();
      values.emplace_back();
    } else if (area != static_cast<long>(grids.size()) - 1) {
      throw std::runtime_error(context + ": area ids must be grouped and contiguous from 0");
    }
    grids.back().push_back(parse_double_field(f[static_cast<std::size_t>(grid_col)], context));
    values.back().push_back(parse_double_field(f[static_cast<std::size_t>(value_col)], context));
  }
  if (grids.empty()) throw std::runtime_error(path + ": no density rows");
  for (std::size_t i = 1; i < grids.size(); ++i) {
    if (grids[i] != grids[0]) throw std::runtime_error(path + ": areas use different grids");
  }
  std::vector<GridDensity> out(grids.size());
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const int n = static_cast<int>(grids[i].size());
    out[i].grid.resize(n);
    out[i].values.resize(n);
    for (int g = 0; g < n; ++g) {
      out[i].grid(g) = grids[i][static_cast<std::size_t>(g)];
      out[i].values(g) = values[i][static_cast<std::size_t>(g)];
    }
  }
  return out;
}

std::pair<Vector, Vector> read_prediction_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prediction table " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty prediction table");
  const auto header = split_fields(line);
  int pred_col = -1, obs_col = -1;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (header[static_cast<std::size_t>(c)] == "predicted") pred_col = c;
    if (header[static_cast<std::size_t>(c)] == "observed") obs_col = c;
  }
  if (pred_col < 0 || obs_col < 0) {
    throw std::runtime_error(path + ": header must name predicted and observed columns");
  }
  std::vector<double> pred, obs;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_fields(line);
    const std::string context = path + " row " + std::to_string(row);
    if (static_cast<int>(f.size()) <= std::max(pred_col, obs_col)) {
      throw std::runtime_error(context + ": too few fields");
    }
    pred.push_back(parse_double_field(f[static_cast<std::size_t>(pred_col)], context));
    obs.push_back(parse_double_field(f[static_cast<std::size_t>(obs_col)], context));
  }
  Vector p(static_cast<int>(pred.size())), o(static_cast<int>(obs.size()));
  for (int k = 0; k < p.size(); ++k) {
    p(k) = pred[static_cast<std::size_t>(k)];
    o(k) = obs[static_cast<std::size_t>(k)];
  }
  return {std::move(p), std::move(o)};
}

// Chain c > 0 runs on a pure substream of the base seed; chain 0 keeps the
// seed itself so single-chain runs are transparent about what they used.
std::uint64_t chain_seed(std::uint64_t base, std::uint64_t index) {
  return index == 0 ? base : RngStream(base).substream(index).seed();
}

// Fold fits must not share streams with the split itself, which consumes
// per-area substreams of the same base seed.
constexpr std::uint64_t kFoldSeedOffset = 1ULL << 20;

// ---------------------------------------------------------------------------
// prior-sample

// Summary draws must not replay the chain or fold streams a fit would
// derive from the same base seed.
constexpr std::uint64_t kPriorSampleSeedOffset = 1ULL << 23;

struct PriorSampleArgs {
  std::string prior;
  int H = 10;
  int draws = 0;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string adjacency;
  double rho = 0.5;
  double eta2 = 1.0;
  bool fixed_m = false;
  double sigma_offdiag = 0.0;
  double a = 1.0;
  double b = 1.0;
  double tau2 = 1.0;
  double alpha = 1.0;
  double baseline_alpha = 1.0;
  double inclusion_threshold = 0.05;
  double active_threshold = 0.01;
};

void append_distance_row(std::ostringstream& out, const std::string& label,
                         std::vector<double> d) {
  out << label << ',' << num(quantile(d, 0.0)) << ',' << num(quantile(d, 0.25)) << ','
      << num(quantile(d, 0.5)) << ',' << num(quantile(d, 0.75)) << ',' << num(quantile(d, 1.0))
      << '\n';
}

void run_prior_sample(const PriorSampleArgs& a, const std::string& config_echo) {
  const fs::path dir = prepare_dir(a.out);
  RunManifest manifest("prior-sample", a.seed, config_echo);

  const ProximityGraph graph =
      a.adjacency.empty() ? ProximityGraph(1, {}) : ProximityGraph::load(a.adjacency);
  if (!a.adjacency.empty()) manifest.add_input(a.adjacency);
  const int n_areas = graph.n_areas();

  RngStream rng = RngStream(a.seed).substream(kPriorSampleSeedOffset);
  std::vector<std::vector<SimplexVector>> draws;
  if (a.prior == "logistic-mcar") {
    Matrix sigma = Matrix::Identity(a.H - 1, a.H - 1);
    sigma += a.sigma_offdiag * (Matrix::Ones(a.H - 1, a.H - 1) - Matrix::Identity(a.H - 1, a.H - 1));
    if (a.fixed_m) {
      const auto part = connected_components(graph);
      LogisticMcarParams params{graph, a.rho, sigma,
                                std::vector<Vector>(static_cast<std::size_t>(part.count),
                                                    Vector::Zero(a.H - 1))};
      draws = sample_prior(params, a.draws, rng);
    } else {
      draws = sample_prior_integrated(graph, a.rho, sigma, a.eta2, a.draws, rng);
    }
  } else if (a.prior == "ck-ssm") {
    CkSsmParams params{graph, a.a, a.b, a.tau2, a.rho, a.H};
    draws = sample_ck_ssm_prior(params, a.draws, rng);
  } else {
    const auto flat = sample_dirichlet(Vector::Constant(a.H, a.alpha), a.draws, rng);
    draws.reserve(flat.size());
    for (const auto& w : flat) draws.push_back({w});
  }

  std::ostringstream weights;
  weights << "draw,area,h,weight\n";
  for (std::size_t d = 0; d < draws.size(); ++d) {
    for (std::size_t i = 0; i < draws[d].size(); ++i) {
      for (int h = 0; h < draws[d][i].size(); ++h) {
        weights << d << ',' << i << ',' << h << ',' << num(draws[d][i][h]) << '\n';
      }
    }
  }
  write_file_atomic(dir / "weights.csv", weights.str());
  manifest.add_output("weights.csv");

  std::vector<long> active(static_cast<std::size_t>(a.H) + 1, 0);
  std::vector<long> above(static_cast<std::size_t>(a.H), 0);
  long vectors = 0;
  for (const auto& d : draws) {
    for (const auto& w : d) {
      ++vectors;
      ++active[static_cast<std::size_t>(active_components(w, a.active_threshold))];
      for (int h = 0; h < w.size(); ++h) {
        if (w[h] > a.inclusion_threshold) ++above[static_cast<std::size_t>(h)];
      }
    }
  }

  std::ostringstream hist;
  hist << "n_active,count\n";
  for (std::size_t k = 0; k < active.size(); ++k) hist << k << ',' << active[k] << '\n';
  write_file_atomic(dir / "active_components.csv", hist.str());
  manifest.add_output("active_components.csv");

  std::ostringstream incl;
  incl << "h,probability\n";
  for (std::size_t h = 0; h < above.size(); ++h) {
    incl << h << ',' << num(static_cast<double>(above[h]) / static_cast<double>(vectors)) << '\n';
  }
  write_file_atomic(dir / "inclusion.csv", incl.str());
  manifest.add_output("inclusion.csv");

  if (n_areas >= 2) {
    std::vector<std::pair<int, int>> pairs;
    if (n_areas <= 12) {
      for (int i = 0; i < n_areas; ++i) {
        for (int j = i + 1; j < n_areas; ++j) pairs.emplace_back(i, j);
      }
    } else {
      for (int j = 1; j < n_areas; ++j) pairs.emplace_back(0, j);
    }
    std::ostringstream dist;
    dist << "label,min,q25,median,q75,max\n";
    for (const auto& [i, j] : pairs) {
      std::vector<double> d(draws.size());
      for (std::size_t k = 0; k < draws.size(); ++k) {
        d[k] = (draws[k][static_cast<std::size_t>(i)].values() -
                draws[k][static_cast<std::size_t>(j)].values())
                   .norm();
      }
      append_distance_row(dist, "d_" + std::to_string(i) + "_" + std::to_string(j), std::move(d));
    }
    if (a.baseline_alpha > 0.0) {
      const Vector alpha = Vector::Constant(a.H, a.baseline_alpha);
      const auto va = sample_dirichlet(alpha, a.draws, rng);
      const auto vb = sample_dirichlet(alpha, a.draws, rng);
      std::vector<double> d(va.size());
      for (std::size_t k = 0; k < va.size(); ++k) d[k] = (va[k].values() - vb[k].values()).norm();
      append_distance_row(dist, "dirichlet", std::move(d));
    }
    write_file_atomic(dir / "distances.csv", dist.str());
    manifest.add_output("distances.csv");
  }

  manifest.write(dir);
  std::cout << "prior-sample: " << a.draws << " draws, " << n_areas << " area(s), H=" << a.H
            << " -> " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out = ".";
  double grid_lo = -50.0;
  double grid_hi = 50.0;
  int grid_points = 4001;
};

void run_simulate(const SimulateArgs& a, const std::string& config_echo) {
  const ScenarioId id = parse_scenario_id(a.scenario);
  const fs::path dir = prepare_dir(a.out);
  RunManifest manifest("simulate", a.seed, config_echo);

  const SimulatedDataset sim = generate_scenario({id, a.seed});
  write_dataset(sim.data, (dir / "observations.csv").string());
  manifest.add_output("observations.csv");
  sim.data.graph.save((dir / "adjacency.txt").string());
  manifest.add_output("adjacency.txt");

  const Vector grid = make_grid(a.grid_lo, a.grid_hi, a.grid_points);
  std::ostringstream td;
  td << "area,grid,density\n";
  for (std::size_t i = 0; i < sim.true_density.size(); ++i) {
    for (int g = 0; g < grid.size(); ++g) {
      td << i << ',' << num(grid(g)) << ',' << num(sim.true_density[i](grid(g))) << '\n';
    }
  }
  write_file_atomic(dir / "true_density.csv", td.str());
  manifest.add_output("true_density.csv");

  manifest.write(dir);
  std::cout << "simulate: " << scenario_name(id) << " with " << sim.data.n_observations()
            << " observations over " << sim.data.n_areas() << " areas -> " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// fit / cv shared sampler settings

struct FitParams {
  int H = 10;
  int burnin = 10000;
  int samples = 10000;
  int thin = 5;
  std::uint64_t seed = 0;
  std::string variant = "plain";
  bool center = false;
  double mu0 = 0.0;
  double lambda = 0.1;
  double a = 2.0;
  double b = 2.0;
  double eta2 = 1.0;
  double nu = 100.0;
  double sigma2_beta = 10.0;
  double m2_precision = 10.0;
  double rho_sd = 0.1;
};

void add_fit_params(CLI::App* sub, FitParams& p) {
  sub->add_option("--H", p.H, "Number of mixture components")
      ->capture_default_str()
      ->check(CLI::Range(1, 500));
  sub->add_option("--burnin", p.burnin, "Burn-in sweeps")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--samples", p.samples,
                  "Post burn-in sweeps; samples/thin states are stored")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--thin", p.thin, "Keep every thin-th sweep")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", p.seed, "RNG seed")->capture_default_str();
  sub->add_option("--variant", p.variant,
                  "plain, m1 (shared coefficients), or m2 (per-component coefficients)")
      ->capture_default_str()
      ->check(CLI::IsMember({"plain", "m1", "m2"}));
  sub->add_flag("--center", p.center, "Center the response and standardize covariates");
  sub->add_option("--mu0", p.mu0, "Kernel location prior mean")->capture_default_str();
  sub->add_option("--lambda", p.lambda, "Kernel location prior precision factor")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--a", p.a, "Kernel variance prior shape")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--b", p.b, "Kernel variance prior rate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--eta2", p.eta2, "Variance of the component-mean prior")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--nu", p.nu, "Scale matrix prior degrees of freedom")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--sigma2-beta", p.sigma2_beta, "Shared coefficient prior variance")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--m2-precision", p.m2_precision,
                  "Precision multiplier of the per-component coefficient prior")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--rho-sd", p.rho_sd, "Initial spatial-dependence proposal scale")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

ModelVariant parse_variant(const std::string& name) {
  if (name == "plain") return ModelVariant::plain;
  if (name == "m1") return ModelVariant::m1;
  return ModelVariant::m2;
}

ChainConfig chain_config(const FitParams& p) {
  if (p.samples % p.thin != 0) {
    throw std::invalid_argument("--samples must be a multiple of --thin");
  }
  ChainConfig cfg;
  cfg.n_burnin = p.burnin;
  cfg.n_samples = p.samples / p.thin;
  cfg.thin = p.thin;
  cfg.seed = p.seed;
  cfg.rho_proposal_sd = p.rho_sd;
  cfg.prior.H = p.H;
  cfg.prior.mu0 = p.mu0;
  cfg.prior.lambda = p.lambda;
  cfg.prior.a = p.a;
  cfg.prior.b = p.b;
  cfg.prior.eta2 = p.eta2;
  cfg.prior.nu = p.nu;
  cfg.prior.variant = parse_variant(p.variant);
  cfg.prior.sigma2_beta = p.sigma2_beta;
  cfg.prior.m2_prior_precision = p.m2_precision;
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data;
  std::string adjacency;
  std::string out = ".";
  std::string config;
  int chains = 1;
  FitParams params;
};

void run_fit(const FitArgs& a, const std::string& config_echo, const std::string& config_path) {
  const fs::path dir = prepare_dir(a.out);
  RunManifest manifest("fit", a.params.seed, config_echo);
  manifest.add_input(a.data);
  manifest.add_input(a.adjacency);
  if (!config_path.empty()) manifest.add_input(config_path);

  const Dataset data = read_dataset(a.data, a.adjacency, a.params.center);
  const ChainConfig base = chain_config(a.params);

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(a.chains));
  auto run_one = [&](int c) {
    try {
      ChainConfig cfg = base;
      cfg.seed = chain_seed(base.seed, static_cast<std::uint64_t>(c));
      const fs::path chain_dir = dir / ("chain_" + std::to_string(c));
      fs::create_directories(chain_dir);
      const Chain chain = GibbsSampler(cfg, data).run();
      save_chain(chain, (chain_dir / "chain").string());
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };

  if (a.chains == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(a.chains));
    for (int c = 0; c < a.chains; ++c) workers.emplace_back(run_one, c);
    for (auto& t : workers) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (int c = 0; c < a.chains; ++c) {
    const std::string stem = "chain_" + std::to_string(c) + "/chain";
    manifest.add_output(stem + ".states.ndjson");
    manifest.add_output(stem + ".meta.json");
    manifest.add_output(stem + ".loglik.bin");
  }
  manifest.write(dir);
  std::cout << "fit: " << a.chains << " chain(s), " << base.n_samples
            << " stored states each -> " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string chain;
  std::string out = ".";
  double grid_lo = -50.0;
  double grid_hi = 50.0;
  int grid_points = 4001;
  std::string truth;
  std::string covariate;
};

void add_chain_inputs(RunManifest& manifest, const std::string& stem) {
  manifest.add_input(stem + ".states.ndjson");
  manifest.add_input(stem + ".meta.json");
  manifest.add_input(stem + ".loglik.bin");
}

void run_estimate(const EstimateArgs& a, const std::string& config_echo) {
  const Chain chain = load_chain(a.chain);
  if (chain.states.empty()) throw std::runtime_error("chain has no stored states");

  const fs::path dir = prepare_dir(a.out);
  RunManifest manifest("estimate", 0, config_echo);
  add_chain_inputs(manifest, a.chain);

  const Vector x = a.covariate.empty() ? Vector() : parse_vector(a.covariate);
  const bool needs_x = chain.states.front().variant() != ModelVariant::plain;
  if (needs_x && x.size() == 0) {
    throw std::invalid_argument("the chain carries regression terms; pass --covariate v1,v2,...");
  }
  if (!needs_x && x.size() > 0) {
    throw std::invalid_argument("--covariate given but the chain has no regression terms");
  }

  const Vector grid = make_grid(a.grid_lo, a.grid_hi, a.grid_points);
  const int n_areas = chain.states.front().n_areas();
  std::vector<DensityEstimate> estimates;
  estimates.reserve(static_cast<std::size_t>(n_areas));
  for (int i = 0; i < n_areas; ++i) {
    estimates.push_back(posterior_mean_density(chain, i, grid, x));
  }
  write_density(estimates, (dir / "density.csv").string());
  manifest.add_output("density.csv");

  if (!a.truth.empty()) {
    manifest.add_input(a.truth);
    const auto truth = read_density_table(a.truth);
    if (static_cast<int>(truth.size()) != n_areas) {
      throw std::runtime_error("truth table covers " + std::to_string(truth.size()) +
                               " areas but the chain has " + std::to_string(n_areas));
    }
    std::ostringstream table;
    table << "area,kl,hellinger\n";
    for (int i = 0; i < n_areas; ++i) {
      GridDensity estimate{grid, estimates[static_cast<std::size_t>(i)].mean};
      const double kl = kl_divergence_grid(truth[static_cast<std::size_t>(i)], estimate);
      const double hell = hellinger_grid(truth[static_cast<std::size_t>(i)], estimate);
      table << i << ',' << num(kl) << ',' << num(hell) << '\n';
      std::cout << "area " << i << ": kl=" << num(kl) << " hellinger=" << num(hell) << "\n";
    }
    write_file_atomic(dir / "kl_table.csv", table.str());
    manifest.add_output("kl_table.csv");
  }

  manifest.write(dir);
  std::cout << "estimate: " << n_areas << " area(s) on a " << a.grid_points << "-point grid -> "
            << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// diagnostics

struct DiagnosticsArgs {
  std::string chain;
  std::string pmse_file;
  std::string out;
};

void run_diagnostics(const DiagnosticsArgs& a, const std::string& config_echo) {
  const Chain chain = load_chain(a.chain);
  RunManifest manifest("diagnostics", 0, config_echo);
  add_chain_inputs(manifest, a.chain);

  std::ostringstream report;
  report << "lpml: " << num(lpml(chain.log_lik)) << "\n";
  if (chain.log_lik.rows() >= 2) {
    report << "waic: " << num(waic(chain.log_lik)) << "\n";
  } else {
    report << "waic: nan\n";
  }
  if (!a.pmse_file.empty()) {
    manifest.add_input(a.pmse_file);
    const auto [pred, obs] = read_prediction_table(a.pmse_file);
    report << "pmse: " << num(pmse(pred, obs)) << "\n";
  }

  std::cout << report.str();
  if (!a.out.empty()) {
    const fs::path dir = prepare_dir(a.out);
    write_file_atomic(dir / "diagnostics.txt", report.str());
    manifest.add_output("diagnostics.txt");
    manifest.write(dir);
  }
}

// ---------------------------------------------------------------------------
// cv

struct CvArgs {
  std::string data;
  std::string adjacency;
  std::string out = ".";
  std::string config;
  int folds = 5;
  FitParams params;
};

void run_cv(const CvArgs& a, const std::string& config_echo, const std::string& config_path) {
  const fs::path dir = prepare_dir(a.out);
  RunManifest manifest("cv", a.params.seed, config_echo);
  manifest.add_input(a.data);
  manifest.add_input(a.adjacency);
  if (!config_path.empty()) manifest.add_input(config_path);

  const Dataset data = read_dataset(a.data, a.adjacency, a.params.center);
  const auto folds = stratified_cv_split(data, a.folds, a.params.seed);
  const ChainConfig base = chain_config(a.params);

  std::vector<int> offset(static_cast<std::size_t>(data.n_areas()) + 1, 0);
  for (int i = 0; i < data.n_areas(); ++i) {
    offset[static_cast<std::size_t>(i) + 1] =
        offset[static_cast<std::size_t>(i)] + static_cast<int>(data.y[static_cast<std::size_t>(i)].size());
  }
  auto locate = [&](int flat) {
    int area = 0;
    while (offset[static_cast<std::size_t>(area) + 1] <= flat) ++area;
    return std::make_pair(area, flat - offset[static_cast<std::size_t>(area)]);
  };

  std::ostringstream table;
  table << "fold,n_test,pmse\n";
  double pooled_sq = 0.0;
  long pooled_n = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const Dataset train = subset_dataset(data, folds[f].train);
    ChainConfig cfg = base;
    cfg.seed = RngStream(base.seed).substream(kFoldSeedOffset + f).seed();
    const Chain chain = GibbsSampler(cfg, train).run();

    const auto& test = folds[f].test;
    Vector pred(static_cast<int>(test.size())), obs(static_cast<int>(test.size()));
    for (std::size_t k = 0; k < test.size(); ++k) {
      const auto [area, row] = locate(test[k]);
      const Vector xrow = data.x.empty()
                              ? Vector()
                              : Vector(data.x[static_cast<std::size_t>(area)].row(row).transpose());
      double m = 0.0;
      for (const auto& state : chain.states) m += mixture_mean(state, area, xrow);
      pred(static_cast<int>(k)) = m / static_cast<double>(chain.states.size());
      obs(static_cast<int>(k)) = data.y[static_cast<std::size_t>(area)](row);
    }
    const double fold_pmse = pmse(pred, obs);
    table << f << ',' << test.size() << ',' << num(fold_pmse) << '\n';
    std::cout << "fold " << f << ": pmse=" << num(fold_pmse) << "\n";
    pooled_sq += (pred - obs).squaredNorm();
    pooled_n += static_cast<long>(test.size());
  }

  write_file_atomic(dir / "cv_results.csv", table.str());
  manifest.add_output("cv_results.csv");
  manifest.write(dir);
  std::cout << "pmse: " << num(pooled_sq / static_cast<double>(pooled_n)) << "\n";
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

// Fills options the command line left untouched from a flat key=value file.
// Values go through each option's own converter and validators, so a bad
// entry fails exactly like a bad flag.
void apply_config_file(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string entry = trim(line);
    if (entry.empty() || entry[0] == '#') continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(entry.substr(0, eq));
    std::string value = trim(entry.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                                  "'");
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially dependent finite mixtures with logistic MCAR weights"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  PriorSampleArgs ps;
  auto* sp = app.add_subcommand("prior-sample", "Draw weight vectors from a prior and summarize them");
  sp->add_option("--prior", ps.prior, "Prior family")
      ->required()
      ->check(CLI::IsMember({"logistic-mcar", "ck-ssm", "dirichlet"}));
  sp->add_option("--H", ps.H, "Number of components")
      ->capture_default_str()
      ->check(CLI::Range(2, 1000));
  sp->add_option("--draws", ps.draws, "Number of prior draws")
      ->required()
      ->check(CLI::Range(1, 100000000));
  sp->add_option("--seed", ps.seed, "RNG seed")->capture_default_str();
  sp->add_option("--out", ps.out, "Output directory")->capture_default_str();
  sp->add_option("--adjacency", ps.adjacency, "Adjacency file; omitted means one isolated area");
  sp->add_option("--rho", ps.rho, "Spatial dependence")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sp->add_option("--eta2", ps.eta2, "Variance of the integrated component-mean prior")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sp->add_flag("--fixed-m", ps.fixed_m, "Fix the field mean at zero instead of integrating it");
  sp->add_option("--sigma-offdiag", ps.sigma_offdiag,
                 "Common off-diagonal of the (H-1)x(H-1) scale matrix")
      ->capture_default_str();
  sp->add_option("--a", ps.a, "CK-SSM center slope")->capture_default_str();
  sp->add_option("--b", ps.b, "CK-SSM center intercept")->capture_default_str();
  sp->add_option("--tau2", ps.tau2, "CK-SSM field variance")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sp->add_option("--alpha", ps.alpha, "Dirichlet concentration")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sp->add_option("--baseline-alpha", ps.baseline_alpha,
                 "Dirichlet baseline row in the distance table; 0 disables")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sp->add_option("--inclusion-threshold", ps.inclusion_threshold,
                 "Weight cutoff for the per-component inclusion probability")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sp->add_option("--active-threshold", ps.active_threshold,
                 "Weight cutoff for counting active components")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sp->callback([&] { run_prior_sample(ps, sp->config_to_str(true, false)); });

  SimulateArgs sa;
  auto* ss = app.add_subcommand("simulate", "Generate a benchmark dataset with its true densities");
  ss->add_option("--scenario", sa.scenario, "I, II, III, grid16, grid64, or grid256")->required();
  ss->add_option("--seed", sa.seed, "RNG seed")->capture_default_str();
  ss->add_option("--out", sa.out, "Output directory")->capture_default_str();
  ss->add_option("--grid-lo", sa.grid_lo, "True-density grid lower bound")->capture_default_str();
  ss->add_option("--grid-hi", sa.grid_hi, "True-density grid upper bound")->capture_default_str();
  ss->add_option("--grid-points", sa.grid_points, "True-density grid size")
      ->capture_default_str()
      ->check(CLI::Range(2, 10000000));
  ss->callback([&] { run_simulate(sa, ss->config_to_str(true, false)); });

  FitArgs fa;
  auto* sf = app.add_subcommand("fit", "Run the Gibbs sampler and persist the chain");
  sf->add_option("--config", fa.config, "Key=value file; command-line flags take precedence");
  sf->add_option("--data", fa.data, "Observation CSV (area,y[,x1..xd])")->required();
  sf->add_option("--adjacency", fa.adjacency, "Adjacency file")->required();
  sf->add_option("--out", fa.out, "Output directory")->capture_default_str();
  sf->add_option("--chains", fa.chains, "Independent chains, one directory each")
      ->capture_default_str()
      ->check(CLI::Range(1, 64));
  add_fit_params(sf, fa.params);
  sf->callback([&] {
    apply_config_file(sf, fa.config);
    run_fit(fa, sf->config_to_str(true, false), fa.config);
  });

  EstimateArgs ea;
  auto* se = app.add_subcommand("estimate", "Posterior mean densities from a stored chain");
  se->add_option("--chain", ea.chain, "Chain stem, as written by fit (<dir>/chain)")->required();
  se->add_option("--out", ea.out, "Output directory")->capture_default_str();
  se->add_option("--grid-lo", ea.grid_lo, "Evaluation grid lower bound")->capture_default_str();
  se->add_option("--grid-hi", ea.grid_hi, "Evaluation grid upper bound")->capture_default_str();
  se->add_option("--grid-points", ea.grid_points, "Evaluation grid size")
      ->capture_default_str()
      ->check(CLI::Range(2, 10000000));
  se->add_option("--truth", ea.truth,
                 "True-density CSV; adds a per-area KL and Hellinger table");
  se->add_option("--covariate", ea.covariate,
                 "Comma-separated covariate row for regression variants");
  se->callback([&] { run_estimate(ea, se->config_to_str(true, false)); });

  DiagnosticsArgs da;
  auto* sd = app.add_subcommand("diagnostics", "LPML and WAIC of a stored chain");
  sd->add_option("--chain", da.chain, "Chain stem, as written by fit (<dir>/chain)")->required();
  sd->add_option("--pmse", da.pmse_file, "CSV with predicted,observed columns for held-out error");
  sd->add_option("--out", da.out, "Optional directory for a diagnostics.txt copy");
  sd->callback([&] { run_diagnostics(da, sd->config_to_str(true, false)); });

  CvArgs ca;
  auto* sc = app.add_subcommand("cv", "Stratified cross-validated predictive error");
  sc->add_option("--config", ca.config, "Key=value file; command-line flags take precedence");
  sc->add_option("--data", ca.data, "Observation CSV (area,y[,x1..xd])")->required();
  sc->add_option("--adjacency", ca.adjacency, "Adjacency file")->required();
  sc->add_option("--out", ca.out, "Output directory")->capture_default_str();
  sc->add_option("--folds", ca.folds, "Stratified folds")
      ->capture_default_str()
      ->check(CLI::Range(2, 1000));
  add_fit_params(sc, ca.params);
  sc->callback([&] {
    apply_config_file(sc, ca.config);
    run_cv(ca, sc->config_to_str(true, false), ca.config);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
