#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spmix/mixture_model.hpp"

namespace spmix {

enum class ScenarioId { one, two, three, grid16, grid64, grid256 };

// Accepts the CLI spellings: I, II, III, grid16, grid64, grid256.
ScenarioId parse_scenario_id(const std::string& name);
std::string scenario_name(ScenarioId id);

struct ScenarioSpec {
  ScenarioId id = ScenarioId::one;
  std::uint64_t seed = 0;
};

// A generated dataset together with the exact data-generating density of
// each area, so estimates can be scored against the truth.
struct SimulatedDataset {
  Dataset data;
  std::vector<std::function<double(double)>> true_density;
};

SimulatedDataset generate_scenario(const ScenarioSpec& spec);

// Unit-square side x side grid, row-major areas, rook adjacency. Weights
// come from a linear spatial trend in alr coordinates; 25 observations per
// area from a three-component Gaussian mixture with means -5, 0, 5.
SimulatedDataset generate_grid_dataset(int side, std::uint64_t seed);

// Observation CSV with mandatory header `area,y[,x1..xd]`; area ids must be
// 0-based and contiguous and their count must match the adjacency file.
// With center set, covariate columns are standardized to mean 0 / SD 1 and
// the response is centered.
Dataset read_dataset(const std::string& obs_path, const std::string& adjacency_path,
                     bool center = false);
void write_dataset(const Dataset& data, const std::string& obs_path);

// Per-area density estimates as CSV rows `area,grid,mean,lo95,hi95`.
void write_density(const std::vector<DensityEstimate>& estimates, const std::string& path);

struct CvFold {
  // Flattened area-major observation indices; train and test partition the
  // full index range.
  std::vector<int> train;
  std::vector<int> test;
};

// Within each area, observation indices are shuffled by seed and dealt
// round-robin across folds, so every observation lands in exactly one test
// set and per-area test counts differ by at most one. Areas with fewer
// observations than folds are still dealt (a warning goes to stderr).
std::vector<CvFold> stratified_cv_split(const Dataset& data, int folds, std::uint64_t seed);

// Keeps only the listed flattened observation indices; all areas remain
// present (possibly empty) and the graph is shared.
Dataset subset_dataset(const Dataset& data, const std::vector<int>& indices);

// Chain persistence. `stem` expands to three files: <stem>.states.ndjson
// (one self-describing record per stored state), <stem>.meta.json (config
// echo, seed, version, wall time), and <stem>.loglik.bin (dense binary
// table, row = state, column = observation, native-endian doubles behind a
// tagged header).
void save_chain(const Chain& chain, const std::string& stem);
Chain load_chain(const std::string& stem);

}  // namespace spmix
