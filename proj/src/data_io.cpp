#include "spmix/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "spmix/numeric.hpp"
#include "spmix/rng.hpp"
#include "spmix/simplex.hpp"

namespace spmix {

namespace {

using nlohmann::json;

double student_t_pdf(double y, double df, double loc, double scale) {
  const double z = (y - loc) / scale;
  const double log_norm = std::lgamma(0.5 * (df + 1)) - std::lgamma(0.5 * df) -
                          0.5 * std::log(df * std::numbers::pi) - std::log(scale);
  return std::exp(log_norm - 0.5 * (df + 1) * std::log1p(z * z / df));
}

double skew_normal_pdf(double y, double loc, double scale, double shape) {
  const double z = (y - loc) / scale;
  return 2.0 / scale * std::exp(log_normal_pdf(z, 0.0, 1.0)) * std_normal_cdf(shape * z);
}

double chi_squared_pdf(double y, double df) {
  if (y <= 0.0) return 0.0;
  const double half = 0.5 * df;
  return std::exp((half - 1.0) * std::log(y) - 0.5 * y - half * std::numbers::ln2 -
                  std::lgamma(half));
}

double cauchy_pdf(double y, double loc, double scale) {
  const double z = (y - loc) / scale;
  return 1.0 / (std::numbers::pi * scale * (1.0 + z * z));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, const std::string& context) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": cannot parse number '" + s + "'");
  }
  if (pos != s.size()) throw std::runtime_error(context + ": trailing junk in '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const std::string& context) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": cannot parse integer '" + s + "'");
  }
  if (pos != s.size()) throw std::runtime_error(context + ": trailing junk in '" + s + "'");
  return v;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Matrix matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const int cols = static_cast<int>(j.at(0).size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

json state_to_json(const MixtureState& st) {
  json atoms = json::array();
  for (const auto& a : st.atoms) {
    atoms.push_back({{"mu", a.mu}, {"sigma2", a.sigma2}, {"beta", vector_to_json(a.beta)}});
  }
  json w = json::array(), m = json::array(), alloc = json::array();
  for (const auto& v : st.w_tilde) w.push_back(vector_to_json(v));
  for (const auto& v : st.m_tilde) m.push_back(vector_to_json(v));
  for (const auto& a : st.allocations) alloc.push_back(a);
  return {{"atoms", atoms},        {"w_tilde", w},  {"allocations", alloc},
          {"sigma", matrix_to_json(st.sigma)}, {"rho", st.rho}, {"m_tilde", m},
          {"beta", vector_to_json(st.beta)}};
}

MixtureState state_from_json(const json& j) {
  MixtureState st;
  for (const auto& a : j.at("atoms")) {
    st.atoms.push_back(Atom{a.at("mu").get<double>(), a.at("sigma2").get<double>(),
                            vector_from_json(a.at("beta"))});
  }
  for (const auto& v : j.at("w_tilde")) st.w_tilde.push_back(vector_from_json(v));
  for (const auto& a : j.at("allocations")) st.allocations.push_back(a.get<std::vector<int>>());
  st.sigma = matrix_from_json(j.at("sigma"));
  st.rho = j.at("rho").get<double>();
  for (const auto& v : j.at("m_tilde")) st.m_tilde.push_back(vector_from_json(v));
  st.beta = vector_from_json(j.at("beta"));
  return st;
}

constexpr std::uint32_t kLogLikTag = 0x01020304;

}  // namespace

ScenarioId parse_scenario_id(const std::string& name) {
  if (name == "I") return ScenarioId::one;
  if (name == "II") return ScenarioId::two;
  if (name == "III") return ScenarioId::three;
  if (name == "grid16") return ScenarioId::grid16;
  if (name == "grid64") return ScenarioId::grid64;
  if (name == "grid256") return ScenarioId::grid256;
  throw std::invalid_argument("unknown scenario id: " + name);
}

std::string scenario_name(ScenarioId id) {
  switch (id) {
    case ScenarioId::one: return "I";
    case ScenarioId::two: return "II";
    case ScenarioId::three: return "III";
    case ScenarioId::grid16: return "grid16";
    case ScenarioId::grid64: return "grid64";
    case ScenarioId::grid256: return "grid256";
  }
  throw std::invalid_argument("unknown scenario id");
}

SimulatedDataset generate_scenario(const ScenarioSpec& spec) {
  switch (spec.id) {
    case ScenarioId::grid16: return generate_grid_dataset(4, spec.seed);
    case ScenarioId::grid64: return generate_grid_dataset(8, spec.seed);
    case ScenarioId::grid256: return generate_grid_dataset(16, spec.seed);
    default: break;
  }

  std::vector<int> sizes;
  if (spec.id == ScenarioId::one) {
    sizes.assign(6, 1000);
  } else if (spec.id == ScenarioId::two) {
    sizes = {1000, 10, 1000, 10, 1000, 10};
  } else {
    sizes.assign(6, 100);
  }
  const bool heavy_tail = spec.id == ScenarioId::three;

  SimulatedDataset out;
  out.data.graph = ProximityGraph(6, {{0, 1}, {2, 3}, {4, 5}});
  out.data.y.resize(6);
  RngStream root(spec.seed);

  for (int i = 0; i < 6; ++i) {
    RngStream sub = root.substream(static_cast<std::uint64_t>(i));
    Vector y(sizes[i]);
    for (int j = 0; j < sizes[i]; ++j) {
      if (i < 2) {
        y(j) = -4.0 + sub.student_t(6.0);
      } else if (i < 4) {
        y(j) = sub.skew_normal(4.0, 4.0, 1.0);
      } else if (heavy_tail) {
        y(j) = sub.cauchy(0.0, 1.0);
      } else {
        y(j) = sub.chi_squared(3.0);
      }
    }
    out.data.y[i] = y;
    if (i < 2) {
      out.true_density.emplace_back([](double v) { return student_t_pdf(v, 6.0, -4.0, 1.0); });
    } else if (i < 4) {
      out.true_density.emplace_back([](double v) { return skew_normal_pdf(v, 4.0, 4.0, 1.0); });
    } else if (heavy_tail) {
      out.true_density.emplace_back([](double v) { return cauchy_pdf(v, 0.0, 1.0); });
    } else {
      out.true_density.emplace_back([](double v) { return chi_squared_pdf(v, 3.0); });
    }
  }
  out.data.validate();
  return out;
}

SimulatedDataset generate_grid_dataset(int side, std::uint64_t seed) {
  if (side < 2) throw std::invalid_argument("grid side must be at least 2");
  const int n = side * side;
  const Vector means = (Vector(3) << -5.0, 0.0, 5.0).finished();

  SimulatedDataset out;
  out.data.graph = ProximityGraph::grid(side);
  out.data.y.resize(n);
  RngStream root(seed);

  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int i = r * side + c;
      const double cx = (c + 0.5) / side;
      const double cy = (r + 0.5) / side;
      Vector wt(2);
      wt(0) = 3.0 * (cx - 0.5) + 3.0 * (cy - 0.5);
      wt(1) = -wt(0);
      const SimplexVector w = alr_inv(AlrVector(wt));
      const Vector lw = Vector(w.values().array().log());

      RngStream sub = root.substream(static_cast<std::uint64_t>(i));
      Vector y(25);
      for (int j = 0; j < 25; ++j) {
        const int k = sub.categorical_log(lw);
        y(j) = sub.normal(means(k), 1.0);
      }
      out.data.y[i] = y;
      const Vector probs = w.values();
      out.true_density.emplace_back([probs, means](double v) {
        double f = 0.0;
        for (int k = 0; k < 3; ++k) f += probs(k) * std::exp(log_normal_pdf(v, means(k), 1.0));
        return f;
      });
    }
  }
  out.data.validate();
  return out;
}

Dataset read_dataset(const std::string& obs_path, const std::string& adjacency_path,
                     bool center) {
  std::ifstream in(obs_path);
  if (!in) throw std::runtime_error("cannot open observation file: " + obs_path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(obs_path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "area" || header[1] != "y") {
    throw std::runtime_error(obs_path + ": header must start with 'area,y'");
  }
  const int d = static_cast<int>(header.size()) - 2;

  std::vector<long> area_ids;
  std::vector<double> ys;
  std::vector<Vector> xs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string ctx = obs_path + ":" + std::to_string(line_no);
    if (fields.size() != header.size()) {
      throw std::runtime_error(ctx + ": expected " + std::to_string(header.size()) +
                               " fields, got " + std::to_string(fields.size()));
    }
    const long id = parse_long(fields[0], ctx);
    if (id < 0) throw std::runtime_error(ctx + ": negative area id");
    area_ids.push_back(id);
    ys.push_back(parse_double(fields[1], ctx));
    Vector x(d);
    for (int k = 0; k < d; ++k) x(k) = parse_double(fields[2 + k], ctx);
    xs.push_back(x);
  }
  if (area_ids.empty()) throw std::runtime_error(obs_path + ": no observation rows");

  const long max_id = *std::max_element(area_ids.begin(), area_ids.end());
  const int n_areas = static_cast<int>(max_id) + 1;
  std::vector<bool> seen(n_areas, false);
  for (long id : area_ids) seen[static_cast<std::size_t>(id)] = true;
  for (int i = 0; i < n_areas; ++i) {
    if (!seen[i]) {
      throw std::runtime_error(obs_path + ": non-contiguous area ids (area " +
                               std::to_string(i) + " has no rows)");
    }
  }

  Dataset data;
  data.graph = ProximityGraph::load(adjacency_path);
  if (data.graph.n_areas() != n_areas) {
    throw std::runtime_error(obs_path + ": observation file has " + std::to_string(n_areas) +
                             " areas but the adjacency file has " +
                             std::to_string(data.graph.n_areas()));
  }

  if (center) {
    double y_mean = 0.0;
    for (double v : ys) y_mean += v;
    y_mean /= static_cast<double>(ys.size());
    for (double& v : ys) v -= y_mean;
    for (int k = 0; k < d; ++k) {
      double mean = 0.0;
      for (const auto& x : xs) mean += x(k);
      mean /= static_cast<double>(xs.size());
      double ss = 0.0;
      for (const auto& x : xs) ss += (x(k) - mean) * (x(k) - mean);
      const double sd =
          xs.size() > 1 ? std::sqrt(ss / (static_cast<double>(xs.size()) - 1)) : 0.0;
      if (sd <= 0.0) {
        throw std::runtime_error(obs_path + ": covariate column '" + header[2 + k] +
                                 "' has zero standard deviation, cannot standardize");
      }
      for (auto& x : xs) x(k) = (x(k) - mean) / sd;
    }
  }

  std::vector<int> counts(n_areas, 0);
  for (long id : area_ids) ++counts[static_cast<std::size_t>(id)];
  data.y.resize(n_areas);
  if (d > 0) data.x.resize(n_areas);
  for (int i = 0; i < n_areas; ++i) {
    data.y[i] = Vector(counts[i]);
    if (d > 0) data.x[i] = Matrix(counts[i], d);
  }
  std::vector<int> next(n_areas, 0);
  for (std::size_t r = 0; r < area_ids.size(); ++r) {
    const int i = static_cast<int>(area_ids[r]);
    data.y[i](next[i]) = ys[r];
    if (d > 0) data.x[i].row(next[i]) = xs[r].transpose();
    ++next[i];
  }
  data.validate();
  return data;
}

void write_dataset(const Dataset& data, const std::string& obs_path) {
  std::ofstream out(obs_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + obs_path);
  out.precision(17);
  const int d = data.covariate_dim();
  out << "area,y";
  for (int k = 1; k <= d; ++k) out << ",x" << k;
  out << "\n";
  for (int i = 0; i < data.n_areas(); ++i) {
    for (int j = 0; j < data.y[i].size(); ++j) {
      out << i << "," << data.y[i](j);
      for (int k = 0; k < d; ++k) out << "," << data.x[i](j, k);
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + obs_path);
}

void write_density(const std::vector<DensityEstimate>& estimates, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.precision(17);
  out << "area,grid,mean,lo95,hi95\n";
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto& e = estimates[i];
    for (int g = 0; g < e.grid.size(); ++g) {
      out << i << "," << e.grid(g) << "," << e.mean(g) << "," << e.lo95(g) << "," << e.hi95(g)
          << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<CvFold> stratified_cv_split(const Dataset& data, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  data.validate();

  std::vector<CvFold> out(static_cast<std::size_t>(folds));
  RngStream root(seed);
  int base = 0;
  for (int i = 0; i < data.n_areas(); ++i) {
    const int n_i = static_cast<int>(data.y[i].size());
    if (n_i < folds) {
      std::cerr << "warning: area " << i << " has " << n_i << " observations, fewer than "
                << folds << " folds; its folds will be uneven\n";
    }
    std::vector<int> idx(n_i);
    for (int j = 0; j < n_i; ++j) idx[j] = base + j;
    RngStream sub = root.substream(static_cast<std::uint64_t>(i));
    for (int j = n_i - 1; j > 0; --j) std::swap(idx[j], idx[sub.uniform_int(j + 1)]);
    for (int j = 0; j < n_i; ++j) out[j % folds].test.push_back(idx[j]);
    base += n_i;
  }

  const int total = base;
  for (auto& fold : out) {
    std::sort(fold.test.begin(), fold.test.end());
    std::vector<bool> in_test(total, false);
    for (int t : fold.test) in_test[t] = true;
    for (int t = 0; t < total; ++t) {
      if (!in_test[t]) fold.train.push_back(t);
    }
  }
  return out;
}

Dataset subset_dataset(const Dataset& data, const std::vector<int>& indices) {
  const int total = data.n_observations();
  std::vector<bool> keep(total, false);
  for (int t : indices) {
    if (t < 0 || t >= total) throw std::out_of_range("observation index out of range");
    keep[t] = true;
  }
  Dataset out;
  out.graph = data.graph;
  out.y.resize(data.n_areas());
  const int d = data.covariate_dim();
  if (d > 0) out.x.resize(data.n_areas());
  int base = 0;
  for (int i = 0; i < data.n_areas(); ++i) {
    const int n_i = static_cast<int>(data.y[i].size());
    std::vector<int> rows;
    for (int j = 0; j < n_i; ++j) {
      if (keep[base + j]) rows.push_back(j);
    }
    out.y[i] = Vector(static_cast<int>(rows.size()));
    if (d > 0) out.x[i] = Matrix(static_cast<int>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.y[i](static_cast<int>(r)) = data.y[i](rows[r]);
      if (d > 0) out.x[i].row(static_cast<int>(r)) = data.x[i].row(rows[r]);
    }
    base += n_i;
  }
  return out;
}

void save_chain(const Chain& chain, const std::string& stem) {
  {
    std::ofstream states(stem + ".states.ndjson");
    if (!states) throw std::runtime_error("cannot open for writing: " + stem + ".states.ndjson");
    for (const auto& st : chain.states) states << state_to_json(st).dump() << "\n";
    if (!states) throw std::runtime_error("write failed: " + stem + ".states.ndjson");
  }
  {
    std::ofstream meta(stem + ".meta.json");
    if (!meta) throw std::runtime_error("cannot open for writing: " + stem + ".meta.json");
    meta << json(chain.metadata).dump(2) << "\n";
  }
  {
    std::ofstream bin(stem + ".loglik.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open for writing: " + stem + ".loglik.bin");
    const std::uint32_t tag = kLogLikTag;
    const std::uint64_t rows = static_cast<std::uint64_t>(chain.log_lik.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(chain.log_lik.cols());
    bin.write(reinterpret_cast<const char*>(&tag), sizeof(tag));
    bin.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    bin.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t c = 0; c < cols; ++c) {
        const double v = chain.log_lik(static_cast<int>(r), static_cast<int>(c));
        bin.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
    }
    if (!bin) throw std::runtime_error("write failed: " + stem + ".loglik.bin");
  }
}

Chain load_chain(const std::string& stem) {
  Chain chain;
  {
    std::ifstream states(stem + ".states.ndjson");
    if (!states) throw std::runtime_error("cannot open: " + stem + ".states.ndjson");
    std::string line;
    while (std::getline(states, line)) {
      if (line.empty()) continue;
      chain.states.push_back(state_from_json(json::parse(line)));
    }
  }
  {
    std::ifstream meta(stem + ".meta.json");
    if (!meta) throw std::runtime_error("cannot open: " + stem + ".meta.json");
    const json j = json::parse(meta);
    for (const auto& [k, v] : j.items()) chain.metadata[k] = v.get<std::string>();
  }
  {
    std::ifstream bin(stem + ".loglik.bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open: " + stem + ".loglik.bin");
    std::uint32_t tag = 0;
    std::uint64_t rows = 0, cols = 0;
    bin.read(reinterpret_cast<char*>(&tag), sizeof(tag));
    bin.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    bin.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!bin || tag != kLogLikTag) {
      throw std::runtime_error(stem + ".loglik.bin: bad header (wrong format or byte order)");
    }
    chain.log_lik = Matrix(static_cast<int>(rows), static_cast<int>(cols));
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t c = 0; c < cols; ++c) {
        double v = 0;
        bin.read(reinterpret_cast<char*>(&v), sizeof(v));
        chain.log_lik(static_cast<int>(r), static_cast<int>(c)) = v;
      }
    }
    if (!bin) throw std::runtime_error(stem + ".loglik.bin: truncated payload");
  }
  return chain;
}

}  // namespace spmix
