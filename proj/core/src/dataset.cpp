#include "amore/sim/dataset.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "amore/rng.hpp"

namespace amore::sim {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<Trajectory>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split: " + name);
}

namespace {

Trajectory simulate_one(const SystemSpec& spec, Rng& ic_rng, std::uint64_t traj_seed) {
  SystemSpec s = spec;
  s.rng_seed = traj_seed;
  switch (spec.name) {
    case SystemName::MassSpringHopper: {
      const double l0 = ic_rng.uniform(0.5, 3.0);
      const double v0 = ic_rng.uniform(-1.0, 1.0);
      return simulate_mass_spring(l0, v0, s);
    }
    case SystemName::SIR: {
      const double R0 = ic_rng.uniform(900.0, 980.0);
      const double I0 = ic_rng.uniform(0.0, 1000.0 - R0);
      const double S0 = 1000.0 - R0 - I0;
      return simulate_sir(S0, I0, R0, s);
    }
    case SystemName::OdeParticles:
      return simulate_particles(s, s.particle_radius);
    case SystemName::CoupledLinear: {
      std::vector<double> y0 = {ic_rng.uniform(-1.0, 1.0), ic_rng.uniform(-1.0, 1.0),
                                ic_rng.uniform(-0.5, 0.5), ic_rng.uniform(-0.5, 0.5)};
      return simulate_nonhybrid(s, y0);
    }
    case SystemName::Lorenz63: {
      std::vector<double> y0 = {ic_rng.uniform(-8.0, 8.0), ic_rng.uniform(-8.0, 8.0),
                                ic_rng.uniform(20.0, 30.0)};
      return simulate_nonhybrid(s, y0);
    }
    case SystemName::SelkovGlycolysis: {
      std::vector<double> y0 = {ic_rng.uniform(0.2, 1.5), ic_rng.uniform(0.2, 2.5)};
      return simulate_nonhybrid(s, y0);
    }
    case SystemName::CubicOscillator:
    case SystemName::HopfBifurcation:
    case SystemName::DuffingOscillator: {
      std::vector<double> y0 = {ic_rng.uniform(-1.2, 1.2), ic_rng.uniform(-1.2, 1.2)};
      return simulate_nonhybrid(s, y0);
    }
    default:
      throw std::invalid_argument("build_dataset: unsupported system");
  }
}

}  // namespace

Dataset build_dataset(const SystemSpec& spec, int n_train, int n_val, int n_test) {
  if (n_train <= 0 || n_val <= 0 || n_test <= 0)
    throw std::invalid_argument("build_dataset: split counts must be positive");
  spec.validate();

  Dataset ds;
  ds.spec = spec;
  Rng root(spec.rng_seed);
  Rng ic_rng = root.split(0);
  Rng seed_rng = root.split(1);

  const int total = n_train + n_val + n_test;
  for (int i = 0; i < total; ++i) {
    const std::uint64_t traj_seed = seed_rng.next_u64();
    Trajectory traj = simulate_one(spec, ic_rng, traj_seed);
    if (i < n_train) ds.train.push_back(std::move(traj));
    else if (i < n_train + n_val) ds.val.push_back(std::move(traj));
    else ds.test.push_back(std::move(traj));
  }
  return ds;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f, "t,obj");
  for (int m = 0; m < traj.state_dim; ++m) std::fprintf(f, ",y_%d", m);
  std::fprintf(f, ",mode\n");
  for (int t = 0; t < traj.steps; ++t) {
    for (int n = 0; n < traj.objects; ++n) {
      std::fprintf(f, "%d,%d", t, n);
      for (int m = 0; m < traj.state_dim; ++m) std::fprintf(f, ",%.17g", traj.obs(t, n, m));
      std::fprintf(f, ",%d\n", traj.mode(t, n));
    }
  }
  std::fclose(f);
}

Trajectory read_trajectory_csv(const std::string& path, double dt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string header;
  std::getline(in, header);
  int cols = 1;
  for (char c : header) cols += c == ',';
  const int state_dim = cols - 3;
  if (state_dim < 1) throw std::runtime_error("malformed trajectory csv: " + path);

  std::vector<double> values;
  std::vector<int> ts, objs, modes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    ts.push_back(std::stoi(cell));
    std::getline(ss, cell, ',');
    objs.push_back(std::stoi(cell));
    for (int m = 0; m < state_dim; ++m) {
      std::getline(ss, cell, ',');
      values.push_back(std::stod(cell));
    }
    std::getline(ss, cell, ',');
    modes.push_back(std::stoi(cell));
  }
  int steps = 0, objects = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    steps = std::max(steps, ts[i] + 1);
    objects = std::max(objects, objs[i] + 1);
  }
  Trajectory traj;
  traj.steps = steps;
  traj.objects = objects;
  traj.state_dim = state_dim;
  traj.dt = dt;
  traj.observations.assign(static_cast<std::size_t>(steps) * objects * state_dim, 0.0);
  traj.modes.assign(static_cast<std::size_t>(steps) * objects, 0);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (int m = 0; m < state_dim; ++m)
      traj.obs(ts[i], objs[i], m) = values[i * state_dim + m];
    traj.mode(ts[i], objs[i]) = modes[i];
  }
  return traj;
}

namespace {

json spec_to_json(const SystemSpec& s) {
  return json{{"name", to_string(s.name)},
              {"state_dim", s.state_dim},
              {"mode_count", s.mode_count},
              {"dt", s.dt},
              {"horizon", s.horizon},
              {"noise_std", s.noise_std},
              {"object_count", s.object_count},
              {"rng_seed", s.rng_seed},
              {"integration_substeps", s.integration_substeps},
              {"particle_radius", s.particle_radius}};
}

SystemSpec spec_from_json(const json& j) {
  SystemSpec s;
  s.name = system_from_string(j.at("name").get<std::string>());
  s.state_dim = j.at("state_dim").get<int>();
  s.mode_count = j.at("mode_count").get<int>();
  s.dt = j.at("dt").get<double>();
  s.horizon = j.at("horizon").get<int>();
  s.noise_std = j.at("noise_std").get<double>();
  s.object_count = j.at("object_count").get<int>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  s.integration_substeps = j.at("integration_substeps").get<int>();
  s.particle_radius = j.at("particle_radius").get<double>();
  return s;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["seed"] = ds.spec.rng_seed;
  manifest["spec"] = spec_to_json(ds.spec);
  const std::pair<const char*, const std::vector<Trajectory>*> splits[] = {
      {"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
  for (const auto& [name, trajs] : splits) {
    manifest["splits"][name] = json::array();
    for (std::size_t i = 0; i < trajs->size(); ++i) {
      char base[64];
      std::snprintf(base, sizeof(base), "%s_%04zu", name, i);
      const std::string csv = std::string(base) + ".csv";
      write_trajectory_csv((*trajs)[i], dir + "/" + csv);
      json sidecar;
      sidecar["spec"] = spec_to_json(ds.spec);
      sidecar["split"] = name;
      sidecar["index"] = i;
      std::ofstream sc(dir + "/" + std::string(base) + ".json");
      sc << sidecar.dump(2) << "\n";
      manifest["splits"][name].push_back(csv);
    }
  }
  std::ofstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read " + manifest_path);
  json manifest;
  in >> manifest;
  Dataset ds;
  ds.spec = spec_from_json(manifest.at("spec"));
  const fs::path dir = fs::path(manifest_path).parent_path();
  for (const char* name : {"train", "val", "test"}) {
    auto& split = name == std::string("train") ? ds.train
                : name == std::string("val") ? ds.val
                                             : ds.test;
    for (const auto& file : manifest.at("splits").at(name)) {
      split.push_back(read_trajectory_csv((dir / file.get<std::string>()).string(), ds.spec.dt));
    }
  }
  return ds;
}

namespace {

TermDescriptor monomial(int dims, std::initializer_list<std::pair<int, int>> powers) {
  TermDescriptor t;
  t.exponents.assign(dims, 0);
  for (auto [d, e] : powers) t.exponents[d] = e;
  return t;
}

void set_coeff(CoefficientTensor& w, const BasisLibrary& lib, int mode,
               const TermDescriptor& term, int dim, double value) {
  const int c = lib.find(term);
  if (c >= 0) w.at(mode, c, dim) = value;
}

}  // namespace

CoefficientTensor ground_truth_coefficients(SystemName name, const BasisLibrary& lib) {
  const int M = lib.state_dim();
  auto mono = [&](std::initializer_list<std::pair<int, int>> p) { return monomial(M, p); };
  switch (name) {
    case SystemName::MassSpringHopper: {
      CoefficientTensor w(2, lib.size(), M);
      // compression: dl/dt = v, dv/dt = 11 - 10 l
      set_coeff(w, lib, 0, mono({{1, 1}}), 0, 1.0);
      set_coeff(w, lib, 0, mono({}), 1, 11.0);
      set_coeff(w, lib, 0, mono({{0, 1}}), 1, -10.0);
      // flight: dl/dt = v, dv/dt = -1
      set_coeff(w, lib, 1, mono({{1, 1}}), 0, 1.0);
      set_coeff(w, lib, 1, mono({}), 1, -1.0);
      return w;
    }
    case SystemName::SIR: {
      CoefficientTensor w(2, lib.size(), M);
      for (int mode = 0; mode < 2; ++mode) {
        const double b = mode == 1 ? 0.0168 : 0.0052;
        set_coeff(w, lib, mode, mono({}), 0, 2.74);
        set_coeff(w, lib, mode, mono({{0, 1}, {1, 1}}), 0, -b);
        set_coeff(w, lib, mode, mono({{0, 1}}), 0, -0.0027);
        set_coeff(w, lib, mode, mono({{0, 1}, {1, 1}}), 1, b);
        set_coeff(w, lib, mode, mono({{1, 1}}), 1, -0.20);
      }
      return w;
    }
    case SystemName::OdeParticles: {
      CoefficientTensor w(4, lib.size(), M);
      set_coeff(w, lib, 0, mono({{0, 1}}), 0, 1.0);
      set_coeff(w, lib, 0, mono({{0, 1}, {1, 1}}), 0, -1.0);
      set_coeff(w, lib, 0, mono({{1, 1}}), 1, -1.0);
      set_coeff(w, lib, 0, mono({{0, 1}, {1, 1}}), 1, 1.0);
      set_coeff(w, lib, 1, mono({{0, 3}}), 0, -0.1);
      set_coeff(w, lib, 1, mono({{1, 3}}), 0, 2.0);
      set_coeff(w, lib, 1, mono({{0, 3}}), 1, -2.0);
      set_coeff(w, lib, 1, mono({{1, 3}}), 1, -0.1);
      set_coeff(w, lib, 2, mono({}), 1, 2.0);
      set_coeff(w, lib, 3, mono({}), 1, -2.0);
      return w;
    }
    case SystemName::CubicOscillator: {
      CoefficientTensor w(1, lib.size(), M);
      set_coeff(w, lib, 0, mono({{0, 3}}), 0, -0.1);
      set_coeff(w, lib, 0, mono({{1, 3}}), 0, 2.0);
      set_coeff(w, lib, 0, mono({{0, 3}}), 1, -2.0);
      set_coeff(w, lib, 0, mono({{1, 3}}), 1, -0.1);
      return w;
    }
    case SystemName::CoupledLinear: {
      CoefficientTensor w(1, lib.size(), M);
      set_coeff(w, lib, 0, mono({{2, 1}}), 0, 1.0);
      set_coeff(w, lib, 0, mono({{3, 1}}), 1, 1.0);
      set_coeff(w, lib, 0, mono({{0, 1}}), 2, -6.0);
      set_coeff(w, lib, 0, mono({{1, 1}}), 2, 2.0);
      set_coeff(w, lib, 0, mono({{0, 1}}), 3, 2.0);
      set_coeff(w, lib, 0, mono({{1, 1}}), 3, -6.0);
      return w;
    }
    case SystemName::Lorenz63: {
      CoefficientTensor w(1, lib.size(), M);
      set_coeff(w, lib, 0, mono({{1, 1}}), 0, 10.0);
      set_coeff(w, lib, 0, mono({{0, 1}}), 0, -10.0);
      set_coeff(w, lib, 0, mono({{0, 1}}), 1, 28.0);
      set_coeff(w, lib, 0, mono({{0, 1}, {2, 1}}), 1, -1.0);
      set_coeff(w, lib, 0, mono({{1, 1}}), 1, -1.0);
      set_coeff(w, lib, 0, mono({{0, 1}, {1, 1}}), 2, 1.0);
      set_coeff(w, lib, 0, mono({{2, 1}}), 2, -2.67);
      return w;
    }
    case SystemName::HopfBifurcation: {
      CoefficientTensor w(1, lib.size(), M);
      set_coeff(w, lib, 0, mono({{0, 1}}), 0, 0.5);
      set_coeff(w, lib, 0, mono({{1, 1}}), 0, 1.0);
      set_coeff(w, lib, 0, mono({{0, 3}}), 0, -1.0);
      set_coeff(w, lib, 0, mono({{0, 1}, {1, 2}}), 0, -1.0);
      set_coeff(w, lib, 0, mono({{0, 1}}), 1, -1.0);
      set_coeff(w, lib, 0, mono({{1, 1}}), 1, 0.5);
      set_coeff(w, lib, 0, mono({{0, 2}, {1, 1}}), 1, -1.0);
      set_coeff(w, lib, 0, mono({{1, 3}}), 1, -1.0);
      return w;
    }
    case SystemName::SelkovGlycolysis: {
      CoefficientTensor w(1, lib.size(), M);
      set_coeff(w, lib, 0, mono({{0, 1}}), 0, -1.0);
      set_coeff(w, lib, 0, mono({{1, 1}}), 0, 0.08);
      set_coeff(w, lib, 0, mono({{0, 2}, {1, 1}}), 0, 1.0);
      set_coeff(w, lib, 0, mono({}), 1, 0.6);
      set_coeff(w, lib, 0, mono({{1, 1}}), 1, -0.08);
      set_coeff(w, lib, 0, mono({{0, 2}, {1, 1}}), 1, -1.0);
      return w;
    }
    case SystemName::DuffingOscillator: {
      CoefficientTensor w(1, lib.size(), M);
      set_coeff(w, lib, 0, mono({{1, 1}}), 0, 1.0);
      set_coeff(w, lib, 0, mono({{0, 3}}), 1, -1.0);
      set_coeff(w, lib, 0, mono({{0, 1}}), 1, 1.0);
      set_coeff(w, lib, 0, mono({{1, 1}}), 1, -0.35);
      return w;
    }
    default:
      throw std::invalid_argument("ground_truth_coefficients: unsupported system");
  }
}

}  // namespace amore::sim
