#include "amore/config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace amore {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

using KvMap = std::map<std::string, std::string>;  // "section.key" -> value

KvMap parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config: " + path);
  KvMap kv;
  std::string line, section;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("malformed config line: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    kv[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

void apply_overrides(KvMap& kv, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override must look like section.key=value: " + o);
    kv[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
  }
}

struct Reader {
  const KvMap& kv;
  mutable std::vector<std::string> unknown;

  bool has(const std::string& key) const { return kv.count(key) != 0; }
  std::string str(const std::string& key, const std::string& dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
  }
  double num(const std::string& key, double dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size())
      throw std::invalid_argument("bad numeric value for " + key + ": " + it->second);
    return v;
  }
  int integer(const std::string& key, int dflt) const {
    return static_cast<int>(num(key, dflt));
  }
  bool boolean(const std::string& key, bool dflt) const {
    auto it = kv.find(key);
    if (it == kv.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::invalid_argument("bad boolean for " + key + ": " + it->second);
  }
};

std::vector<ElementarySpec> parse_extras(const std::string& s) {
  // comma list of cos:<dim> | sin:<dim> | exp:<dim>
  std::vector<ElementarySpec> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    const std::string kind = colon == std::string::npos ? item : item.substr(0, colon);
    const int dim = colon == std::string::npos ? 0 : std::stoi(item.substr(colon + 1));
    ElementarySpec spec;
    if (kind == "cos") spec.kind = Elementary::Cos;
    else if (kind == "sin") spec.kind = Elementary::Sin;
    else if (kind == "exp") spec.kind = Elementary::Exp;
    else throw std::invalid_argument("unknown elementary term: " + item);
    spec.dim = dim;
    out.push_back(spec);
  }
  return out;
}

ExperimentConfig from_kv(const KvMap& kv) {
  Reader r{kv};
  ExperimentConfig c;
  c.system = r.str("experiment.system", c.system);
  c.model_family = r.str("experiment.model", c.model_family);
  c.output_dir = r.str("experiment.output_dir", c.output_dir);
  c.seed_set = r.has("experiment.seed");
  c.seed = static_cast<std::uint64_t>(r.num("experiment.seed", 0));
  c.dataset_dir = r.str("experiment.dataset_dir", "");

  c.n_train = r.integer("data.n_train", c.n_train);
  c.n_val = r.integer("data.n_val", c.n_val);
  c.n_test = r.integer("data.n_test", c.n_test);
  c.horizon = r.integer("data.horizon", c.horizon);
  c.dt = r.num("data.dt", c.dt);
  c.noise_std = r.num("data.noise_std", c.noise_std);
  c.objects = r.integer("data.objects", c.objects);
  c.particle_radius = r.num("data.particle_radius", c.particle_radius);
  c.integration_substeps = r.integer("data.integration_substeps", c.integration_substeps);

  c.model.num_modes = r.integer("model.num_modes", c.model.num_modes);
  c.model.d_min = r.integer("model.d_min", c.model.d_min);
  c.model.d_max = r.integer("model.d_max", c.model.d_max);
  c.model.tau_z = r.num("model.tau_z", c.model.tau_z);
  c.model.lambda_l1 = r.num("model.lambda_l1", c.model.lambda_l1);
  c.model.sigma_init = r.num("model.sigma_init", c.model.sigma_init);
  c.model.degree = r.integer("model.degree", c.model.degree);
  c.model.extras = parse_extras(r.str("model.extras", ""));
  c.model.use_count_variables = r.boolean("model.use_count_variables", true);
  c.model.hidden_width = r.integer("model.hidden_width", c.model.hidden_width);
  const std::string integ = r.str("model.mean_integrator", "euler");
  if (integ == "euler") c.model.mean_integrator = MeanIntegrator::Euler;
  else if (integ == "rk4") c.model.mean_integrator = MeanIntegrator::Rk4;
  else throw std::invalid_argument("unknown mean_integrator: " + integ);
  c.model.mean_substeps = r.integer("model.mean_substeps", c.model.mean_substeps);
  c.model.sigma_floor = r.num("model.sigma_floor", c.model.sigma_floor);
  c.edge_types = r.integer("model.edge_types", c.edge_types);
  c.tau_e = r.num("model.tau_e", c.tau_e);
  c.gumbel_tau = r.num("model.gumbel_tau", c.gumbel_tau);
  c.edge_prior0 = r.num("model.edge_prior0", c.edge_prior0);

  c.train.steps = r.integer("train.steps", c.train.steps);
  c.train.batch_size = r.integer("train.batch_size", c.train.batch_size);
  c.train.lr.base = r.num("train.lr", c.train.lr.base);
  c.train.lr.warmup_init = r.num("train.lr_warmup_init", c.train.lr.warmup_init);
  c.train.lr.warmup_steps = r.integer("train.warmup_steps", c.train.lr.warmup_steps);
  c.train.lr.decay_rate = r.num("train.decay_rate", c.train.lr.decay_rate);
  c.train.adam.weight_decay = r.num("train.weight_decay", c.train.adam.weight_decay);
  c.train.adam.clip_norm = r.num("train.clip_norm", c.train.adam.clip_norm);
  c.train.coeff_lr_scale = r.num("train.coeff_lr_scale", c.train.coeff_lr_scale);
  c.train.sigma_lr_scale = r.num("train.sigma_lr_scale", c.train.sigma_lr_scale);
  c.train.eval_interval = r.integer("train.eval_interval", c.train.eval_interval);
  c.train.threads = r.integer("train.threads", c.train.threads);

  c.context_len = r.integer("eval.context_len", c.context_len);
  c.forecast_horizon = r.integer("eval.forecast_horizon", c.forecast_horizon);
  c.forecast_mode = r.str("eval.forecast_mode", c.forecast_mode);
  c.prune_threshold = r.num("eval.prune_threshold", c.prune_threshold);
  c.knn_neighbors = r.integer("twostage.knn_neighbors", c.knn_neighbors);
  c.stls_threshold = r.num("twostage.stls_threshold", c.stls_threshold);
  return c;
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        const std::vector<std::string>& overrides) {
  KvMap kv = parse_file(path);
  apply_overrides(kv, overrides);
  ExperimentConfig c = from_kv(kv);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_overrides(const std::vector<std::string>& overrides) {
  KvMap kv;
  apply_overrides(kv, overrides);
  ExperimentConfig c = from_kv(kv);
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (model_family != "amore" && model_family != "amore_mio" && model_family != "twostage")
    throw std::invalid_argument("unknown model family: " + model_family);
  if (forecast_mode != "one_step" && forecast_mode != "multi_step")
    throw std::invalid_argument("unknown forecast mode: " + forecast_mode);
  model.validate();
  sim::system_from_string(system);  // throws on unknown names
}

sim::SystemSpec ExperimentConfig::system_spec() const {
  sim::SystemSpec spec = sim::SystemSpec::standard(sim::system_from_string(system), seed);
  if (horizon > 0) spec.horizon = horizon;
  if (dt > 0.0) spec.dt = dt;
  spec.noise_std = noise_std;
  if (objects > 0) spec.object_count = objects;
  if (integration_substeps > 0) spec.integration_substeps = integration_substeps;
  spec.particle_radius = particle_radius;
  return spec;
}

MioConfig ExperimentConfig::mio_config() const {
  MioConfig mio;
  mio.base = model;
  mio.num_objects = system_spec().object_count;
  mio.edge_types = edge_types;
  mio.tau_e = tau_e;
  mio.gumbel_tau = gumbel_tau;
  mio.edge_prior.assign(edge_types, (1.0 - edge_prior0) / (edge_types - 1));
  mio.edge_prior[0] = edge_prior0;
  return mio;
}

std::string ExperimentConfig::resolved_json() const {
  nlohmann::json j;
  j["experiment"] = {{"system", system},
                     {"model", model_family},
                     {"output_dir", output_dir},
                     {"seed", seed},
                     {"dataset_dir", dataset_dir}};
  j["data"] = {{"n_train", n_train},
               {"n_val", n_val},
               {"n_test", n_test},
               {"horizon", horizon},
               {"dt", dt},
               {"noise_std", noise_std},
               {"objects", objects},
               {"particle_radius", particle_radius},
               {"integration_substeps", integration_substeps}};
  nlohmann::json extras = nlohmann::json::array();
  for (const auto& ex : model.extras) {
    const char* kind = ex.kind == Elementary::Cos ? "cos" : ex.kind == Elementary::Sin ? "sin" : "exp";
    extras.push_back(std::string(kind) + ":" + std::to_string(ex.dim));
  }
  j["model"] = {{"num_modes", model.num_modes},
                {"d_min", model.d_min},
                {"d_max", model.d_max},
                {"tau_z", model.tau_z},
                {"lambda_l1", model.lambda_l1},
                {"sigma_init", model.sigma_init},
                {"degree", model.degree},
                {"extras", extras},
                {"use_count_variables", model.use_count_variables},
                {"hidden_width", model.hidden_width},
                {"mean_integrator", model.mean_integrator == MeanIntegrator::Euler ? "euler" : "rk4"},
                {"mean_substeps", model.mean_substeps},
                {"sigma_floor", model.sigma_floor},
                {"edge_types", edge_types},
                {"tau_e", tau_e},
                {"gumbel_tau", gumbel_tau},
                {"edge_prior0", edge_prior0}};
  j["train"] = {{"steps", train.steps},
                {"batch_size", train.batch_size},
                {"lr", train.lr.base},
                {"lr_warmup_init", train.lr.warmup_init},
                {"warmup_steps", train.lr.warmup_steps},
                {"decay_rate", train.lr.decay_rate},
                {"weight_decay", train.adam.weight_decay},
                {"clip_norm", train.adam.clip_norm},
                {"coeff_lr_scale", train.coeff_lr_scale},
                {"sigma_lr_scale", train.sigma_lr_scale},
                {"eval_interval", train.eval_interval},
                {"threads", train.threads}};
  j["eval"] = {{"context_len", context_len},
               {"forecast_horizon", forecast_horizon},
               {"forecast_mode", forecast_mode},
               {"prune_threshold", prune_threshold}};
  j["twostage"] = {{"knn_neighbors", knn_neighbors}, {"stls_threshold", stls_threshold}};
  return j.dump(2);
}

}  // namespace amore
