// Command-line entry point: dataset generation, training, segmentation,
// forecasting, equation readout and run reporting.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "amore/config.hpp"
#include "amore/metrics.hpp"
#include "amore/mio.hpp"
#include "amore/model.hpp"
#include "amore/sim/dataset.hpp"
#include "amore/train.hpp"
#include "amore/twostage.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> system;
  std::optional<std::string> out_dir;
  std::optional<std::string> model_family;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "Experiment config file (key = value sections)");
  cmd->add_option("--set", args.overrides, "Override: section.key=value (repeatable)");
  cmd->add_option("--seed", args.seed, "Root seed (overrides experiment.seed)");
  cmd->add_option("--system", args.system, "System name (overrides experiment.system)");
  cmd->add_option("--out", args.out_dir, "Output directory (overrides experiment.output_dir)");
  cmd->add_option("--model", args.model_family, "Model family: amore | amore_mio | twostage");
}

amore::ExperimentConfig resolve_config(const CommonArgs& args) {
  std::vector<std::string> overrides = args.overrides;
  if (args.seed) overrides.push_back("experiment.seed=" + std::to_string(*args.seed));
  if (args.system) overrides.push_back("experiment.system=" + *args.system);
  if (args.out_dir) overrides.push_back("experiment.output_dir=" + *args.out_dir);
  if (args.model_family) overrides.push_back("experiment.model=" + *args.model_family);
  amore::ExperimentConfig cfg = args.config_file.empty()
                                    ? amore::ExperimentConfig::from_overrides(overrides)
                                    : amore::ExperimentConfig::load(args.config_file, overrides);
  return cfg;
}

fs::path output_root(const amore::ExperimentConfig& cfg) {
  const char* env = std::getenv("AMORE_OUT_DIR");
  fs::path dir = cfg.output_dir;
  if (env && *env) dir = fs::path(env) / dir;
  return dir;
}

void write_run_json(const amore::ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "run.json");
  if (!out) throw std::runtime_error("cannot write run.json");
  out << cfg.resolved_json() << "\n";
}

amore::sim::Dataset obtain_dataset(const amore::ExperimentConfig& cfg) {
  if (!cfg.dataset_dir.empty())
    return amore::sim::load_dataset((fs::path(cfg.dataset_dir) / "manifest.json").string());
  if (!cfg.seed_set) throw std::invalid_argument("generation requires a seed");
  return amore::sim::build_dataset(cfg.system_spec(), cfg.n_train, cfg.n_val, cfg.n_test);
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw std::runtime_error("non-finite output: " + what);
}

// ---------------------------------------------------------------------------

int cmd_generate(const CommonArgs& args) {
  const auto cfg = resolve_config(args);
  if (!cfg.seed_set) throw std::invalid_argument("generate requires a seed");
  const fs::path dir = output_root(cfg);
  write_run_json(cfg, dir);
  const auto ds = obtain_dataset(cfg);
  amore::sim::save_dataset(ds, (dir / "dataset").string());
  std::printf("wrote dataset with %zu/%zu/%zu trajectories to %s\n", ds.train.size(),
              ds.val.size(), ds.test.size(), (dir / "dataset").c_str());
  return 0;
}

int cmd_train(const CommonArgs& args) {
  auto cfg = resolve_config(args);
  if (!cfg.seed_set) throw std::invalid_argument("train requires a seed");
  const fs::path dir = output_root(cfg);
  write_run_json(cfg, dir);
  const auto ds = obtain_dataset(cfg);

  amore::TrainSchedule sched = cfg.train;
  sched.seed = cfg.seed;
  amore::TrainResult result;
  amore::Rng init_rng = amore::Rng(cfg.seed).split(0x1417);

  if (cfg.model_family == "amore") {
    amore::AmoreModel model(cfg.model, ds.spec.state_dim, init_rng);
    result = amore::train(model, ds, sched);
    model.save_checkpoint((dir / "checkpoint.json").string());
    for (double v : model.params().values()) require_finite(v, "checkpoint parameter");
  } else if (cfg.model_family == "amore_mio") {
    amore::MioModel model(cfg.mio_config(), ds.spec.state_dim, init_rng);
    result = amore::train_mio(model, ds, sched);
    model.save_checkpoint((dir / "checkpoint.json").string());
    for (double v : model.params().values()) require_finite(v, "checkpoint parameter");
  } else {
    throw std::invalid_argument("train applies to amore or amore_mio (twostage has no training)");
  }
  amore::write_train_log_csv((dir / "train_log.csv").string(), result.log);
  if (result.diverged) {
    std::fprintf(stderr, "training diverged at step %ld; kept last good checkpoint\n",
                 result.diverged_step);
    return 1;
  }
  std::printf("trained %s on %s: final val accuracy %.4f\n", cfg.model_family.c_str(),
              cfg.system.c_str(), result.final_val_accuracy);
  return 0;
}

void write_segmentation_csv(const fs::path& path, const amore::PosteriorSummary& summary) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  std::fprintf(f, "t,decoded_mode");
  for (int k = 0; k < summary.modes; ++k) std::fprintf(f, ",gamma_%d", k);
  std::fprintf(f, "\n");
  for (int t = 0; t < summary.steps; ++t) {
    std::fprintf(f, "%d,%d", t, summary.decoded_modes[t]);
    for (int k = 0; k < summary.modes; ++k) std::fprintf(f, ",%.17g", summary.gamma_at(t, k));
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

void write_edge_csv(const fs::path& path, const amore::MioEval& eval, int objects) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  const int L = eval.edges.types;
  std::fprintf(f, "t,src,dst");
  for (int l = 0; l < L; ++l) std::fprintf(f, ",p_type_%d", l);
  std::fprintf(f, "\n");
  for (int t = 0; t < eval.edges.steps; ++t) {
    for (int src = 0; src < objects; ++src) {
      for (int dst = 0; dst < objects; ++dst) {
        std::fprintf(f, "%d,%d,%d", t, src, dst);
        const std::size_t off =
            (static_cast<std::size_t>(t) * objects * objects +
             static_cast<std::size_t>(src) * objects + dst) * L;
        for (int l = 0; l < L; ++l) std::fprintf(f, ",%.17g", eval.edge_probs[off + l]);
        std::fprintf(f, "\n");
      }
    }
  }
  std::fclose(f);
}

// Per-step learned/true coefficient vectors over the test split.
double assemble_rer(const amore::BasisLibrary& lib, const amore::CoefficientTensor& learned,
                    amore::sim::SystemName system,
                    const std::vector<std::vector<int>>& decoded,
                    const std::vector<const amore::sim::Trajectory*>& trajs,
                    const std::vector<int>& objects) {
  const auto truth = amore::sim::ground_truth_coefficients(system, lib);
  const int M = lib.state_dim(), C = lib.size();
  std::vector<std::vector<double>> lvecs, tvecs;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& traj = *trajs[i];
    for (int t = 0; t < traj.steps; ++t) {
      std::vector<double> lv(static_cast<std::size_t>(C) * M), tv(lv.size());
      const int kd = decoded[i][t];
      const int kt = traj.mode(t, objects[i]);
      for (int c = 0; c < C; ++c)
        for (int m = 0; m < M; ++m) {
          lv[static_cast<std::size_t>(c) * M + m] = learned.at(kd, c, m);
          tv[static_cast<std::size_t>(c) * M + m] = truth.at(kt, c, m);
        }
      lvecs.push_back(std::move(lv));
      tvecs.push_back(std::move(tv));
    }
  }
  return amore::metrics::rer(lvecs, tvecs);
}

int cmd_segment(const CommonArgs& args, const std::string& checkpoint) {
  const auto cfg = resolve_config(args);
  const fs::path dir = output_root(cfg);
  write_run_json(cfg, dir);
  const auto ds = obtain_dataset(cfg);

  std::vector<int> pred, truth;
  amore::metrics::MetricReport report;
  report.dataset = cfg.system;
  report.method = cfg.model_family;
  report.seed = cfg.seed;

  if (cfg.model_family == "twostage") {
    const auto lib = amore::BasisLibrary::build(ds.spec.state_dim, cfg.model.degree,
                                                cfg.model.extras);
    int idx = 0;
    for (const auto& traj : ds.test) {
      const auto result = amore::twostage::run(traj, lib, cfg.knn_neighbors, cfg.stls_threshold);
      pred.insert(pred.end(), result.step_modes.begin(), result.step_modes.end());
      for (int t = 0; t < traj.steps; ++t) truth.push_back(traj.mode(t));
      std::FILE* f =
          std::fopen((dir / ("segmentation_" + std::to_string(idx) + ".csv")).c_str(), "w");
      if (!f) throw std::runtime_error("cannot write segmentation csv");
      std::fprintf(f, "t,decoded_mode\n");
      for (int t = 0; t < traj.steps; ++t) std::fprintf(f, "%d,%d\n", t, result.step_modes[t]);
      std::fclose(f);
      ++idx;
    }
    int k_pred = 0;
    for (int p : pred) k_pred = std::max(k_pred, p + 1);
    const auto score =
        amore::metrics::hungarian_accuracy_f1(pred, truth, k_pred, ds.spec.mode_count);
    report.nmi = score.nmi;
    report.ari = score.ari;
    report.accuracy = score.accuracy;
    report.f1 = score.f1;
  } else if (cfg.model_family == "amore") {
    const auto model = amore::AmoreModel::from_checkpoint(checkpoint);
    std::vector<std::vector<int>> decoded;
    std::vector<const amore::sim::Trajectory*> trajs;
    std::vector<int> objs;
    int idx = 0;
    for (const auto& traj : ds.test) {
      const auto summary = model.forward_backward(traj);
      write_segmentation_csv(dir / ("segmentation_" + std::to_string(idx) + ".csv"), summary);
      pred.insert(pred.end(), summary.decoded_modes.begin(), summary.decoded_modes.end());
      for (int t = 0; t < traj.steps; ++t) truth.push_back(traj.mode(t));
      decoded.push_back(summary.decoded_modes);
      trajs.push_back(&traj);
      objs.push_back(0);
      ++idx;
    }
    const auto score =
        amore::metrics::hungarian_accuracy_f1(pred, truth, model.num_modes(), ds.spec.mode_count);
    report.nmi = score.nmi;
    report.ari = score.ari;
    report.accuracy = score.accuracy;
    report.f1 = score.f1;
    try {
      report.rer = assemble_rer(model.library(), model.coefficients(), ds.spec.name, decoded,
                                trajs, objs);
    } catch (const std::exception&) {
      // no ground-truth table for this system; leave unset
    }
  } else {
    const auto model = amore::MioModel::from_checkpoint(checkpoint);
    std::vector<std::vector<int>> decoded;
    std::vector<const amore::sim::Trajectory*> trajs;
    std::vector<int> objs;
    int idx = 0;
    for (const auto& traj : ds.test) {
      const auto eval = model.evaluate(traj);
      write_edge_csv(dir / ("edges_" + std::to_string(idx) + ".csv"), eval, traj.objects);
      for (int n = 0; n < traj.objects; ++n) {
        write_segmentation_csv(
            dir / ("segmentation_" + std::to_string(idx) + "_obj" + std::to_string(n) + ".csv"),
            eval.per_object[n]);
        pred.insert(pred.end(), eval.per_object[n].decoded_modes.begin(),
                    eval.per_object[n].decoded_modes.end());
        for (int t = 0; t < traj.steps; ++t) truth.push_back(traj.mode(t, n));
        decoded.push_back(eval.per_object[n].decoded_modes);
        trajs.push_back(&traj);
        objs.push_back(n);
      }
      ++idx;
    }
    const auto score =
        amore::metrics::hungarian_accuracy_f1(pred, truth, model.num_modes(), ds.spec.mode_count);
    report.nmi = score.nmi;
    report.ari = score.ari;
    report.accuracy = score.accuracy;
    report.f1 = score.f1;
    try {
      report.rer = assemble_rer(model.library(), model.coefficients(), ds.spec.name, decoded,
                                trajs, objs);
    } catch (const std::exception&) {
    }
  }

  require_finite(report.accuracy, "segmentation accuracy");
  std::ofstream out(dir / "scores.json");
  out << amore::metrics::report_to_json(report) << "\n";
  std::printf("segmentation accuracy %.4f nmi %.4f ari %.4f f1 %.4f\n", report.accuracy,
              report.nmi, report.ari, report.f1);
  return 0;
}

int cmd_forecast(const CommonArgs& args, const std::string& checkpoint, int horizon_flag,
                 const std::string& mode_flag) {
  auto cfg = resolve_config(args);
  const fs::path dir = output_root(cfg);
  write_run_json(cfg, dir);
  const auto ds = obtain_dataset(cfg);
  const int horizon = horizon_flag > 0 ? horizon_flag : cfg.forecast_horizon;
  const std::string mode_s = mode_flag.empty() ? cfg.forecast_mode : mode_flag;
  const auto fmode = mode_s == "multi_step" ? amore::ForecastMode::MultiStep
                                            : amore::ForecastMode::OneStep;

  const int M = ds.spec.state_dim;
  std::vector<double> all_pred, all_truth;
  int idx = 0;
  auto emit = [&](const amore::sim::Trajectory& traj, int object, const amore::Forecast& fc) {
    std::FILE* f = std::fopen(
        (dir / ("forecast_" + std::to_string(idx) + "_obj" + std::to_string(object) + ".csv"))
            .c_str(),
        "w");
    if (!f) throw std::runtime_error("cannot write forecast csv");
    std::fprintf(f, "t");
    for (int m = 0; m < M; ++m) std::fprintf(f, ",pred_y_%d", m);
    for (int m = 0; m < M; ++m) std::fprintf(f, ",true_y_%d", m);
    std::fprintf(f, ",predicted_mode\n");
    for (int h = 0; h < fc.horizon; ++h) {
      const int t = cfg.context_len + h;
      std::fprintf(f, "%d", t);
      for (int m = 0; m < M; ++m)
        std::fprintf(f, ",%.17g", fc.predictions[static_cast<std::size_t>(h) * M + m]);
      for (int m = 0; m < M; ++m) {
        const double tv = t < traj.steps ? traj.obs(t, object, m)
                                         : std::numeric_limits<double>::quiet_NaN();
        std::fprintf(f, ",%.17g", tv);
        if (t < traj.steps) {
          all_pred.push_back(fc.predictions[static_cast<std::size_t>(h) * M + m]);
          all_truth.push_back(tv);
        }
      }
      std::fprintf(f, ",%d\n", fc.predicted_modes[h]);
    }
    std::fclose(f);
  };

  if (cfg.model_family == "amore") {
    const auto model = amore::AmoreModel::from_checkpoint(checkpoint);
    for (const auto& traj : ds.test) {
      emit(traj, 0, model.forecast(traj, 0, cfg.context_len, horizon, fmode));
      ++idx;
    }
  } else if (cfg.model_family == "amore_mio") {
    const auto model = amore::MioModel::from_checkpoint(checkpoint);
    for (const auto& traj : ds.test) {
      for (int n = 0; n < traj.objects; ++n)
        emit(traj, n, model.forecast(traj, n, cfg.context_len, horizon, fmode));
      ++idx;
    }
  } else {
    throw std::invalid_argument("forecast applies to amore or amore_mio");
  }

  amore::metrics::MetricReport report;
  report.dataset = cfg.system;
  report.method = cfg.model_family;
  report.seed = cfg.seed;
  if (!all_truth.empty()) {
    const auto err = amore::metrics::nmae_nrmse(all_pred, all_truth, M);
    report.nmae = err.nmae;
    report.nrmse = err.nrmse;
    require_finite(err.nmae, "nmae");
    std::printf("forecast (%s, horizon %d): nmae %.5f nrmse %.5f\n", mode_s.c_str(), horizon,
                err.nmae, err.nrmse);
  }
  std::ofstream out(dir / "forecast_scores.json");
  out << amore::metrics::report_to_json(report) << "\n";
  return 0;
}

int cmd_equations(const CommonArgs& args, const std::string& checkpoint, double prune_flag) {
  const auto cfg = resolve_config(args);
  const fs::path dir = output_root(cfg);
  write_run_json(cfg, dir);
  const double threshold = prune_flag >= 0 ? prune_flag : cfg.prune_threshold;

  amore::BasisLibrary lib;
  amore::CoefficientTensor coeffs;
  if (cfg.model_family == "amore_mio") {
    const auto model = amore::MioModel::from_checkpoint(checkpoint);
    lib = model.library();
    coeffs = model.coefficients();
  } else {
    const auto model = amore::AmoreModel::from_checkpoint(checkpoint);
    lib = model.library();
    coeffs = model.coefficients();
  }
  const auto names = amore::default_var_names(lib.state_dim());
  const std::string text = amore::render_equations(lib, coeffs, threshold, names);
  {
    std::ofstream out(dir / "equations.txt");
    out << text;
  }
  {
    std::ofstream out(dir / "equations.json");
    out << amore::equations_to_json(amore::prune_equations(lib, coeffs, threshold, names), names)
        << "\n";
  }
  std::fputs(text.c_str(), stdout);

  // RER against the generating equations where ground truth is known
  try {
    const auto ds = obtain_dataset(cfg);
    amore::metrics::MetricReport report;
    report.dataset = cfg.system;
    report.method = cfg.model_family;
    report.seed = cfg.seed;
    std::vector<std::vector<int>> decoded;
    std::vector<const amore::sim::Trajectory*> trajs;
    std::vector<int> objs;
    if (cfg.model_family == "amore") {
      const auto model = amore::AmoreModel::from_checkpoint(checkpoint);
      for (const auto& traj : ds.test) {
        decoded.push_back(model.forward_backward(traj).decoded_modes);
        trajs.push_back(&traj);
        objs.push_back(0);
      }
    } else if (cfg.model_family == "amore_mio") {
      const auto model = amore::MioModel::from_checkpoint(checkpoint);
      for (const auto& traj : ds.test) {
        const auto eval = model.evaluate(traj);
        for (int n = 0; n < traj.objects; ++n) {
          decoded.push_back(eval.per_object[n].decoded_modes);
          trajs.push_back(&traj);
          objs.push_back(n);
        }
      }
    }
    if (!trajs.empty()) {
      report.rer = assemble_rer(lib, coeffs, ds.spec.name, decoded, trajs, objs);
      std::printf("rer %.6g\n", report.rer);
    }
    std::ofstream out(dir / "equation_scores.json");
    out << amore::metrics::report_to_json(report) << "\n";
  } catch (const std::exception& e) {
    std::fprintf(stderr, "note: rer not computed (%s)\n", e.what());
  }
  return 0;
}

int cmd_report(const std::string& run_dir) {
  const fs::path dir = run_dir;
  if (!fs::exists(dir / "run.json")) throw std::invalid_argument("no run.json in " + run_dir);
  json aggregate;
  {
    std::ifstream in(dir / "run.json");
    in >> aggregate["run"];
  }
  aggregate["metrics"] = json::array();
  for (const char* name : {"scores.json", "forecast_scores.json", "equation_scores.json"}) {
    if (fs::exists(dir / name)) {
      std::ifstream in(dir / name);
      json j;
      in >> j;
      aggregate["metrics"].push_back(j);
    }
  }
  json files = json::array();
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("segmentation_", 0) == 0 || name.rfind("forecast_", 0) == 0 ||
        name.rfind("edges_", 0) == 0)
      files.push_back(name);
  }
  std::sort(files.begin(), files.end());
  aggregate["artifacts"] = files;
  std::ofstream out(dir / "report.json");
  out << aggregate.dump(2) << "\n";

  std::FILE* f = std::fopen((dir / "metrics_table.csv").c_str(), "w");
  if (!f) throw std::runtime_error("cannot write metrics_table.csv");
  std::fprintf(f, "source,dataset,method,nmi,ari,accuracy,f1,rer,nmae,nrmse,seed\n");
  int row = 0;
  for (const auto& j : aggregate["metrics"]) {
    auto cell = [&](const char* key) {
      if (!j.contains(key) || j[key].is_null()) return std::string("");
      if (j[key].is_string()) return j[key].get<std::string>();
      return json(j[key]).dump();
    };
    std::fprintf(f, "%d,%s,%s,%s,%s,%s,%s,%s,%s,%s,%s\n", row++, cell("dataset").c_str(),
                 cell("method").c_str(), cell("nmi").c_str(), cell("ari").c_str(),
                 cell("accuracy").c_str(), cell("f1").c_str(), cell("rer").c_str(),
                 cell("nmae").c_str(), cell("nrmse").c_str(), cell("seed").c_str());
  }
  std::fclose(f);
  std::printf("wrote %s and %s\n", (dir / "report.json").c_str(),
              (dir / "metrics_table.csv").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Joint mode segmentation and closed-form equation discovery for hybrid dynamical systems"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, seg_args, fc_args, eq_args;
  std::string checkpoint, run_dir, fc_mode;
  int fc_horizon = -1;
  double prune = -1.0;

  auto* gen = app.add_subcommand("generate", "Simulate a dataset and write CSV + manifest");
  add_common(gen, gen_args);
  auto* tr = app.add_subcommand("train", "Train a model; writes checkpoint and training log");
  add_common(tr, train_args);
  auto* seg = app.add_subcommand("segment", "Decode modes on the test split and score them");
  add_common(seg, seg_args);
  seg->add_option("--checkpoint", checkpoint, "Model checkpoint JSON");
  auto* fc = app.add_subcommand("forecast", "Forecast held-out steps and score the error");
  add_common(fc, fc_args);
  fc->add_option("--checkpoint", checkpoint, "Model checkpoint JSON");
  fc->add_option("--horizon", fc_horizon, "Forecast horizon (steps)");
  fc->add_option("--mode", fc_mode, "one_step | multi_step");
  auto* eq = app.add_subcommand("equations", "Render discovered equations and report RER");
  add_common(eq, eq_args);
  eq->add_option("--checkpoint", checkpoint, "Model checkpoint JSON");
  eq->add_option("--prune-threshold", prune, "Coefficient magnitude cutoff for the readout");
  auto* rep = app.add_subcommand("report", "Aggregate a run directory into report.json");
  rep->add_option("--run-dir", run_dir, "Run directory to aggregate")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_args);
    if (tr->parsed()) return cmd_train(train_args);
    if (seg->parsed()) {
      if (seg_args.model_family.value_or("") != "twostage" && checkpoint.empty())
        throw std::invalid_argument("segment requires --checkpoint (except for twostage)");
      return cmd_segment(seg_args, checkpoint);
    }
    if (fc->parsed()) {
      if (checkpoint.empty()) throw std::invalid_argument("forecast requires --checkpoint");
      return cmd_forecast(fc_args, checkpoint, fc_horizon, fc_mode);
    }
    if (eq->parsed()) {
      if (checkpoint.empty()) throw std::invalid_argument("equations requires --checkpoint");
      return cmd_equations(eq_args, checkpoint, prune);
    }
    if (rep->parsed()) return cmd_report(run_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
