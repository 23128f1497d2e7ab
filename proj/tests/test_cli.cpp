#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "amore/config.hpp"

namespace fs = std::filesystem;
using amore::ExperimentConfig;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AMORE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config files parse with sections, comments and overrides") {
  TempDir tmp("amore_cfg_test");
  const fs::path cfg_path = tmp.path / "toy.cfg";
  {
    std::ofstream out(cfg_path);
    out << "# toy experiment\n"
           "[experiment]\n"
           "system = mass_spring\n"
           "model = amore\n"
           "seed = 7\n"
           "output_dir = " << (tmp.path / "run").string() << "\n"
           "[data]\n"
           "n_train = 5\n"
           "n_val = 2\n"
           "n_test = 2\n"
           "horizon = 40\n"
           "[model]\n"
           "num_modes = 2\n"
           "d_min = 2\n"
           "d_max = 6\n"
           "hidden_width = 4\n"
           "extras = cos:0, exp:1\n"
           "[train]\n"
           "steps = 30\n"
           "batch_size = 5\n"
           "warmup_steps = 5\n"
           "eval_interval = 10\n";
  }
  const auto cfg = ExperimentConfig::load(cfg_path.string());
  CHECK(cfg.system == "mass_spring");
  CHECK(cfg.seed == 7);
  CHECK(cfg.seed_set);
  CHECK(cfg.n_train == 5);
  CHECK(cfg.horizon == 40);
  CHECK(cfg.model.num_modes == 2);
  REQUIRE(cfg.model.extras.size() == 2);
  CHECK(cfg.model.extras[0].kind == amore::Elementary::Cos);
  CHECK(cfg.model.extras[1].dim == 1);
  CHECK(cfg.train.steps == 30);

  const auto with_override =
      ExperimentConfig::load(cfg_path.string(), {"model.num_modes=3", "train.steps=11"});
  CHECK(with_override.model.num_modes == 3);
  CHECK(with_override.train.steps == 11);

  CHECK_THROWS(ExperimentConfig::load(cfg_path.string(), {"experiment.model=bogus"}));

  // resolved json replays all fields
  const auto j = nlohmann::json::parse(cfg.resolved_json());
  CHECK(j["model"]["num_modes"] == 2);
  CHECK(j["train"]["steps"] == 30);
  CHECK(j["eval"]["prune_threshold"] == 0.05);
}

TEST_CASE("generate is deterministic and produces manifest plus sidecars") {
  TempDir tmp("amore_cli_gen");
  const std::string out1 = (tmp.path / "a").string();
  const std::string out2 = (tmp.path / "b").string();
  const std::string common =
      "generate --system mass_spring --seed 7 --set data.n_train=3 --set data.n_val=1 "
      "--set data.n_test=1 --set data.horizon=30";
  REQUIRE(run_cli(common + " --out " + out1) == 0);
  REQUIRE(run_cli(common + " --out " + out2) == 0);
  CHECK(slurp(fs::path(out1) / "dataset" / "manifest.json") ==
        slurp(fs::path(out2) / "dataset" / "manifest.json"));
  CHECK(slurp(fs::path(out1) / "dataset" / "train_0000.csv") ==
        slurp(fs::path(out2) / "dataset" / "train_0000.csv"));
  CHECK(fs::exists(fs::path(out1) / "run.json"));
  CHECK(fs::exists(fs::path(out1) / "dataset" / "train_0000.json"));

  // header format of the trajectory csv
  const std::string csv = slurp(fs::path(out1) / "dataset" / "train_0000.csv");
  CHECK(csv.rfind("t,obj,y_0,y_1,mode\n", 0) == 0);
}

TEST_CASE("train, segment, forecast, equations and report run end to end on a toy") {
  TempDir tmp("amore_cli_train");
  const fs::path cfg_path = tmp.path / "toy.cfg";
  const std::string run_dir = (tmp.path / "run").string();
  {
    std::ofstream out(cfg_path);
    out << "[experiment]\nsystem = mass_spring\nmodel = amore\nseed = 3\noutput_dir = "
        << run_dir
        << "\n[data]\nn_train = 5\nn_val = 2\nn_test = 2\nhorizon = 50\n"
           "[model]\nnum_modes = 2\nd_min = 2\nd_max = 8\nhidden_width = 4\n"
           "mean_integrator = rk4\n"
           "[train]\nsteps = 40\nbatch_size = 5\nwarmup_steps = 10\neval_interval = 20\n"
           "lr = 0.001\ncoeff_lr_scale = 20\n"
           "[eval]\ncontext_len = 30\nforecast_horizon = 10\n";
  }
  REQUIRE(run_cli("train --config " + cfg_path.string()) == 0);
  CHECK(fs::exists(fs::path(run_dir) / "checkpoint.json"));
  const std::string log = slurp(fs::path(run_dir) / "train_log.csv");
  CHECK(log.rfind("step,nll,l1,val_accuracy\n", 0) == 0);
  CHECK(log.find("\n0,") != std::string::npos);

  // training is seed deterministic: rerun into another dir, compare checkpoints
  const std::string run_dir2 = (tmp.path / "run2").string();
  REQUIRE(run_cli("train --config " + cfg_path.string() + " --out " + run_dir2) == 0);
  CHECK(slurp(fs::path(run_dir) / "checkpoint.json") ==
        slurp(fs::path(run_dir2) / "checkpoint.json"));
  CHECK(slurp(fs::path(run_dir) / "train_log.csv") ==
        slurp(fs::path(run_dir2) / "train_log.csv"));

  const std::string ckpt = (fs::path(run_dir) / "checkpoint.json").string();
  REQUIRE(run_cli("segment --config " + cfg_path.string() + " --checkpoint " + ckpt) == 0);
  CHECK(fs::exists(fs::path(run_dir) / "segmentation_0.csv"));
  CHECK(fs::exists(fs::path(run_dir) / "scores.json"));
  const std::string seg = slurp(fs::path(run_dir) / "segmentation_0.csv");
  CHECK(seg.rfind("t,decoded_mode,gamma_0,gamma_1\n", 0) == 0);

  REQUIRE(run_cli("forecast --config " + cfg_path.string() + " --checkpoint " + ckpt +
                  " --mode one_step --horizon 10") == 0);
  CHECK(fs::exists(fs::path(run_dir) / "forecast_0_obj0.csv"));
  CHECK(fs::exists(fs::path(run_dir) / "forecast_scores.json"));

  REQUIRE(run_cli("equations --config " + cfg_path.string() + " --checkpoint " + ckpt) == 0);
  CHECK(fs::exists(fs::path(run_dir) / "equations.txt"));
  CHECK(fs::exists(fs::path(run_dir) / "equations.json"));

  REQUIRE(run_cli("report --run-dir " + run_dir) == 0);
  CHECK(fs::exists(fs::path(run_dir) / "report.json"));
  CHECK(fs::exists(fs::path(run_dir) / "metrics_table.csv"));
  const auto report = nlohmann::json::parse(slurp(fs::path(run_dir) / "report.json"));
  CHECK(report.contains("run"));
  CHECK(report["metrics"].size() >= 2);
}

TEST_CASE("equations on a checkpoint with injected ground truth matches the renderer") {
  TempDir tmp("amore_cli_eq");
  const std::string run_dir = (tmp.path / "run").string();
  // build a model, inject exact coefficients, save a checkpoint by hand
  amore::Rng rng(1);
  amore::AmoreConfig mc;
  mc.num_modes = 2;
  mc.degree = 2;
  mc.hidden_width = 4;
  amore::AmoreModel model(mc, 2, rng);
  const auto truth = amore::sim::ground_truth_coefficients(
      amore::sim::SystemName::MassSpringHopper, model.library());
  std::copy(truth.w.begin(), truth.w.end(), model.params().values_of("coeffs").begin());
  fs::create_directories(run_dir);
  const std::string ckpt = (fs::path(run_dir) / "ck.json").string();
  model.save_checkpoint(ckpt);

  REQUIRE(run_cli("equations --system mass_spring --seed 1 --out " + run_dir +
                  " --set data.n_train=2 --set data.n_val=1 --set data.n_test=1 "
                  "--set data.horizon=30 --checkpoint " + ckpt) == 0);
  const std::string text = slurp(fs::path(run_dir) / "equations.txt");
  const auto names = amore::default_var_names(2);
  const std::string expect =
      amore::render_equations(model.library(), truth, 0.05, names);
  CHECK(text == expect);
}

TEST_CASE("missing inputs produce usage errors with nonzero exit") {
  CHECK(run_cli("train --system mass_spring") != 0);           // no seed
  CHECK(run_cli("segment --system mass_spring --seed 1") != 0);  // no checkpoint
  CHECK(run_cli("report --run-dir /nonexistent_dir_xyz") != 0);
  CHECK(run_cli("generate --system bogus --seed 1") != 0);
}

TEST_CASE("AMORE_OUT_DIR reroutes outputs") {
  TempDir tmp("amore_cli_envdir");
  setenv("AMORE_OUT_DIR", tmp.path.c_str(), 1);
  const int rc = run_cli(
      "generate --system mass_spring --seed 2 --out sub "
      "--set data.n_train=2 --set data.n_val=1 --set data.n_test=1 --set data.horizon=20");
  unsetenv("AMORE_OUT_DIR");
  REQUIRE(rc == 0);
  CHECK(fs::exists(tmp.path / "sub" / "run.json"));
  CHECK(fs::exists(tmp.path / "sub" / "dataset" / "manifest.json"));
}
