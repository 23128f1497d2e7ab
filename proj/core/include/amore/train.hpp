#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amore/ad/adam.hpp"
#include "amore/model.hpp"
#include "amore/sim/dataset.hpp"

namespace amore {

struct TrainSchedule {
  int steps = 20000;
  int batch_size = 40;
  ad::LrSchedule lr;          // total_steps is synced to `steps` by train()
  ad::AdamConfig adam;
  double coeff_lr_scale = 100.0;  // basis coefficients and initial means
  double sigma_lr_scale = 10.0;   // emission and initial log-stds
  int eval_interval = 250;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 -> hardware concurrency
};

struct TrainLogRow {
  int step = 0;
  double nll = 0.0;
  double l1 = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  bool diverged = false;
  long diverged_step = -1;
  double final_val_accuracy = 0.0;
};

// Minimizes mean per-step NLL + L1 over the train split. Logs NLL, coefficient
// L1 norm and validation segmentation accuracy every eval_interval steps.
// On divergence the parameters are restored to the last evaluated snapshot
// and the result is flagged. Deterministic given the schedule seed.
TrainResult train(AmoreModel& model, const sim::Dataset& data, const TrainSchedule& schedule);

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& rows);

// Hungarian-matched frame accuracy of the decoded modes over a split.
double segmentation_accuracy(const AmoreModel& model, const std::vector<sim::Trajectory>& split,
                             int true_mode_count);

}  // namespace amore
