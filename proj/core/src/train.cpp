#include "amore/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "amore/errors.hpp"
#include "amore/metrics.hpp"
#include "amore/rng.hpp"

namespace amore {

double segmentation_accuracy(const AmoreModel& model, const std::vector<sim::Trajectory>& split,
                             int true_mode_count) {
  std::vector<int> pred, truth;
  for (const auto& traj : split) {
    for (int n = 0; n < traj.objects; ++n) {
      const auto summary = model.forward_backward(traj, n);
      pred.insert(pred.end(), summary.decoded_modes.begin(), summary.decoded_modes.end());
      for (int t = 0; t < traj.steps; ++t) truth.push_back(traj.mode(t, n));
    }
  }
  const auto score =
      metrics::hungarian_accuracy_f1(pred, truth, model.num_modes(), true_mode_count);
  return score.accuracy;
}

TrainResult train(AmoreModel& model, const sim::Dataset& data, const TrainSchedule& schedule) {
  if (data.train.empty()) throw std::invalid_argument("train: empty training split");

  TrainSchedule sched = schedule;
  sched.lr.total_steps = sched.steps;

  ad::Adam opt(model.params(), sched.adam);
  opt.set_lr_scale("coeffs", sched.coeff_lr_scale);
  opt.set_lr_scale("init_mean", sched.coeff_lr_scale);
  opt.set_lr_scale("emission_log_std", sched.sigma_lr_scale);
  opt.set_lr_scale("init_log_std", sched.sigma_lr_scale);

  Rng shuffle_rng = Rng(sched.seed).split(0xba7c4);

  const int n_train = static_cast<int>(data.train.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  int cursor = n_train;  // triggers a shuffle on first use

  TrainResult result;
  std::vector<double> snapshot(model.params().values().begin(), model.params().values().end());
  std::vector<const sim::Trajectory*> batch;

  const int B = std::min(sched.batch_size, n_train);
  for (int step = 0; step < sched.steps; ++step) {
    batch.clear();
    for (int i = 0; i < B; ++i) {
      if (cursor >= n_train) {
        for (int j = n_train - 1; j > 0; --j)
          std::swap(order[j], order[shuffle_rng.uniform_int(0, j)]);
        cursor = 0;
      }
      batch.push_back(&data.train[order[cursor++]]);
    }

    model.params().zero_grad();
    double loss = 0.0;
    try {
      loss = loss_and_grad(model, batch, sched.threads);
    } catch (const TrainingDiverged&) {
      std::copy(snapshot.begin(), snapshot.end(), model.params().values().begin());
      result.diverged = true;
      result.diverged_step = step;
      break;
    }
    if (!std::isfinite(loss)) {
      std::copy(snapshot.begin(), snapshot.end(), model.params().values().begin());
      result.diverged = true;
      result.diverged_step = step;
      break;
    }
    opt.step(sched.lr, step);

    if (step % sched.eval_interval == 0 || step + 1 == sched.steps) {
      double l1 = 0.0;
      for (double w : model.params().values_of("coeffs")) l1 += std::abs(w);
      double val_acc = 0.0;
      if (!data.val.empty())
        val_acc = segmentation_accuracy(model, data.val, data.spec.mode_count);
      result.log.push_back({step, loss - model.config().lambda_l1 * l1, l1, val_acc});
      result.final_val_accuracy = val_acc;
      snapshot.assign(model.params().values().begin(), model.params().values().end());
    }
  }
  return result;
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& rows) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f, "step,nll,l1,val_accuracy\n");
  for (const auto& r : rows)
    std::fprintf(f, "%d,%.17g,%.17g,%.17g\n", r.step, r.nll, r.l1, r.val_accuracy);
  std::fclose(f);
}

}  // namespace amore
