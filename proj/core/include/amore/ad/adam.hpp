#pragma once

#include <string>
#include <vector>

#include "amore/ad/param_store.hpp"

namespace amore::ad {

// Linear warmup followed by a cosine envelope scaled by a per-1000-step
// multiplicative decay factor.
struct LrSchedule {
  double base = 2e-4;
  double warmup_init = 5e-5;
  int warmup_steps = 2000;
  int total_steps = 20000;
  double decay_rate = 0.99;  // applied as decay_rate^(step/1000) after warmup

  double lr_at(int step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;  // decoupled
  double clip_norm = 10.0;     // global gradient-norm clip; <=0 disables
};

// Adam with decoupled weight decay, global-norm clipping and optional
// per-parameter-group learning-rate scales (by registered array name).
class Adam {
 public:
  Adam(ParamStore& store, AdamConfig cfg = {});

  // Multiplies the scheduled learning rate for one named array.
  void set_lr_scale(const std::string& param_name, double scale);

  // Applies one update using the store's current gradient buffer.
  // Returns the pre-clip global gradient norm.
  double step(const LrSchedule& schedule, int step_index);

 private:
  ParamStore& store_;
  AdamConfig cfg_;
  std::vector<double> m_, v_, lr_scale_;
  long t_ = 0;
};

}  // namespace amore::ad
