#include "amore/ad/adam.hpp"

#include <cmath>

namespace amore::ad {

double LrSchedule::lr_at(int step) const {
  if (step < warmup_steps) {
    const double f = static_cast<double>(step + 1) / warmup_steps;
    return warmup_init + (base - warmup_init) * f;
  }
  const int span = total_steps > warmup_steps ? total_steps - warmup_steps : 1;
  const double p = std::min(1.0, static_cast<double>(step - warmup_steps) / span);
  const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * p));
  const double decay = std::pow(decay_rate, static_cast<double>(step - warmup_steps) / 1000.0);
  return base * cosine * decay;
}

Adam::Adam(ParamStore& store, AdamConfig cfg) : store_(store), cfg_(cfg) {
  m_.assign(store.size(), 0.0);
  v_.assign(store.size(), 0.0);
  lr_scale_.assign(store.size(), 1.0);
}

void Adam::set_lr_scale(const std::string& param_name, double scale) {
  const auto& e = store_.entry(param_name);
  for (int i = 0; i < e.size; ++i) lr_scale_[e.offset + i] = scale;
}

double Adam::step(const LrSchedule& schedule, int step_index) {
  auto g = store_.grads();
  auto x = store_.values();
  const int n = store_.size();

  double norm2 = 0.0;
  for (int i = 0; i < n; ++i) norm2 += g[i] * g[i];
  const double norm = std::sqrt(norm2);
  double scale = 1.0;
  if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;

  ++t_;
  const double lr = schedule.lr_at(step_index);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (int i = 0; i < n; ++i) {
    const double gi = g[i] * scale;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * gi;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * gi * gi;
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    const double lri = lr * lr_scale_[i];
    x[i] -= lri * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * x[i]);
  }
  return norm;
}

}  // namespace amore::ad
