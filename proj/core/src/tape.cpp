#include "amore/ad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "amore/rng.hpp"

namespace amore::ad {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

void Tape::clear() {
  op_.clear();
  val_.clear();
  adj_.clear();
  auxd_.clear();
  abeg_.clear();
  args_.clear();
  xbeg_.clear();
  xdata_.clear();
  if (store_) {
    param_cache_.assign(store_->size(), -1);
  }
}

Var Tape::push0(Op op, double value, double aux) {
  const std::int32_t id = static_cast<std::int32_t>(op_.size());
  op_.push_back(op);
  val_.push_back(value);
  auxd_.push_back(aux);
  abeg_.push_back(static_cast<std::int32_t>(args_.size()));
  xbeg_.push_back(static_cast<std::int32_t>(xdata_.size()));
  return {id};
}

Var Tape::push1(Op op, Var a, double value, double aux) {
  Var v = push0(op, value, aux);
  args_.push_back(a.id);
  return v;
}

Var Tape::push2(Op op, Var a, Var b, double value) {
  Var v = push0(op, value);
  args_.push_back(a.id);
  args_.push_back(b.id);
  return v;
}

Var Tape::pushn(Op op, std::span<const Var> xs, double value) {
  Var v = push0(op, value);
  for (Var x : xs) args_.push_back(x.id);
  return v;
}

Var Tape::constant(double v) { return push0(Op::Const, v); }

Var Tape::param(int slot) {
  if (param_cache_.empty() && store_) param_cache_.assign(store_->size(), -1);
  if (param_cache_[slot] >= 0) return {param_cache_[slot]};
  Var v = push0(Op::Param, store_->values()[slot], static_cast<double>(slot));
  param_cache_[slot] = v.id;
  return v;
}

Var Tape::param(const std::string& name, int index_within) {
  return param(store_->offset(name) + index_within);
}

Var Tape::add(Var a, Var b) { return push2(Op::Add, a, b, val_[a.id] + val_[b.id]); }

Var Tape::add3(Var a, Var b, Var c) {
  Var v = push0(Op::Add3, val_[a.id] + val_[b.id] + val_[c.id]);
  args_.push_back(a.id);
  args_.push_back(b.id);
  args_.push_back(c.id);
  return v;
}

Var Tape::sub(Var a, Var b) { return push2(Op::Sub, a, b, val_[a.id] - val_[b.id]); }
Var Tape::mul(Var a, Var b) { return push2(Op::Mul, a, b, val_[a.id] * val_[b.id]); }
Var Tape::neg(Var a) { return push1(Op::Neg, a, -val_[a.id]); }
Var Tape::add_const(Var a, double c) { return push1(Op::AddC, a, val_[a.id] + c, c); }
Var Tape::mul_const(Var a, double c) { return push1(Op::MulC, a, val_[a.id] * c, c); }
Var Tape::tanh(Var a) { return push1(Op::Tanh, a, std::tanh(val_[a.id])); }
Var Tape::exp(Var a) { return push1(Op::Exp, a, std::exp(val_[a.id])); }
Var Tape::log(Var a) { return push1(Op::Log, a, std::log(val_[a.id])); }
Var Tape::sin(Var a) { return push1(Op::Sin, a, std::sin(val_[a.id])); }
Var Tape::cos(Var a) { return push1(Op::Cos, a, std::cos(val_[a.id])); }

Var Tape::dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += val_[a[i].id] * val_[b[i].id];
  Var v = push0(Op::Dot, s);
  for (std::size_t i = 0; i < a.size(); ++i) {
    args_.push_back(a[i].id);
    args_.push_back(b[i].id);
  }
  return v;
}

Var Tape::lincomb(double bias, std::span<const double> coeffs, std::span<const Var> xs) {
  if (coeffs.size() != xs.size()) throw std::invalid_argument("lincomb: size mismatch");
  double s = bias;
  for (std::size_t i = 0; i < xs.size(); ++i) s += coeffs[i] * val_[xs[i].id];
  Var v = push0(Op::Lincomb, s, bias);
  for (Var x : xs) args_.push_back(x.id);
  xdata_.insert(xdata_.end(), coeffs.begin(), coeffs.end());
  return v;
}

Var Tape::logsumexp(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("logsumexp: empty input");
  double mx = val_[xs[0].id];
  for (Var x : xs) mx = std::max(mx, val_[x.id]);
  double s = 0.0;
  for (Var x : xs) s += std::exp(val_[x.id] - mx);
  return pushn(Op::Lse, xs, mx + std::log(s));
}

Var Tape::gaussian_logpdf(std::span<const double> x, std::span<const Var> mean,
                          std::span<const Var> std_) {
  const std::size_t m = x.size();
  if (mean.size() != m || std_.size() != m)
    throw std::invalid_argument("gaussian_logpdf: size mismatch");
  double ll = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double sd = val_[std_[i].id];
    if (!(sd > 0.0)) throw std::invalid_argument("gaussian_logpdf: std must be positive");
    const double z = (x[i] - val_[mean[i].id]) / sd;
    ll += -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
  }
  Var v = push0(Op::GaussLp, ll);
  for (std::size_t i = 0; i < m; ++i) {
    args_.push_back(mean[i].id);
    args_.push_back(std_[i].id);
  }
  xdata_.insert(xdata_.end(), x.begin(), x.end());
  return v;
}

Var Tape::abs_sum(std::span<const Var> xs) {
  double s = 0.0;
  for (Var x : xs) s += std::abs(val_[x.id]);
  return pushn(Op::AbsSum, xs, s);
}

void Tape::backward(Var root) { backward(root, store_->grads()); }

void Tape::backward(Var root, std::span<double> grad_sink) {
  adj_.assign(op_.size(), 0.0);
  adj_[root.id] = 1.0;
  for (std::int32_t i = root.id; i >= 0; --i) {
    const double a = adj_[i];
    if (a == 0.0) continue;
    const std::int32_t* args = args_.data() + abeg_[i];
    switch (op_[i]) {
      case Op::Const:
        break;
      case Op::Param:
        grad_sink[static_cast<int>(auxd_[i])] += a;
        break;
      case Op::Add:
        adj_[args[0]] += a;
        adj_[args[1]] += a;
        break;
      case Op::Add3:
        adj_[args[0]] += a;
        adj_[args[1]] += a;
        adj_[args[2]] += a;
        break;
      case Op::Sub:
        adj_[args[0]] += a;
        adj_[args[1]] -= a;
        break;
      case Op::Mul:
        adj_[args[0]] += a * val_[args[1]];
        adj_[args[1]] += a * val_[args[0]];
        break;
      case Op::Neg:
        adj_[args[0]] -= a;
        break;
      case Op::AddC:
        adj_[args[0]] += a;
        break;
      case Op::MulC:
        adj_[args[0]] += a * auxd_[i];
        break;
      case Op::Tanh: {
        const double y = val_[i];
        adj_[args[0]] += a * (1.0 - y * y);
        break;
      }
      case Op::Exp:
        adj_[args[0]] += a * val_[i];
        break;
      case Op::Log:
        adj_[args[0]] += a / val_[args[0]];
        break;
      case Op::Sin:
        adj_[args[0]] += a * std::cos(val_[args[0]]);
        break;
      case Op::Cos:
        adj_[args[0]] -= a * std::sin(val_[args[0]]);
        break;
      case Op::Dot: {
        const std::int32_t end =
            (i + 1 < static_cast<std::int32_t>(abeg_.size())) ? abeg_[i + 1]
                                                              : static_cast<std::int32_t>(args_.size());
        for (std::int32_t p = abeg_[i]; p < end; p += 2) {
          const std::int32_t ai = args_[p];
          const std::int32_t bi = args_[p + 1];
          adj_[ai] += a * val_[bi];
          adj_[bi] += a * val_[ai];
        }
        break;
      }
      case Op::Lincomb: {
        const std::int32_t end =
            (i + 1 < static_cast<std::int32_t>(abeg_.size())) ? abeg_[i + 1]
                                                              : static_cast<std::int32_t>(args_.size());
        const double* coeffs = xdata_.data() + xbeg_[i];
        for (std::int32_t p = abeg_[i]; p < end; ++p) {
          adj_[args_[p]] += a * coeffs[p - abeg_[i]];
        }
        break;
      }
      case Op::Lse: {
        const std::int32_t end =
            (i + 1 < static_cast<std::int32_t>(abeg_.size())) ? abeg_[i + 1]
                                                              : static_cast<std::int32_t>(args_.size());
        const double out = val_[i];
        for (std::int32_t p = abeg_[i]; p < end; ++p) {
          adj_[args_[p]] += a * std::exp(val_[args_[p]] - out);
        }
        break;
      }
      case Op::GaussLp: {
        const std::int32_t end =
            (i + 1 < static_cast<std::int32_t>(abeg_.size())) ? abeg_[i + 1]
                                                              : static_cast<std::int32_t>(args_.size());
        const double* xs = xdata_.data() + xbeg_[i];
        int m = 0;
        for (std::int32_t p = abeg_[i]; p < end; p += 2, ++m) {
          const std::int32_t mi = args_[p];
          const std::int32_t si = args_[p + 1];
          const double sd = val_[si];
          const double diff = xs[m] - val_[mi];
          adj_[mi] += a * diff / (sd * sd);
          adj_[si] += a * (-1.0 / sd + diff * diff / (sd * sd * sd));
        }
        break;
      }
      case Op::AbsSum: {
        const std::int32_t end =
            (i + 1 < static_cast<std::int32_t>(abeg_.size())) ? abeg_[i + 1]
                                                              : static_cast<std::int32_t>(args_.size());
        for (std::int32_t p = abeg_[i]; p < end; ++p) {
          const double x = val_[args_[p]];
          if (x > 0.0) adj_[args_[p]] += a;
          else if (x < 0.0) adj_[args_[p]] -= a;
        }
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// plain-double utilities

double logsumexp(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("logsumexp: empty input");
  double mx = xs[0];
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;  // all -inf (or a +inf/nan dominating)
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

void tempered_softmax(std::span<const double> logits, double tau, std::span<double> out) {
  if (!(tau > 0.0)) throw std::invalid_argument("tempered_softmax: tau must be positive");
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - mx) / tau);
    s += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= s;
}

std::vector<double> tempered_softmax(std::span<const double> logits, double tau) {
  std::vector<double> out(logits.size());
  tempered_softmax(logits, tau, out);
  return out;
}

double gaussian_logpdf(std::span<const double> x, std::span<const double> mean,
                       std::span<const double> diag_std) {
  if (x.size() != mean.size() || x.size() != diag_std.size())
    throw std::invalid_argument("gaussian_logpdf: size mismatch");
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(diag_std[i] > 0.0))
      throw std::invalid_argument("gaussian_logpdf: std must be positive");
    const double z = (x[i] - mean[i]) / diag_std[i];
    ll += -0.5 * kLog2Pi - std::log(diag_std[i]) - 0.5 * z * z;
  }
  return ll;
}

// ---------------------------------------------------------------------------
// MLP helpers

Mlp make_mlp(ParamStore& store, const std::string& name, int in, int hidden, int out,
             double scale, Rng& rng) {
  Mlp m;
  m.in = in;
  m.hidden = hidden;
  m.out = out;
  std::vector<double> w1(static_cast<std::size_t>(hidden) * in);
  for (auto& v : w1) v = rng.uniform(-scale, scale);
  std::vector<double> w2(static_cast<std::size_t>(out) * hidden);
  for (auto& v : w2) v = rng.uniform(-scale, scale);
  m.w1 = store.add(name + ".W1", {hidden, in}, w1);
  m.b1 = store.add(name + ".b1", {hidden}, 0.0);
  m.w2 = store.add(name + ".W2", {out, hidden}, w2);
  m.b2 = store.add(name + ".b2", {out}, 0.0);
  return m;
}

Mlp bind_mlp(const ParamStore& store, const std::string& name, int in, int hidden, int out) {
  Mlp m;
  m.in = in;
  m.hidden = hidden;
  m.out = out;
  m.w1 = store.offset(name + ".W1");
  m.b1 = store.offset(name + ".b1");
  m.w2 = store.offset(name + ".W2");
  m.b2 = store.offset(name + ".b2");
  return m;
}

void mlp_forward(const ParamStore& store, const Mlp& mlp, std::span<const double> x,
                 std::span<double> out) {
  if (static_cast<int>(x.size()) != mlp.in || static_cast<int>(out.size()) != mlp.out)
    throw std::invalid_argument("mlp_forward: shape mismatch");
  const auto v = store.values();
  std::vector<double> h(mlp.hidden);
  for (int j = 0; j < mlp.hidden; ++j) {
    double s = v[mlp.b1 + j];
    for (int i = 0; i < mlp.in; ++i) s += v[mlp.w1 + j * mlp.in + i] * x[i];
    h[j] = mlp.linear ? s : std::tanh(s);
  }
  for (int o = 0; o < mlp.out; ++o) {
    double s = v[mlp.b2 + o];
    for (int j = 0; j < mlp.hidden; ++j) s += v[mlp.w2 + o * mlp.hidden + j] * h[j];
    out[o] = s;
  }
}

std::vector<Var> mlp_forward(Tape& tape, const Mlp& mlp, std::span<const double> x) {
  if (static_cast<int>(x.size()) != mlp.in)
    throw std::invalid_argument("mlp_forward: shape mismatch");
  std::vector<Var> row(mlp.in + 1);
  std::vector<double> coeffs(mlp.in + 1);
  std::vector<Var> h(mlp.hidden);
  for (int j = 0; j < mlp.hidden; ++j) {
    for (int i = 0; i < mlp.in; ++i) {
      row[i] = tape.param(mlp.w1 + j * mlp.in + i);
      coeffs[i] = x[i];
    }
    row[mlp.in] = tape.param(mlp.b1 + j);
    coeffs[mlp.in] = 1.0;
    Var pre = tape.lincomb(0.0, coeffs, row);
    h[j] = mlp.linear ? pre : tape.tanh(pre);
  }
  std::vector<Var> out(mlp.out);
  std::vector<Var> wrow(mlp.hidden);
  for (int o = 0; o < mlp.out; ++o) {
    for (int j = 0; j < mlp.hidden; ++j) wrow[j] = tape.param(mlp.w2 + o * mlp.hidden + j);
    out[o] = tape.add(tape.dot(wrow, h), tape.param(mlp.b2 + o));
  }
  return out;
}

std::vector<Var> mlp_forward(Tape& tape, const Mlp& mlp, std::span<const Var> x) {
  if (static_cast<int>(x.size()) != mlp.in)
    throw std::invalid_argument("mlp_forward: shape mismatch");
  std::vector<Var> h(mlp.hidden);
  std::vector<Var> wrow(mlp.in);
  for (int j = 0; j < mlp.hidden; ++j) {
    for (int i = 0; i < mlp.in; ++i) wrow[i] = tape.param(mlp.w1 + j * mlp.in + i);
    Var pre = tape.add(tape.dot(wrow, x), tape.param(mlp.b1 + j));
    h[j] = mlp.linear ? pre : tape.tanh(pre);
  }
  std::vector<Var> out(mlp.out);
  std::vector<Var> w2row(mlp.hidden);
  for (int o = 0; o < mlp.out; ++o) {
    for (int j = 0; j < mlp.hidden; ++j) w2row[j] = tape.param(mlp.w2 + o * mlp.hidden + j);
    out[o] = tape.add(tape.dot(w2row, h), tape.param(mlp.b2 + o));
  }
  return out;
}

}  // namespace amore::ad
