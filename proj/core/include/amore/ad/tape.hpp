#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amore/ad/param_store.hpp"

namespace amore {
class Rng;
}

namespace amore::ad {

// Handle to a scalar node on a Tape.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode automatic differentiation over scalar nodes with fused
// wide-arity primitives (dot products, linear combinations, log-sum-exp,
// diagonal Gaussian log-density). The graph is built define-by-run: node
// creation evaluates the forward value immediately. backward() replays the
// records once, in reverse creation order, and accumulates parameter
// adjoints into a gradient sink.
//
// Structural zeros are never materialized: callers only create nodes for
// reachable states, so no -inf sentinel flows through the tape.
class Tape {
 public:
  explicit Tape(ParamStore* store) : store_(store) {}

  // Drops all nodes but keeps allocated capacity.
  void clear();
  std::size_t node_count() const { return op_.size(); }

  Var constant(double v);
  // Leaf bound to a flat parameter slot; one node per slot per tape.
  Var param(int slot);
  Var param(const std::string& name, int index_within);

  Var add(Var a, Var b);
  Var add3(Var a, Var b, Var c);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var neg(Var a);
  Var add_const(Var a, double c);
  Var mul_const(Var a, double c);
  Var tanh(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sin(Var a);
  Var cos(Var a);

  // sum_i a[i] * b[i]
  Var dot(std::span<const Var> a, std::span<const Var> b);
  // bias + sum_i coeff[i] * x[i]
  Var lincomb(double bias, std::span<const double> coeffs, std::span<const Var> xs);
  // log sum_i exp(x[i]); stable under max subtraction; input must be nonempty
  Var logsumexp(std::span<const Var> xs);
  // sum_m [ -0.5 log(2 pi) - log std[m] - 0.5 ((x[m]-mean[m])/std[m])^2 ]
  // x is observed (constant); mean and std are nodes; std must be positive.
  Var gaussian_logpdf(std::span<const double> x, std::span<const Var> mean,
                      std::span<const Var> std);
  // sum_i |x[i]| with subgradient 0 at exactly 0
  Var abs_sum(std::span<const Var> xs);

  double value(Var v) const { return val_[v.id]; }

  // Seeds d(root)=1, sweeps the tape in reverse and adds parameter adjoints
  // into `grad_sink` (defaults to the store's own gradient buffer). The sink
  // must be sized like the store's flat value buffer.
  void backward(Var root);
  void backward(Var root, std::span<double> grad_sink);

 private:
  enum class Op : std::uint8_t {
    Const, Param, Add, Add3, Sub, Mul, Neg, AddC, MulC,
    Tanh, Exp, Log, Sin, Cos, Dot, Lincomb, Lse, GaussLp, AbsSum
  };

  Var push0(Op op, double value, double aux = 0.0);
  Var push1(Op op, Var a, double value, double aux = 0.0);
  Var push2(Op op, Var a, Var b, double value);
  Var pushn(Op op, std::span<const Var> xs, double value);

  ParamStore* store_;
  std::vector<Op> op_;
  std::vector<double> val_;
  std::vector<double> adj_;
  std::vector<double> auxd_;           // per-node scalar payload (constants, slots)
  std::vector<std::int32_t> abeg_;     // per-node start into args_ (abeg_[i+1] is end)
  std::vector<std::int32_t> args_;
  std::vector<std::int32_t> xbeg_;     // per-node start into xdata_ (coeffs, observations)
  std::vector<double> xdata_;
  std::vector<std::int32_t> param_cache_;
};

// Plain-double utilities mirroring the tape primitives.
double logsumexp(std::span<const double> xs);
void tempered_softmax(std::span<const double> logits, double tau, std::span<double> out);
std::vector<double> tempered_softmax(std::span<const double> logits, double tau);
double gaussian_logpdf(std::span<const double> x, std::span<const double> mean,
                       std::span<const double> diag_std);

// Single-hidden-layer perceptron: affine -> tanh -> affine. Weights live in a
// ParamStore under <name>.W1 [hidden x in], <name>.b1, <name>.W2 [out x hidden],
// <name>.b2. `linear` drops the activation (test configs only).
struct Mlp {
  int in = 0, hidden = 0, out = 0;
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;  // slot offsets
  bool linear = false;
};

// Registers MLP parameters with uniform(-scale, scale) weights, zero biases.
Mlp make_mlp(ParamStore& store, const std::string& name, int in, int hidden, int out,
             double scale, Rng& rng);
// Binds to already-registered parameters.
Mlp bind_mlp(const ParamStore& store, const std::string& name, int in, int hidden, int out);

void mlp_forward(const ParamStore& store, const Mlp& mlp, std::span<const double> x,
                 std::span<double> out);
// Input observed (constants).
std::vector<Var> mlp_forward(Tape& tape, const Mlp& mlp, std::span<const double> x);
// Input is itself differentiable.
std::vector<Var> mlp_forward(Tape& tape, const Mlp& mlp, std::span<const Var> x);

}  // namespace amore::ad
