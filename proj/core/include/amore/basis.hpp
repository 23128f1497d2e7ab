#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace amore {

enum class Elementary : std::uint8_t { None, Cos, Sin, Exp };

struct ElementarySpec {
  Elementary kind = Elementary::None;
  int dim = 0;  // coordinate the function is applied to
};

// One candidate term: either a monomial (product of per-dimension powers) or a
// single-coordinate elementary function. Elementary terms carry all-zero
// exponents.
struct TermDescriptor {
  std::vector<int> exponents;
  Elementary elementary = Elementary::None;
  int elementary_dim = -1;

  int total_degree() const;
  bool operator==(const TermDescriptor&) const = default;
};

// Ordered candidate-function dictionary over an M-dimensional state.
// Term order is canonical: constant first, then graded by total degree with
// higher powers of earlier coordinates first within a degree (so M=2, D=2
// reads 1, a, b, a^2, ab, b^2), then elementary extras in the order requested.
class BasisLibrary {
 public:
  BasisLibrary() = default;
  static BasisLibrary build(int state_dim, int degree,
                            std::span<const ElementarySpec> extras = {});

  int size() const { return static_cast<int>(terms_.size()); }
  int state_dim() const { return state_dim_; }
  int degree() const { return degree_; }
  const TermDescriptor& term(int c) const { return terms_[c]; }
  const std::vector<TermDescriptor>& terms() const { return terms_; }
  int find(const TermDescriptor& t) const;  // -1 when absent

  void evaluate(std::span<const double> y, std::span<double> out) const;
  std::vector<double> evaluate(std::span<const double> y) const;

  std::string term_name(int c, std::span<const std::string> var_names) const;

 private:
  int state_dim_ = 0;
  int degree_ = 0;
  std::vector<TermDescriptor> terms_;
};

// Per-mode coefficients w[k][c][m]: weight of term c on output dimension m
// under mode k. Stored flat, mode-major.
struct CoefficientTensor {
  int modes = 0;
  int terms = 0;
  int dims = 0;
  std::vector<double> w;

  CoefficientTensor() = default;
  CoefficientTensor(int k, int c, int m)
      : modes(k), terms(c), dims(m), w(static_cast<std::size_t>(k) * c * m, 0.0) {}

  double& at(int k, int c, int m) {
    return w[(static_cast<std::size_t>(k) * terms + c) * dims + m];
  }
  double at(int k, int c, int m) const {
    return w[(static_cast<std::size_t>(k) * terms + c) * dims + m];
  }
};

// out = Theta(y)^T w[k], length M.
void predict_derivative(const BasisLibrary& lib, const CoefficientTensor& w, int mode,
                        std::span<const double> y, std::span<double> out);
std::vector<double> predict_derivative(const BasisLibrary& lib, const CoefficientTensor& w,
                                       int mode, std::span<const double> y);

struct EquationTerm {
  std::string term;
  double coefficient = 0.0;
};

// retained[mode][dim] -> terms with |coefficient| >= threshold, in library order.
using EquationReport = std::vector<std::vector<std::vector<EquationTerm>>>;

EquationReport prune_equations(const BasisLibrary& lib, const CoefficientTensor& w,
                               double prune_threshold,
                               std::span<const std::string> var_names);

// Human-readable rendering, one line per (mode, dimension); coefficients to 4
// significant digits, unit coefficients on non-constant terms omitted.
std::string render_equations(const BasisLibrary& lib, const CoefficientTensor& w,
                             double prune_threshold,
                             std::span<const std::string> var_names);

// JSON form of the pruned report: mode -> dimension -> [{term, coefficient}].
std::string equations_to_json(const EquationReport& report,
                              std::span<const std::string> var_names);

std::vector<std::string> default_var_names(int state_dim);

}  // namespace amore

namespace amore::ad {
class Tape;
struct Var;
}

namespace amore {
// Basis evaluation on autodiff nodes (used when the predictive mean composes
// the candidate field at states that depend on the coefficients).
std::vector<ad::Var> evaluate_on_tape(const BasisLibrary& lib, ad::Tape& tape,
                                      std::span<const ad::Var> y);
}  // namespace amore
