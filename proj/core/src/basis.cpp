#include "amore/basis.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

#include "amore/ad/tape.hpp"

namespace amore {

int TermDescriptor::total_degree() const {
  int d = 0;
  for (int e : exponents) d += e;
  return d;
}

namespace {

void enumerate_monomials(int dims, int degree, int dim, std::vector<int>& expo,
                         std::vector<TermDescriptor>& out) {
  if (dim == dims - 1) {
    expo[dim] = degree;
    out.push_back({expo, Elementary::None, -1});
    expo[dim] = 0;
    return;
  }
  for (int e = degree; e >= 0; --e) {
    expo[dim] = e;
    enumerate_monomials(dims, degree - e, dim + 1, expo, out);
  }
  expo[dim] = 0;
}

}  // namespace

BasisLibrary BasisLibrary::build(int state_dim, int degree,
                                 std::span<const ElementarySpec> extras) {
  if (state_dim < 1) throw std::invalid_argument("basis: state_dim must be >= 1");
  if (degree < 0) throw std::invalid_argument("basis: degree must be >= 0");
  BasisLibrary lib;
  lib.state_dim_ = state_dim;
  lib.degree_ = degree;
  std::vector<int> expo(state_dim, 0);
  for (int d = 0; d <= degree; ++d) {
    enumerate_monomials(state_dim, d, 0, expo, lib.terms_);
  }
  for (const auto& ex : extras) {
    if (ex.kind == Elementary::None) continue;
    if (ex.dim < 0 || ex.dim >= state_dim)
      throw std::invalid_argument("basis: elementary dim out of range");
    TermDescriptor t;
    t.exponents.assign(state_dim, 0);
    t.elementary = ex.kind;
    t.elementary_dim = ex.dim;
    for (const auto& existing : lib.terms_)
      if (existing == t) throw std::invalid_argument("basis: duplicate elementary term");
    lib.terms_.push_back(std::move(t));
  }
  return lib;
}

int BasisLibrary::find(const TermDescriptor& t) const {
  for (int c = 0; c < size(); ++c)
    if (terms_[c] == t) return c;
  return -1;
}

void BasisLibrary::evaluate(std::span<const double> y, std::span<double> out) const {
  for (int c = 0; c < size(); ++c) {
    const TermDescriptor& t = terms_[c];
    double v = 1.0;
    switch (t.elementary) {
      case Elementary::None:
        for (int d = 0; d < state_dim_; ++d)
          for (int e = 0; e < t.exponents[d]; ++e) v *= y[d];
        break;
      case Elementary::Cos: v = std::cos(y[t.elementary_dim]); break;
      case Elementary::Sin: v = std::sin(y[t.elementary_dim]); break;
      case Elementary::Exp: v = std::exp(y[t.elementary_dim]); break;
    }
    out[c] = v;
  }
}

std::vector<double> BasisLibrary::evaluate(std::span<const double> y) const {
  std::vector<double> out(size());
  evaluate(y, out);
  return out;
}

std::string BasisLibrary::term_name(int c, std::span<const std::string> var_names) const {
  const TermDescriptor& t = terms_[c];
  switch (t.elementary) {
    case Elementary::Cos: return "cos(" + var_names[t.elementary_dim] + ")";
    case Elementary::Sin: return "sin(" + var_names[t.elementary_dim] + ")";
    case Elementary::Exp: return "exp(" + var_names[t.elementary_dim] + ")";
    case Elementary::None: break;
  }
  if (t.total_degree() == 0) return "1";
  std::string name;
  for (int d = 0; d < state_dim_; ++d) {
    if (t.exponents[d] == 0) continue;
    if (!name.empty()) name += " ";
    name += var_names[d];
    if (t.exponents[d] > 1) name += "^" + std::to_string(t.exponents[d]);
  }
  return name;
}

void predict_derivative(const BasisLibrary& lib, const CoefficientTensor& w, int mode,
                        std::span<const double> y, std::span<double> out) {
  if (mode < 0 || mode >= w.modes) throw std::invalid_argument("predict_derivative: mode out of range");
  const int C = lib.size(), M = lib.state_dim();
  std::vector<double> theta(C);
  lib.evaluate(y, theta);
  for (int m = 0; m < M; ++m) {
    double s = 0.0;
    for (int c = 0; c < C; ++c) s += theta[c] * w.at(mode, c, m);
    out[m] = s;
  }
}

std::vector<double> predict_derivative(const BasisLibrary& lib, const CoefficientTensor& w,
                                       int mode, std::span<const double> y) {
  std::vector<double> out(lib.state_dim());
  predict_derivative(lib, w, mode, y, out);
  return out;
}

namespace {

std::string format_coeff(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

EquationReport prune_equations(const BasisLibrary& lib, const CoefficientTensor& w,
                               double prune_threshold,
                               std::span<const std::string> var_names) {
  if (prune_threshold < 0) throw std::invalid_argument("prune threshold must be >= 0");
  EquationReport report(w.modes);
  for (int k = 0; k < w.modes; ++k) {
    report[k].resize(w.dims);
    for (int m = 0; m < w.dims; ++m) {
      for (int c = 0; c < lib.size(); ++c) {
        const double coeff = w.at(k, c, m);
        if (std::abs(coeff) >= prune_threshold) {
          report[k][m].push_back({lib.term_name(c, var_names), coeff});
        }
      }
    }
  }
  return report;
}

std::string render_equations(const BasisLibrary& lib, const CoefficientTensor& w,
                             double prune_threshold,
                             std::span<const std::string> var_names) {
  const EquationReport report = prune_equations(lib, w, prune_threshold, var_names);
  std::string out;
  for (int k = 0; k < w.modes; ++k) {
    out += "mode " + std::to_string(k) + ":\n";
    for (int m = 0; m < w.dims; ++m) {
      std::string rhs;
      for (const auto& term : report[k][m]) {
        const double mag = std::abs(term.coefficient);
        const bool neg = term.coefficient < 0;
        std::string piece;
        if (term.term == "1") {
          piece = format_coeff(mag);
        } else if (mag == 1.0) {
          piece = term.term;
        } else {
          piece = format_coeff(mag) + " " + term.term;
        }
        if (rhs.empty()) {
          rhs = (neg ? "-" : "") + piece;
        } else {
          rhs += (neg ? " - " : " + ") + piece;
        }
      }
      if (rhs.empty()) rhs = "0";
      out += "  d" + std::string(var_names[m]) + "/dt = " + rhs + "\n";
    }
  }
  return out;
}

std::string equations_to_json(const EquationReport& report,
                              std::span<const std::string> var_names) {
  nlohmann::json j;
  j["modes"] = nlohmann::json::array();
  for (std::size_t k = 0; k < report.size(); ++k) {
    nlohmann::json jm;
    jm["mode"] = k;
    jm["dimensions"] = nlohmann::json::array();
    for (std::size_t m = 0; m < report[k].size(); ++m) {
      nlohmann::json jd;
      jd["dimension"] = var_names[m];
      jd["terms"] = nlohmann::json::array();
      for (const auto& term : report[k][m]) {
        jd["terms"].push_back({{"term", term.term}, {"coefficient", term.coefficient}});
      }
      jm["dimensions"].push_back(std::move(jd));
    }
    j["modes"].push_back(std::move(jm));
  }
  return j.dump(2);
}

std::vector<ad::Var> evaluate_on_tape(const BasisLibrary& lib, ad::Tape& tape,
                                      std::span<const ad::Var> y) {
  const int M = lib.state_dim();
  // power memo per dimension: pw[d][e] = y_d^e for e >= 1
  std::vector<std::vector<ad::Var>> pw(M);
  auto power = [&](int d, int e) {
    auto& col = pw[d];
    if (col.empty()) col.push_back(y[d]);  // e = 1
    while (static_cast<int>(col.size()) < e) col.push_back(tape.mul(col.back(), y[d]));
    return col[e - 1];
  };
  std::vector<ad::Var> out(lib.size());
  for (int c = 0; c < lib.size(); ++c) {
    const TermDescriptor& t = lib.term(c);
    switch (t.elementary) {
      case Elementary::Cos: out[c] = tape.cos(y[t.elementary_dim]); continue;
      case Elementary::Sin: out[c] = tape.sin(y[t.elementary_dim]); continue;
      case Elementary::Exp: out[c] = tape.exp(y[t.elementary_dim]); continue;
      case Elementary::None: break;
    }
    ad::Var v;
    for (int d = 0; d < M; ++d) {
      if (t.exponents[d] == 0) continue;
      const ad::Var p = power(d, t.exponents[d]);
      v = v.valid() ? tape.mul(v, p) : p;
    }
    out[c] = v.valid() ? v : tape.constant(1.0);
  }
  return out;
}

std::vector<std::string> default_var_names(int state_dim) {
  static const char* names[] = {"x", "y", "z", "u", "v", "p", "q", "r"};
  std::vector<std::string> out;
  for (int d = 0; d < state_dim; ++d) {
    if (d < 8) out.emplace_back(names[d]);
    else out.push_back("x" + std::to_string(d));
  }
  return out;
}

}  // namespace amore
