#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "amore/basis.hpp"
#include "amore/rng.hpp"

using namespace amore;

namespace {
long binom(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}
}  // namespace

TEST_CASE("library layout for M=2 D=2 matches the canonical order") {
  const auto lib = BasisLibrary::build(2, 2);
  REQUIRE(lib.size() == 6);
  const auto vals = lib.evaluate(std::vector<double>{2.0, 3.0});
  // 1, a, b, a^2, ab, b^2
  CHECK(vals == std::vector<double>{1, 2, 3, 4, 6, 9});
  const std::vector<std::string> names = {"a", "b"};
  CHECK(lib.term_name(0, names) == "1");
  CHECK(lib.term_name(3, names) == "a^2");
  CHECK(lib.term_name(4, names) == "a b");
}

TEST_CASE("degree zero gives the lone constant") {
  const auto lib = BasisLibrary::build(1, 0);
  REQUIRE(lib.size() == 1);
  CHECK(lib.evaluate(std::vector<double>{5.0})[0] == 1.0);
}

TEST_CASE("elementary extras extend the library") {
  const ElementarySpec extras[] = {
      {Elementary::Cos, 0}, {Elementary::Sin, 0}, {Elementary::Exp, 0}};
  const auto lib = BasisLibrary::build(1, 3, extras);
  CHECK(lib.size() == 4 + 3);
  const auto vals = lib.evaluate(std::vector<double>{1.5});
  CHECK(vals[4] == doctest::Approx(std::cos(1.5)).epsilon(1e-14));
  CHECK(vals[5] == doctest::Approx(std::sin(1.5)).epsilon(1e-14));
  // independent series evaluation of e^1.5
  double series = 0.0, term = 1.0;
  for (int n = 1; n <= 30; ++n) {
    series += term;
    term *= 1.5 / n;
  }
  CHECK(std::abs(vals[6] - series) < 1e-12);
}

TEST_CASE("term count equals binom(M+D,D) plus extras for all small shapes") {
  for (int M = 1; M <= 4; ++M) {
    for (int D = 0; D <= 5; ++D) {
      const auto lib = BasisLibrary::build(M, D);
      CHECK(lib.size() == binom(M + D, D));
    }
  }
}

TEST_CASE("invalid arguments are rejected") {
  CHECK_THROWS_AS(BasisLibrary::build(2, -1), std::invalid_argument);
  CHECK_THROWS_AS(BasisLibrary::build(0, 2), std::invalid_argument);
}

TEST_CASE("constant survives at the origin") {
  const auto lib = BasisLibrary::build(2, 2);
  const auto vals = lib.evaluate(std::vector<double>{0.0, 0.0});
  CHECK(vals == std::vector<double>{1, 0, 0, 0, 0, 0});
}

TEST_CASE("monomial scaling law") {
  Rng rng(3);
  const auto lib = BasisLibrary::build(3, 3);
  std::vector<double> y(3), y2(3);
  for (int trial = 0; trial < 20; ++trial) {
    for (int m = 0; m < 3; ++m) {
      y[m] = rng.uniform(0.2, 1.5);
      y2[m] = 2.0 * y[m];
    }
    const auto a = lib.evaluate(y);
    const auto b = lib.evaluate(y2);
    for (int c = 0; c < lib.size(); ++c) {
      const double scale = std::pow(2.0, lib.term(c).total_degree());
      CHECK(b[c] == doctest::Approx(scale * a[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("predict_derivative is a dot product and linear in w") {
  Rng rng(11);
  const auto lib = BasisLibrary::build(2, 2);
  CoefficientTensor w1(2, lib.size(), 2), w2(2, lib.size(), 2), wsum(2, lib.size(), 2);
  for (std::size_t i = 0; i < w1.w.size(); ++i) {
    w1.w[i] = rng.uniform(-2, 2);
    w2.w[i] = rng.uniform(-2, 2);
    wsum.w[i] = w1.w[i] + w2.w[i];
  }
  const std::vector<double> y = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  const auto theta = lib.evaluate(y);
  const auto d1 = predict_derivative(lib, w1, 1, y);
  // hand-rolled dot product oracle
  for (int m = 0; m < 2; ++m) {
    double s = 0.0;
    for (int c = 0; c < lib.size(); ++c) s += theta[c] * w1.at(1, c, m);
    CHECK(std::abs(d1[m] - s) < 1e-12);
  }
  const auto d2 = predict_derivative(lib, w2, 1, y);
  const auto ds = predict_derivative(lib, wsum, 1, y);
  for (int m = 0; m < 2; ++m) CHECK(std::abs(ds[m] - d1[m] - d2[m]) < 1e-12);

  CoefficientTensor zero(2, lib.size(), 2);
  const auto dz = predict_derivative(lib, zero, 0, y);
  CHECK(dz == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(predict_derivative(lib, w1, 5, y), std::invalid_argument);
}

TEST_CASE("ground-truth spring coefficients evaluate the compression branch") {
  const auto lib = BasisLibrary::build(2, 2);
  CoefficientTensor w(2, lib.size(), 2);
  // dl/dt = v; dv/dt = 11 - 10 l
  w.at(0, 2, 0) = 1.0;
  w.at(0, 0, 1) = 11.0;
  w.at(0, 1, 1) = -10.0;
  const auto d = predict_derivative(lib, w, 0, std::vector<double>{1.0, 0.0});
  CHECK(d[0] == doctest::Approx(0.0));
  CHECK(d[1] == doctest::Approx(1.0));
}

TEST_CASE("rendering prunes, formats to 4 significant digits and keeps order") {
  const auto lib = BasisLibrary::build(2, 2);
  CoefficientTensor w(2, lib.size(), 2);
  w.at(0, 2, 0) = 1.0;
  w.at(0, 0, 1) = 11.0;
  w.at(0, 1, 1) = -10.0;
  w.at(1, 2, 0) = 1.0;
  w.at(1, 0, 1) = -1.0;
  const std::vector<std::string> names = {"l", "v"};
  const std::string text = render_equations(lib, w, 0.05, names);
  CHECK(text.find("dl/dt = v") != std::string::npos);
  CHECK(text.find("dv/dt = 11 - 10 l") != std::string::npos);
  CHECK(text.find("dv/dt = -1") != std::string::npos);

  CoefficientTensor tiny(1, lib.size(), 2);
  tiny.at(0, 1, 0) = 0.01;
  const std::string zero = render_equations(lib, tiny, 0.05, names);
  CHECK(zero.find("dl/dt = 0") != std::string::npos);

  CoefficientTensor rounding(1, lib.size(), 2);
  rounding.at(0, 0, 0) = 11.034999;
  const std::string rounded = render_equations(lib, rounding, 0.05, names);
  CHECK(rounded.find("11.03") != std::string::npos);
  CHECK(rounded.find("11.035") == std::string::npos);
}

TEST_CASE("equation json lists terms per mode and dimension") {
  const auto lib = BasisLibrary::build(2, 1);
  CoefficientTensor w(1, lib.size(), 2);
  w.at(0, 1, 0) = 2.5;
  const std::vector<std::string> names = {"x", "y"};
  const auto report = prune_equations(lib, w, 0.05, names);
  REQUIRE(report.size() == 1);
  REQUIRE(report[0].size() == 2);
  REQUIRE(report[0][0].size() == 1);
  CHECK(report[0][0][0].term == "x");
  CHECK(report[0][0][0].coefficient == 2.5);
  const std::string j = equations_to_json(report, names);
  CHECK(j.find("\"term\": \"x\"") != std::string::npos);
}
