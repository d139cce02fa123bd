#include <doctest.h>

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "stage_solver.hpp"

using namespace fcirk;

namespace {

IntegratorConfig stagnation_config() {
  IntegratorConfig cfg;
  cfg.h = 0.1;
  cfg.n_steps = 1;
  return cfg;
}

}  // namespace

TEST_CASE("zero right-hand side converges in one sweep") {
  const Tableau& tab = gauss_legendre_tableau(4);
  const std::vector<double> u{1.0, -2.0, 0.5};
  std::vector<double> z(4 * 3, 0.0), f(4 * 3, 1.0);
  const StageSolve r = solve_stages(
      tab, stagnation_config(), 0.1, u, z, f,
      [](int, std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
      },
      nullptr);
  CHECK(r.sweeps == 1);
  CHECK(r.residual == 0.0);
  for (double x : z) CHECK(x == 0.0);
}

TEST_CASE("midpoint stage of a scalar linear problem") {
  // u' = lambda (u - u_star): Z = (h lambda / 2)(u - u_star) / (1 - h lambda / 2).
  const double lambda = -3.0, u_star = 0.5, h = 0.2;
  const std::vector<double> u{1.5};
  std::vector<double> z{0.0}, f{0.0};
  const StageSolve r = solve_stages(
      gauss_legendre_tableau(1), stagnation_config(), h, u, z, f,
      [&](int, std::span<const double> w, std::span<double> out) {
        out[0] = lambda * (w[0] - u_star);
      },
      nullptr);
  const double x = h * lambda / 2;
  const double expected = x * (u[0] - u_star) / (1 - x);
  CHECK(std::abs(z[0] - expected) <= 4e-16 * std::abs(expected));
  CHECK(r.sweeps > 5);
  CHECK(r.sweeps < 100);
}

TEST_CASE("iteration cap raises non-convergence with the last residual") {
  const double lambda = -9.0, h = 0.2;  // contraction factor 0.9
  IntegratorConfig cfg = stagnation_config();
  cfg.fp_max_iters = 3;
  const std::vector<double> u{1.0};
  std::vector<double> z{0.0}, f{0.0};
  const auto rhs = [&](int, std::span<const double> w, std::span<double> out) {
    out[0] = lambda * w[0];
  };
  try {
    solve_stages(gauss_legendre_tableau(1), cfg, h, u, z, f, rhs, nullptr);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK(e.sweeps() == 3);
    CHECK(e.last_residual() > 0.1);
  }
}

TEST_CASE("an oscillating iteration is reported as stagnation") {
  // h lambda / 2 = -1: the iterates alternate between 0 and -1 forever.
  const double lambda = -10.0, h = 0.2;
  const std::vector<double> u{1.0};
  std::vector<double> z{0.0}, f{0.0};
  const auto rhs = [&](int, std::span<const double> w, std::span<double> out) {
    out[0] = lambda * w[0];
  };
  CHECK_THROWS_AS(solve_stages(gauss_legendre_tableau(1), stagnation_config(), h,
                               u, z, f, rhs, nullptr),
                  NonConvergenceError);
}

TEST_CASE("absolute stopping rule stops at the tolerance") {
  IntegratorConfig cfg = stagnation_config();
  cfg.stop_rule = StopRule::kAbsolute;
  cfg.fp_tol = 1e-6;
  const std::vector<double> u{1.0};
  std::vector<double> z{0.0}, f{0.0};
  const StageSolve r = solve_stages(
      gauss_legendre_tableau(1), cfg, 0.2, u, z, f,
      [](int, std::span<const double> w, std::span<double> out) { out[0] = -3.0 * w[0]; },
      nullptr);
  CHECK(r.residual <= 1e-6 * 2.0);
  CHECK(r.residual > 1e-17);
}

TEST_CASE("parallel and partitioned sweeps reach the same fixed point") {
  // Harmonic oscillator q' = v, v' = -q with s = 3.
  const Tableau& tab = gauss_legendre_tableau(3);
  const std::vector<double> u{1.0, 0.3};
  const auto rhs = [](int, std::span<const double> w, std::span<double> out) {
    out[0] = w[1];
    out[1] = -w[0];
  };
  std::vector<double> z1(6, 0.0), f1(6, 0.0);
  solve_stages(tab, stagnation_config(), 0.5, u, z1, f1, rhs, nullptr);

  Executor exec(3);
  std::vector<double> z2(6, 0.0), f2(6, 0.0);
  solve_stages(tab, stagnation_config(), 0.5, u, z2, f2, rhs, &exec);
  CHECK(z1 == z2);

  StagePartition part{{1, 0}, [](int, std::span<const double> w, std::span<double> out) {
                        out[0] = w[1];
                        out[1] = 0.0;
                      }};
  std::vector<double> z3(6, 0.0), f3(6, 0.0);
  solve_stages(tab, stagnation_config(), 0.5, u, z3, f3, rhs, nullptr, &part);
  for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(z3[k] - z1[k]) < 1e-15);

  // The Gauss step of a linear problem is the (3,3) Pade approximant of exp.
  const auto inc = stage_increment(tab, 0.5, f1, 2);
  const double q1 = u[0] + inc[0].value();
  const double v1 = u[1] + inc[1].value();
  CHECK(q1 * q1 + v1 * v1 == doctest::Approx(u[0] * u[0] + u[1] * u[1]).epsilon(1e-15));
  // R(ih) = P(ih) / P(-ih), P(z) = 1 + z/2 + z^2/10 + z^3/120: a rotation by
  // theta = 2 arg P(ih).
  const double hh = 0.5;
  const double theta = 2.0 * std::atan2(hh / 2 - hh * hh * hh / 120, 1 - hh * hh / 10);
  CHECK(std::abs(q1 - (std::cos(theta) * u[0] + std::sin(theta) * u[1])) < 1e-15);
  CHECK(std::abs(v1 - (-std::sin(theta) * u[0] + std::cos(theta) * u[1])) < 1e-15);
}

TEST_CASE("mixed tier keeps the increment error-free") {
  std::vector<DDReal> u{DDReal(1.0), DDReal(1.0)};
  std::vector<CompensatedAccumulator> delta(2);
  delta[0].add(1e-20);
  delta[1].add(1e-20);
  apply_increment(std::span<DDReal>(u.data(), 1), std::span(delta.data(), 1),
                  Precision::kMixed);
  apply_increment(std::span<DDReal>(u.data() + 1, 1), std::span(delta.data() + 1, 1),
                  Precision::kWorking);
  CHECK(u[0].hi == 1.0);
  CHECK(u[0].lo == 1e-20);
  CHECK(u[1].hi == 1.0);
  CHECK(u[1].lo == 0.0);
}

TEST_CASE("stage extrapolation continues the collocation polynomial") {
  // Z_l = p(c_l) with p(x) = 0.3 x - x^2 + 0.25 x^3 (degree <= s, p(0) = 0);
  // after a step with increment p(1), the next Z_i is p(1 + c_i) - p(1).
  const int s = 3;
  const Tableau& tab = gauss_legendre_tableau(s);
  auto p = [](double x) { return 0.3 * x - x * x + 0.25 * x * x * x; };
  std::vector<double> z(s);
  for (int l = 0; l < s; ++l) z[static_cast<std::size_t>(l)] = p(tab.c_w(l));
  const std::vector<double> inc{p(1.0)};
  extrapolate_stages(tab, z, inc, 1);
  for (int i = 0; i < s; ++i) {
    CHECK(z[static_cast<std::size_t>(i)] ==
          doctest::Approx(p(1.0 + tab.c_w(i)) - p(1.0)).epsilon(1e-13));
  }
}

TEST_CASE("configuration validation") {
  IntegratorConfig cfg = stagnation_config();
  CHECK_NOTHROW(validate(cfg));
  cfg.h = 0.0;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
  cfg = stagnation_config();
  cfg.m = 0;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
  cfg = stagnation_config();
  cfg.fp_max_iters = 0;
  CHECK_THROWS_AS(validate(cfg), InvalidArgument);
}
