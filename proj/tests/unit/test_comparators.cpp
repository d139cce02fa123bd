#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "comparators.hpp"
#include "errors.hpp"
#include "fcirk.hpp"
#include "nbody.hpp"
#include "oracles.hpp"
#include "toys.hpp"

using namespace fcirk;
using namespace fcirk::testing;

namespace {

const std::string kCoefficients = std::string(FCIRK_DATA_DIR) + "/coefficients/";

State kepler_state() {
  return {DDReal(1.0), DDReal(0.0), DDReal(0.05), DDReal(0.0), DDReal(1.1), DDReal(0.1)};
}

IntegratorConfig config(double h, long long n, long long m = 1) {
  IntegratorConfig cfg;
  cfg.h = h;
  cfg.n_steps = n;
  cfg.m = m;
  return cfg;
}

double rel_diff(std::span<const DDReal> a, std::span<const DDReal> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    num = std::max(num, std::abs((a[c] - b[c]).to_double()));
    den = std::max(den, std::abs(b[c].to_double()));
  }
  return num / den;
}

// Distance at T from the Taylor reference of the Kepler toy.
double toy_error(const IntegrationSummary& r, double eps, double T) {
  const KeplerReference ref = taylor_kepler({1.0L, 0.0L, 0.05L}, {0.0L, 1.1L, 0.1L}, 1.0L, T,
                                            10, 1e-3L, {eps, 2.0L * eps, 0.0L});
  double err = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    err = std::max(err, std::abs(r.final_state[c].to_double() - static_cast<double>(ref.q[c])));
    err = std::max(err, std::abs(r.final_state[3 + c].to_double() - static_cast<double>(ref.v[c])));
  }
  return err;
}

template <class Run>
double observed_order(Run run, double h, double eps, double T) {
  const double e1 = toy_error(run(h, static_cast<long long>(std::llround(T / h))), eps, T);
  const double e2 = toy_error(run(h / 2, static_cast<long long>(std::llround(2 * T / h))), eps, T);
  return std::log2(e1 / e2);
}

}  // namespace

TEST_CASE("one-stage FCIRK is the leapfrog with midpoint") {
  PerturbedKeplerToy sys(1e-2);
  const Tableau& tab = gauss_legendre_tableau(1);
  State a = kepler_state(), b = kepler_state();
  const IntegratorConfig cfg = config(0.1, 1);
  for (int j = 0; j < 20; ++j) {
    a = fcirk_step(sys, tab, cfg, 0.1 * j, a);
    b = leapfrog_midpoint_step(sys, cfg, 0.1 * j, b);
    CHECK(rel_diff(a, b) <= 1e-12);
  }
}

TEST_CASE("FCIRK and Lawson coincide for a linear unperturbed part") {
  PerturbedOscillatorToy sys(1.0, 0.05, 0.02, 0.6);
  const Tableau& tab = gauss_legendre_tableau(4);
  const State u0{DDReal(0.5), DDReal(0.2), DDReal(-0.1), DDReal(0.1), DDReal(-0.3), DDReal(0.2)};
  std::vector<State> fc, lw;
  const IntegratorConfig cfg = config(0.2, 30);
  integrate(sys, tab, cfg, 0.0, u0, [&](const Sample& s) { fc.emplace_back(s.u.begin(), s.u.end()); });
  lawson_integrate(sys, tab, cfg, 0.0, u0, [&](const Sample& s) { lw.emplace_back(s.u.begin(), s.u.end()); });
  REQUIRE(fc.size() == 31);
  REQUIRE(lw.size() == 31);
  double worst = 0.0;
  for (std::size_t j = 0; j < fc.size(); ++j) worst = std::max(worst, rel_diff(fc[j], lw[j]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("Lawson on a nonlinear flow agrees with FCIRK only to truncation") {
  PerturbedKeplerToy sys(1e-2);
  const Tableau& tab = gauss_legendre_tableau(2);
  const IntegrationSummary a = integrate(sys, tab, config(0.1, 20), 0.0, kepler_state());
  const IntegrationSummary b = lawson_integrate(sys, tab, config(0.1, 20), 0.0, kepler_state());
  const double d = rel_diff(a.final_state, b.final_state);
  CHECK(d < 1e-6);
  CHECK(d > 1e-14);
}

TEST_CASE("with g = 0 the splitting steps are the exact flow") {
  PerturbedKeplerToy sys(0.0);
  const State u0 = kepler_state();
  State exact(6);
  sys.flow(DDReal(0.3), u0, exact, nullptr);
  CHECK(rel_diff(wh_split_step(sys, 0.3, Precision::kMixed, 0.0, u0), exact) < 1e-30);
  CHECK(rel_diff(leapfrog_midpoint_step(sys, config(0.3, 1), 0.0, u0), exact) < 1e-30);
}

TEST_CASE("second-order splittings are time-symmetric") {
  PerturbedKeplerToy sys(1e-2);
  const State u0 = kepler_state();
  const State wh = wh_split_step(sys, 0.2, Precision::kMixed, 0.0, u0);
  CHECK(rel_diff(wh_split_step(sys, -0.2, Precision::kMixed, 0.2, wh), u0) < 1e-15);
  const State lf = leapfrog_midpoint_step(sys, config(0.2, 1), 0.0, u0);
  CHECK(rel_diff(leapfrog_midpoint_step(sys, config(-0.2, 1), 0.2, lf), u0) < 1e-14);
}

TEST_CASE("orders of the comparators on the Kepler toy") {
  const double eps = 1e-2, T = 10.0;
  PerturbedKeplerToy sys(eps);
  const State u0 = kepler_state();

  const double lf = observed_order(
      [&](double h, long long n) {
        return step_integrate(
            [&](double t, double hh, State& u, WorkCounters& c) {
              IntegratorConfig cfg = config(hh, 1);
              u = leapfrog_midpoint_step(sys, cfg, t, u, &c);
            },
            config(h, n), 0.0, u0);
      },
      0.05, eps, T);
  CHECK(lf == doctest::Approx(2.0).epsilon(0.25));

  const double wh = observed_order(
      [&](double h, long long n) {
        return step_integrate(
            [&](double t, double hh, State& u, WorkCounters& c) {
              u = wh_split_step(sys, hh, Precision::kMixed, t, u, &c);
            },
            config(h, n), 0.0, u0);
      },
      0.05, eps, T);
  CHECK(wh == doctest::Approx(2.0).epsilon(0.25));

  const SplitCoefficients triple = load_split_coefficients(kCoefficients + "triple_jump.json");
  const double tj = observed_order(
      [&](double h, long long n) {
        return composed_integrate(sys, triple, BaseStep::kLeapfrogMidpoint, config(h, n), 0.0, u0);
      },
      0.1, eps, T);
  CHECK(tj == doctest::Approx(4.0).epsilon(0.125));

  const SplitCoefficients suzuki = load_split_coefficients(kCoefficients + "suzuki5.json");
  const double sz = observed_order(
      [&](double h, long long n) {
        return composed_integrate(sys, suzuki, BaseStep::kWisdomHolman, config(h, n), 0.0, u0);
      },
      0.1, eps, T);
  CHECK(sz == doctest::Approx(4.0).epsilon(0.125));

  const double irk = observed_order(
      [&](double h, long long n) {
        return irk_integrate(sys, gauss_legendre_tableau(2), config(h, n), 0.0, u0);
      },
      0.05, eps, T);
  CHECK(irk == doctest::Approx(4.0).epsilon(0.125));
}

TEST_CASE("single-coefficient composition and Strang ABA reproduce the base step") {
  PerturbedKeplerToy sys(1e-2);
  const State u0 = kepler_state();
  const SplitCoefficients one = parse_split_coefficients(
      R"({"kind": "composition", "order": 2, "label": "identity", "gamma": ["1.0"]})");
  State u = u0;
  WorkCounters counters;
  composed_step(sys, one, BaseStep::kLeapfrogMidpoint, config(0.2, 1), 0.0, 0.2, u, counters);
  CHECK(rel_diff(u, leapfrog_midpoint_step(sys, config(0.2, 1), 0.0, u0)) == 0.0);

  const SplitCoefficients strang = load_split_coefficients(kCoefficients + "aba_strang.json");
  u = u0;
  composed_step(sys, strang, BaseStep::kWisdomHolman, config(0.2, 1), 0.0, 0.2, u, counters);
  CHECK(rel_diff(u, wh_split_step(sys, 0.2, Precision::kMixed, 0.0, u0)) < 1e-30);
}

TEST_CASE("coefficient files") {
  const SplitCoefficients triple = load_split_coefficients(kCoefficients + "triple_jump.json");
  CHECK(triple.kind == SplitCoefficients::Kind::kComposition);
  CHECK(triple.order == 4);
  REQUIRE(triple.a.size() == 3);
  // gamma_1 = 1 / (2 - 2^(1/3)) to double-word accuracy.
  const DDReal cube_root = DDReal(std::cbrt(2.0));
  const DDReal refined = cube_root - (cube_root * cube_root * cube_root - 2.0) / (3.0 * cube_root * cube_root);
  CHECK(std::abs((triple.a[0] - 1.0 / (2.0 - refined)).to_double()) < 1e-30);

  const SplitCoefficients suzuki = load_split_coefficients(kCoefficients + "suzuki5.json");
  DDReal sum;
  for (const DDReal& g : suzuki.a) sum = sum + g;
  CHECK(std::abs((sum - 1.0).to_double()) < 1e-30);

  CHECK_THROWS_AS(parse_split_coefficients(R"({"kind": "composition", "gamma": ["0.5", "0.4"]})"),
                  ParseError);
  // Plain numbers are accepted at double precision; malformed strings are not.
  CHECK(parse_split_coefficients(R"({"kind": "composition", "gamma": [0.5, 0.5]})").a.size() == 2);
  CHECK_THROWS_AS(parse_split_coefficients(R"({"kind": "composition", "gamma": ["0.5", "0.5x"]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_split_coefficients(R"({"kind": "composition", "gamma": ["1"], "extra": 1})"),
                  ParseError);
  CHECK_THROWS_AS(parse_split_coefficients(R"({"kind": "aba", "a": ["1"], "b": ["1"]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_split_coefficients(R"({"kind": "abc", "gamma": ["1"]})"), ParseError);
  CHECK_THROWS_AS(parse_split_coefficients("[1, 2"), ParseError);
  CHECK_THROWS_AS(load_split_coefficients("/nonexistent/coefficients.json"), IoError);
}

TEST_CASE("plain IRK without perturbation is accurate but not exact") {
  PerturbedKeplerToy sys(0.0);
  const State u0 = kepler_state();
  const IntegrationSummary r = irk_integrate(sys, gauss_legendre_tableau(3), config(0.05, 20), 0.0, u0);
  State exact(6);
  sys.flow(DDReal(1.0), u0, exact, nullptr);
  const double d = rel_diff(r.final_state, exact);
  CHECK(d < 1e-10);
  CHECK(d > 1e-20);

  FreeParticlePairToy no_field(0.1);
  CHECK_THROWS_AS(irk_integrate(no_field, gauss_legendre_tableau(2), config(0.1, 1), 0.0,
                                State(12, DDReal(0.1))),
                  InvalidArgument);
}

TEST_CASE("plain IRK on the solar system needs more sweeps than FCIRK") {
  const BarycentricState b = load_initial_conditions(std::string(FCIRK_DATA_DIR) + "/solar_system_j2000.json");
  const NBodyModel model = make_model(b);
  const State u0 = to_heliocentric(b);
  const Tableau& tab = gauss_legendre_tableau(6);
  const IntegrationSummary fc = integrate(model, tab, config(10.0, 100), 0.0, u0);
  const IntegrationSummary irk = irk_integrate(model, tab, config(10.0, 100), 0.0, u0);
  IntegratorConfig part = config(10.0, 100);
  part.partitioned = true;
  const IntegrationSummary irk_part = irk_integrate(model, tab, part, 0.0, u0);
  CHECK(irk.counters.fixed_point_sweeps > fc.counters.fixed_point_sweeps);
  CHECK(irk.counters.perturbation_evals > fc.counters.perturbation_evals);
  CHECK(irk_part.counters.fixed_point_sweeps < irk.counters.fixed_point_sweeps);
  CHECK(rel_diff(irk_part.final_state, irk.final_state) < 1e-12);
}

TEST_CASE("Wisdom-Holman conserves solar-system angular momentum") {
  const BarycentricState b = load_initial_conditions(std::string(FCIRK_DATA_DIR) + "/solar_system_j2000.json");
  const NBodyModel model = make_model(b);
  const State u0 = to_heliocentric(b);
  const Vec3<DDReal> l0 = model.angular_momentum<DDReal>(u0);
  const DDReal e0 = model.energy<DDReal>(u0);
  const double l_norm = std::sqrt((l0[0] * l0[0] + l0[1] * l0[1] + l0[2] * l0[2]).to_double());
  double worst_l = 0.0, worst_e = 0.0;
  step_integrate(
      [&](double t, double h, State& u, WorkCounters& c) {
        u = wh_split_step(model, h, Precision::kMixed, t, u, &c);
      },
      config(10.0, 2000, 20), 0.0, u0, [&](const Sample& s) {
        const Vec3<DDReal> l = model.angular_momentum<DDReal>(s.u);
        for (std::size_t c = 0; c < 3; ++c) {
          worst_l = std::max(worst_l, std::abs((l[c] - l0[c]).to_double()) / l_norm);
        }
        worst_e = std::max(worst_e, std::abs(((model.energy<DDReal>(s.u) - e0) / e0).to_double()));
      });
  CHECK(worst_l < 1e-14);
  CHECK(worst_e < 1e-6);
}

TEST_CASE("step failures carry the last good step") {
  PerturbedKeplerToy sys(1e-2);
  int calls = 0;
  try {
    step_integrate(
        [&](double, double, State&, WorkCounters&) {
          if (++calls == 4) throw NonConvergenceError("boom", 1.0, 3);
        },
        config(0.5, 10), 1.0, kepler_state());
    FAIL("expected StepFailure");
  } catch (const StepFailure& e) {
    CHECK(e.last_good_step() == 3);
    CHECK(e.last_good_time() == 2.5);
    CHECK(e.code() == ErrorCode::kNonConvergence);
  }
}
