#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "errors.hpp"
#include "fcirk.hpp"
#include "nbody.hpp"
#include "oracles.hpp"

using namespace fcirk;
using namespace fcirk::testing;

namespace {

const std::string kSolarSystem = std::string(FCIRK_DATA_DIR) + "/solar_system_j2000.json";

std::string two_body_json(const std::string& extra_body = "", const std::string& extra_top = "") {
  return R"({"G": 1.0, )" + extra_top + R"("bodies": [
    {"name": "A", "mass": 1.0, "position": [0, 0, 0], "velocity": [0, 0, 0]},
    {"name": "B", "mass": 0.001, "position": [1, 0, 0], "velocity": [0, 1, 0])" +
         extra_body + "}]}";
}

// Random normalized system around a dominant central mass.
BarycentricState random_system(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  BarycentricState b;
  b.G = 2.9e-4;
  b.masses.push_back(1.0);
  for (int i = 0; i < n; ++i) b.masses.push_back(1e-4 * (1.5 + unif(rng)));
  b.q.resize(b.masses.size());
  b.p.resize(b.masses.size());
  Vec3<double> ptot{0, 0, 0}, mq{0, 0, 0};
  double mtot = 0.0;
  for (std::size_t i = 0; i < b.masses.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      b.q[i][c] = i == 0 ? 0.01 * unif(rng) : (1.0 + i) * unif(rng);
      b.p[i][c] = i == 0 ? 0.0 : b.masses[i] * 0.01 * unif(rng);
      ptot[c] += b.p[i][c];
      mq[c] += b.masses[i] * b.q[i][c];
    }
    mtot += b.masses[i];
  }
  for (std::size_t c = 0; c < 3; ++c) b.p[0][c] = -ptot[c];
  for (std::size_t i = 0; i < b.masses.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) b.q[i][c] -= mq[c] / mtot;
  }
  return b;
}

}  // namespace

TEST_CASE("bundled solar system loads normalized") {
  const BarycentricState b = load_initial_conditions(kSolarSystem);
  REQUIRE(b.masses.size() == 10);
  CHECK(b.names[0] == "Sun");
  CHECK(b.names[9] == "Pluto");
  double scale_p = 0.0, scale_q = 0.0;
  Vec3<double> ptot{0, 0, 0}, mq{0, 0, 0};
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      ptot[c] += b.p[i][c];
      mq[c] += b.masses[i] * b.q[i][c];
      scale_p += std::abs(b.p[i][c]);
      scale_q += b.masses[i] * std::abs(b.q[i][c]);
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::abs(ptot[c]) <= 1e-14 * scale_p);
    CHECK(std::abs(mq[c]) <= 1e-14 * scale_q);
  }
}

TEST_CASE("two-body heliocentric position is the exact difference") {
  const BarycentricState b = parse_initial_conditions(two_body_json());
  const State u = to_heliocentric(b);
  REQUIRE(u.size() == 6);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(u[c] == two_sum(b.q[1][c], -b.q[0][c]));
  }
  // One planet: nothing to interact with.
  const NBodyModel model = make_model(b);
  std::vector<double> g(6, 1.0);
  model.perturbation(0.0, to_working(u), g);
  for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("central body alone is a valid empty model") {
  const BarycentricState b = parse_initial_conditions(
      R"({"G": 1.0, "bodies": [{"mass": 1.0, "position": [0,0,0], "velocity": [0,0,0]}]})");
  const NBodyModel model = make_model(b);
  CHECK(model.bodies() == 0);
  CHECK(model.dim() == 0);
  CHECK(to_heliocentric(b).empty());
}

TEST_CASE("heliocentric round trip and two-path invariants") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const BarycentricState b = random_system(rng, 9);
    const NBodyModel model = make_model(b);
    const State u = to_heliocentric(b);
    const BarycentricState back = to_barycentric(model, u);
    double worst = 0.0, qscale = 0.0, pscale = 0.0;
    for (std::size_t i = 0; i < b.masses.size(); ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        qscale = std::max(qscale, std::abs(b.q[i][c]));
        pscale = std::max(pscale, std::abs(b.p[i][c]));
      }
    }
    for (std::size_t i = 0; i < b.masses.size(); ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        worst = std::max(worst, std::abs(back.q[i][c] - b.q[i][c]) / qscale);
        worst = std::max(worst, std::abs(back.p[i][c] - b.p[i][c]) / pscale);
      }
    }
    CHECK(worst <= 1e-14);

    const double e_bary = barycentric_energy(b);
    const double e_helio = model.energy<DDReal>(u).to_double();
    CHECK(std::abs(e_helio - e_bary) <= 1e-13 * std::abs(e_bary));

    const Vec3<double> l_bary = barycentric_angular_momentum(b);
    const Vec3<DDReal> l_helio = model.angular_momentum<DDReal>(u);
    const double l_norm = std::sqrt(l_bary[0] * l_bary[0] + l_bary[1] * l_bary[1] + l_bary[2] * l_bary[2]);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::abs(l_helio[c].to_double() - l_bary[c]) <= 1e-13 * l_norm);
    }
  }
}

TEST_CASE("perturbation matches full barycentric forces minus the Kepler part") {
  const BarycentricState b = load_initial_conditions(kSolarSystem);
  const NBodyModel model = make_model(b);
  const State u = to_heliocentric(b);
  const std::vector<double> uw = to_working(u);
  std::vector<double> g(uw.size());
  model.perturbation(0.0, uw, g);

  // Barycentric equations in long double, mapped to (Q, V) and with the
  // Keplerian field of each body removed.
  const std::size_t n = b.masses.size();
  const long double G = b.G;
  std::vector<std::array<long double, 3>> qdot(n), pdot(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      qdot[i][c] = b.p[i][c] / static_cast<long double>(b.masses[i]);
      pdot[i][c] = 0.0L;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      long double d[3], r2 = 0.0L;
      for (std::size_t c = 0; c < 3; ++c) {
        d[c] = static_cast<long double>(b.q[j][c]) - b.q[i][c];
        r2 += d[c] * d[c];
      }
      const long double f = G * b.masses[i] * b.masses[j] / (r2 * std::sqrt(r2));
      for (std::size_t c = 0; c < 3; ++c) pdot[i][c] += f * d[c];
    }
  }
  double worst_q = 0.0, worst_v = 0.0, scale_q = 0.0, scale_v = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const long double m0 = b.masses[0], mi = b.masses[i];
    const long double mu = m0 * mi / (m0 + mi);
    const long double k = G * (m0 + mi);
    long double qq[3], r2 = 0.0L;
    for (std::size_t c = 0; c < 3; ++c) {
      qq[c] = static_cast<long double>(b.q[i][c]) - b.q[0][c];
      r2 += qq[c] * qq[c];
    }
    for (std::size_t c = 0; c < 3; ++c) {
      const long double v = b.p[i][c] / mu;
      const long double gq = qdot[i][c] - qdot[0][c] - v;
      const long double gv = pdot[i][c] / mu + k * qq[c] / (r2 * std::sqrt(r2));
      const std::size_t o = 6 * (i - 1);
      worst_q = std::max(worst_q, static_cast<double>(std::fabs(g[o + c] - gq)));
      worst_v = std::max(worst_v, static_cast<double>(std::fabs(g[o + 3 + c] - gv)));
      scale_q = std::max(scale_q, static_cast<double>(std::fabs(gq)));
      scale_v = std::max(scale_v, static_cast<double>(std::fabs(gv)));
    }
  }
  CHECK(worst_q <= 1e-13 * scale_q);
  CHECK(worst_v <= 1e-13 * scale_v);
}

TEST_CASE("mirror-image planets have antisymmetric position rates") {
  NBodyModel model(1.0, {1.0, 1e-3, 1e-3});
  const std::vector<double> u{0.8, 0.3, 0.1, -0.2, 1.0, 0.05,
                              -0.8, -0.3, -0.1, 0.2, -1.0, -0.05};
  std::vector<double> g(12);
  model.perturbation(0.0, u, g);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(g[c] == -g[6 + c]);
    CHECK(g[3 + c] == -g[9 + c]);
  }
  const std::vector<double> same{0.8, 0.3, 0.1, 0, 0, 0, 0.8, 0.3, 0.1, 0, 0, 0};
  CHECK_THROWS_AS(model.perturbation(0.0, same, g), SingularityError);
}

TEST_CASE("circular single planet satisfies vis-viva") {
  const double G = 1.0, m0 = 1.0, m1 = 1e-3, r = 2.0;
  NBodyModel model(G, {m0, m1});
  const double k = G * (m0 + m1);
  const State u{DDReal(r), 0.0, 0.0, 0.0, DDReal(std::sqrt(k / r)), 0.0};
  const double mu = m0 * m1 / (m0 + m1);
  CHECK(model.energy<DDReal>(u).to_double() == doctest::Approx(-mu * k / (2 * r)).epsilon(1e-15));

  // One period of the exact flow returns to the start.
  const double period = 2.0 * M_PI * std::sqrt(r * r * r / k);
  IntegratorConfig cfg;
  cfg.h = period / 64;
  cfg.n_steps = 64;
  const IntegrationSummary run = integrate(model, gauss_legendre_tableau(2), cfg, 0.0, u);
  for (std::size_t c = 0; c < 6; ++c) {
    CHECK(std::abs((run.final_state[c] - u[c]).to_double()) <= 1e-10);
  }
}

TEST_CASE("structure maps are exact inverses and the flow is symplectic") {
  const BarycentricState b = load_initial_conditions(kSolarSystem);
  const NBodyModel model = make_model(b);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> w(54), jw(54), back(54);
  for (double& x : w) x = unif(rng);
  model.structure_apply(w, jw);
  model.structure_solve(jw, back);
  CHECK(back == w);

  // phi'^T J phi' = J for the first body (Mercury, 6x6 block).
  const std::vector<double> u = to_working(to_heliocentric(b));
  const std::vector<double> u6(u.begin(), u.begin() + 6);
  const NBodyModel single(b.G, {b.masses[0], b.masses[1]});
  const auto phi = [&](const std::vector<DDReal>& x) {
    std::vector<DDReal> y(6);
    single.flow(DDReal(30.0), x, y, nullptr);
    return y;
  };
  // Differencing step well below the velocity scale (~0.02 au/day).
  const std::vector<double> m = richardson_jacobian(phi, u6, 1e-6);
  double worst = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      // (M^T J M)_ij with J(a, b) = (-b, a).
      double acc = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        acc += m[k * 6 + i] * -m[(k + 3) * 6 + j] + m[(k + 3) * 6 + i] * m[k * 6 + j];
      }
      double jij = 0.0;
      if (i < 3 && j == i + 3) jij = -1.0;
      if (i >= 3 && j == i - 3) jij = 1.0;
      worst = std::max(worst, std::abs(acc - jij));
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("short FCIRK run keeps the solar-system energy") {
  const BarycentricState b = load_initial_conditions(kSolarSystem);
  const NBodyModel model = make_model(b);
  const State u0 = to_heliocentric(b);
  const DDReal e0 = model.energy<DDReal>(u0);
  IntegratorConfig cfg;
  cfg.h = 10.0;
  cfg.n_steps = 1000;
  cfg.m = 10;
  double worst = 0.0;
  integrate(model, gauss_legendre_tableau(6), cfg, 0.0, u0, [&](const Sample& s) {
    worst = std::max(worst, std::abs(((model.energy<DDReal>(s.u) - e0) / e0).to_double()));
  });
  CHECK(worst <= 1e-12);
}

TEST_CASE("initial-condition parse errors") {
  CHECK_NOTHROW(parse_initial_conditions(two_body_json()));
  CHECK_THROWS_AS(parse_initial_conditions(two_body_json(R"(, "radius": 1.0)")), ParseError);
  CHECK_NOTHROW(parse_initial_conditions(two_body_json(R"(, "radius": 1.0)"), true));
  CHECK_THROWS_AS(parse_initial_conditions(two_body_json("", R"("colour": "red", )")), ParseError);
  CHECK_THROWS_AS(parse_initial_conditions("{not json"), ParseError);
  CHECK_THROWS_AS(parse_initial_conditions(R"({"G": 1.0, "bodies": []})"), ParseError);
  CHECK_THROWS_AS(
      parse_initial_conditions(R"({"G": 1.0, "bodies": [{"mass": -1, "position": [0,0,0], "velocity": [0,0,0]}]})"),
      ParseError);
  try {
    parse_initial_conditions(R"({"G": 1.0, "bodies": [{"mass": 1, "position": [0,0], "velocity": [0,0,0]}]})");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("$.bodies[0].position") != std::string::npos);
  }
  // G = 1 is not the value implied by au, day and solar masses.
  CHECK_THROWS_AS(parse_initial_conditions(two_body_json(
                      "", R"("units": {"length": "au", "time": "day", "mass": "solar"}, )")),
                  UnitError);
  CHECK_THROWS_AS(parse_initial_conditions(two_body_json(
                      "", R"("units": {"length": "parsec", "time": "day", "mass": "solar"}, )")),
                  UnitError);
  CHECK_THROWS_AS(load_initial_conditions("/nonexistent/ic.json"), IoError);
}

TEST_CASE("non-vanishing momentum is a normalization error") {
  BarycentricState b = parse_initial_conditions(two_body_json());
  b.p[1][0] += 0.1;
  CHECK_THROWS_AS(to_heliocentric(b), NormalizationError);
}
