#include <doctest.h>

#include <cmath>
#include <random>

#include "errors.hpp"
#include "kepler.hpp"
#include "oracles.hpp"

using namespace fcirk;
using namespace fcirk::testing;

namespace {

double rel_diff(const KeplerBody& a, const std::array<long double, 3>& q,
                const std::array<long double, 3>& v) {
  long double num = 0, den = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    num = std::max(num, std::fabs(a.q[c] - q[c]));
    num = std::max(num, std::fabs(a.v[c] - v[c]));
    den = std::max(den, std::fabs(q[c]));
    den = std::max(den, std::fabs(v[c]));
  }
  return static_cast<double>(num / den);
}

KeplerBody random_body(std::mt19937_64& rng, bool hyperbolic) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> radius(0.6, 1.6);
  KeplerBody b;
  b.k = 1.0;
  double qn = 0, vn = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    b.q[c] = u(rng);
    b.v[c] = u(rng);
    qn += b.q[c] * b.q[c];
    vn += b.v[c] * b.v[c];
  }
  const double r = radius(rng);
  const double escape = std::sqrt(2.0 / r);
  // Elliptic: 0.3..0.9 of escape speed, hyperbolic: 1.1..1.6.
  std::uniform_real_distribution<double> frac(hyperbolic ? 1.1 : 0.3, hyperbolic ? 1.6 : 0.9);
  const double speed = frac(rng) * escape;
  for (std::size_t c = 0; c < 3; ++c) {
    b.q[c] *= r / std::sqrt(qn);
    b.v[c] *= speed / std::sqrt(vn);
  }
  return b;
}

double energy(const KeplerBody& b) {
  const double r = std::sqrt(b.q[0] * b.q[0] + b.q[1] * b.q[1] + b.q[2] * b.q[2]);
  return 0.5 * (b.v[0] * b.v[0] + b.v[1] * b.v[1] + b.v[2] * b.v[2]) - b.k / r;
}

}  // namespace

TEST_CASE("circular orbit follows cos/sin") {
  KeplerBody b{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, 1.0};
  for (double t : {0.1, 1.0, 3.0, -2.5, 100.0}) {
    const KeplerBody r = kepler_flow(b, t);
    CHECK(r.q[0] == doctest::Approx(std::cos(t)).epsilon(1e-13));
    CHECK(r.q[1] == doctest::Approx(std::sin(t)).epsilon(1e-13));
    CHECK(r.v[0] == doctest::Approx(-std::sin(t)).epsilon(1e-13));
  }
}

TEST_CASE("zero time returns the input unchanged") {
  KeplerBody b{{0.3, -1.0, 0.2}, {0.5, 0.1, -0.3}, 2.0};
  const KeplerBody r = kepler_flow(b, 0.0);
  CHECK(r.q == b.q);
  CHECK(r.v == b.v);
}

TEST_CASE("flow matches a 10th-order Taylor reference") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> times(-0.6, 0.6);
  for (int n = 0; n < 20; ++n) {
    const KeplerBody b = random_body(rng, n % 2 == 1);
    const double t = times(rng);
    const KeplerBody r = kepler_flow(b, t);
    const auto ref = taylor_kepler({b.q[0], b.q[1], b.q[2]}, {b.v[0], b.v[1], b.v[2]},
                                   b.k, t);
    CAPTURE(n);
    CHECK(rel_diff(r, ref.q, ref.v) < 1e-12);
  }
}

TEST_CASE("Stumpff functions near and away from zero") {
  for (double z : {1e-6, 0.05, 0.5, 5.0, 40.0, -0.05, -5.0, -40.0}) {
    CAPTURE(z);
    const Stumpff<double> c = stumpff(z);
    long double c2, c3;
    if (z > 0) {
      const long double w = std::sqrt(static_cast<long double>(z));
      c2 = (1.0L - std::cos(w)) / z;
      c3 = (w - std::sin(w)) / (z * w);
    } else {
      const long double w = std::sqrt(-static_cast<long double>(z));
      c2 = (std::cosh(w) - 1.0L) / -z;
      c3 = (std::sinh(w) - w) / (-z * w);
    }
    const double tol = std::abs(z) < 1e-3 ? 1e-10 : 1e-14;
    CHECK(c.c2 == doctest::Approx(static_cast<double>(c2)).epsilon(tol));
    CHECK(c.c3 == doctest::Approx(static_cast<double>(c3)).epsilon(tol));
    CHECK(c.c0 + z * c.c2 == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("flow conserves energy and composes") {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 20; ++n) {
    const KeplerBody b = random_body(rng, n % 3 == 0);
    const KeplerBody once = kepler_flow(b, 0.7);
    const KeplerBody twice = kepler_flow(once, 0.8);
    const KeplerBody direct = kepler_flow(b, 1.5);
    // Energy evaluation itself cancels terms of size ~|v|^2 and k/r.
    const double scale = std::abs(0.5 * (b.v[0] * b.v[0] + b.v[1] * b.v[1] + b.v[2] * b.v[2])) + 2.0;
    CHECK(std::abs(energy(once) - energy(b)) < 1e-14 * scale);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::abs(twice.q[c] - direct.q[c]) < 1e-12);
      CHECK(std::abs(twice.v[c] - direct.v[c]) < 1e-12);
    }
  }
}

TEST_CASE("elliptic flow is periodic over many periods") {
  KeplerBody b{{1.0, 0.0, 0.0}, {0.0, 1.2, 0.1}, 1.0};
  const double beta = 2.0 - (1.2 * 1.2 + 0.01);
  const double period = 2.0 * M_PI / (beta * std::sqrt(beta));
  const KeplerBody r = kepler_flow(b, 1000.0 * period + 0.3);
  const KeplerBody s = kepler_flow(b, 0.3);
  for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(r.q[c] - s.q[c]) < 1e-9);
}

TEST_CASE("double-word flow round trip") {
  std::mt19937_64 rng(9);
  for (int n = 0; n < 10; ++n) {
    const KeplerBody b = random_body(rng, n % 2 == 0);
    KeplerBodyDD d{{b.q[0], b.q[1], b.q[2]}, {b.v[0], b.v[1], b.v[2]}, DDReal(b.k)};
    const KeplerBodyDD fwd = kepler_flow(d, DDReal(2.5));
    const KeplerBodyDD back = kepler_flow(fwd, DDReal(-2.5));
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::abs((back.q[c] - d.q[c]).to_double()) < 1e-28);
      CHECK(std::abs((back.v[c] - d.v[c]).to_double()) < 1e-28);
    }
    // Double and double-word agree to working precision.
    const KeplerBody w = kepler_flow(b, 2.5);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::abs(fwd.q[c].to_double() - w.q[c]) < 1e-13);
    }
  }
}

TEST_CASE("transposed Jacobian matches Richardson differences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 20; ++n) {
    const KeplerBody b = random_body(rng, n % 2 == 1);
    const double t = 0.3 + 2.0 * std::abs(u(rng));
    std::array<double, 6> w{};
    for (double& x : w) x = u(rng);
    const auto got = kepler_flow_jacT_apply(b, t, w);

    const std::vector<double> u0{b.q[0], b.q[1], b.q[2], b.v[0], b.v[1], b.v[2]};
    const auto flow = [&](const std::vector<DDReal>& x) {
      KeplerBodyDD d{{x[0], x[1], x[2]}, {x[3], x[4], x[5]}, DDReal(b.k)};
      const KeplerBodyDD r = kepler_flow(d, DDReal(t));
      return std::vector<DDReal>{r.q[0], r.q[1], r.q[2], r.v[0], r.v[1], r.v[2]};
    };
    const auto ref = richardson_jacT(flow, u0, {w.begin(), w.end()}, 1e-4);
    double num = 0, den = 0;
    for (std::size_t c = 0; c < 6; ++c) {
      num = std::max(num, std::abs(got[c] - ref[c]));
      den = std::max(den, std::abs(ref[c]));
    }
    CAPTURE(n);
    CHECK(num / den < 1e-9);

    // Memoized solve gives the same product.
    KeplerSolve<double> memo;
    kepler_flow(b, t, &memo);
    const auto again = kepler_flow_jacT_apply(b, t, w, &memo);
    for (std::size_t c = 0; c < 6; ++c) CHECK(again[c] == doctest::Approx(got[c]).epsilon(1e-13));
  }
}

TEST_CASE("singular inputs") {
  KeplerBody origin{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, 1.0};
  CHECK_THROWS_AS(kepler_flow(origin, 1.0), SingularityError);
  // Radial infall from rest reaches the centre within t = pi/(2 sqrt 2).
  KeplerBody radial{{1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 1.0};
  CHECK_THROWS_AS(kepler_flow(radial, 1.5), SingularityError);
  CHECK_NOTHROW(kepler_flow(radial, 0.5));
}
