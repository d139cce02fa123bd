#include "kepler.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>

#include "errors.hpp"

namespace fcirk {
namespace {

// Scalar carrying derivatives with respect to (r0, sigma0, beta).
template <class T>
struct Dual3 {
  using value_type = T;

  T v{};
  std::array<T, 3> d{};

  Dual3() = default;
  template <class U, class = std::enable_if_t<std::is_convertible_v<U, T>>>
  Dual3(const U& x) : v(T(x)) {}  // NOLINT: constants promote implicitly
  Dual3(const T& x, const std::array<T, 3>& dx) : v(x), d(dx) {}

  friend Dual3 operator+(const Dual3& a, const Dual3& b) {
    Dual3 r;
    r.v = a.v + b.v;
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
  }
  friend Dual3 operator-(const Dual3& a, const Dual3& b) {
    Dual3 r;
    r.v = a.v - b.v;
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
  }
  friend Dual3 operator-(const Dual3& a) {
    Dual3 r;
    r.v = -a.v;
    for (int i = 0; i < 3; ++i) r.d[i] = -a.d[i];
    return r;
  }
  friend Dual3 operator*(const Dual3& a, const Dual3& b) {
    Dual3 r;
    r.v = a.v * b.v;
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }
  friend Dual3 operator/(const Dual3& a, const Dual3& b) {
    Dual3 r;
    r.v = a.v / b.v;
    for (int i = 0; i < 3; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) / b.v;
    return r;
  }
  friend Dual3 sqrt(const Dual3& a) {
    using std::sqrt;
    Dual3 r;
    r.v = sqrt(a.v);
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] / (2.0 * r.v);
    return r;
  }
};

using fcirk::value_of;

template <class T>
double value_of(const Dual3<T>& x) {
  return value_of(x.v);
}

template <class T>
T constant_from(const DDReal& x) {
  if constexpr (std::is_same_v<T, double>) {
    return x.to_double();
  } else if constexpr (std::is_same_v<T, DDReal>) {
    return x;
  } else {
    return T(constant_from<typename T::value_type>(x));
  }
}

template <class T>
constexpr bool is_double_word() {
  if constexpr (std::is_same_v<T, double>) {
    return false;
  } else if constexpr (std::is_same_v<T, DDReal>) {
    return true;
  } else {
    return is_double_word<typename T::value_type>();
  }
}

// Truncation index for the Stumpff series at |z| < 0.1.
template <class T>
constexpr int series_terms() {
  return is_double_word<T>() ? 12 : 7;
}

const std::array<DDReal, 41>& inverse_factorials() {
  static const std::array<DDReal, 41> table = [] {
    std::array<DDReal, 41> f{};
    DDReal fact(1.0);
    f[0] = DDReal(1.0);
    for (int n = 1; n <= 40; ++n) {
      fact = fact * static_cast<double>(n);
      f[static_cast<std::size_t>(n)] = 1.0 / fact;
    }
    return f;
  }();
  return table;
}

template <class T>
T cross_sq_norm(const Vec3<T>& a, const Vec3<T>& b) {
  const T x = a[1] * b[2] - a[2] * b[1];
  const T y = a[2] * b[0] - a[0] * b[2];
  const T z = a[0] * b[1] - a[1] * b[0];
  return x * x + y * y + z * z;
}

template <class T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <class T>
struct GFunctions {
  T g0, g1, g2, g3;
};

template <class T>
GFunctions<T> gfunctions(const T& s, const T& beta) {
  const T s2 = s * s;
  const Stumpff<T> c = stumpff(beta * s2);
  return {c.c0, s * c.c1, s2 * c.c2, s2 * s * c.c3};
}

struct OrbitScalars {
  double r0, sigma0, beta, k;
};

double initial_guess(const OrbitScalars& o, double t) {
  double s = t / o.r0;
  if (o.beta > 0.0) {
    const double root_beta = std::sqrt(o.beta);
    if (std::abs(s) * root_beta > 0.5) s = o.beta * t / o.k;
  } else if (o.beta < 0.0) {
    const double a = std::sqrt(-o.beta);
    if (std::abs(s) * a > 1.0) {
      const double scale = o.r0 / a + o.k / (a * a * a);
      const double mag = std::log(std::max(2.0 * std::abs(t) / scale, 1.0)) / a;
      s = std::copysign(std::max(mag, 1.0 / a), t);
    }
  }
  return s;
}

double kepler_residual(const OrbitScalars& o, double s, double t,
                       double* radius) {
  const GFunctions<double> g = gfunctions(s, o.beta);
  if (radius != nullptr) *radius = o.r0 * g.g0 + o.sigma0 * g.g1 + o.k * g.g2;
  return o.r0 * g.g1 + o.sigma0 * g.g2 + o.k * g.g3 - t;
}

// Newton iteration on the universal Kepler equation with a sign bracket,
// falling back to bisection after 50 iterations.
double solve_universal(const OrbitScalars& o, double t, const double* guess,
                       int* iterations) {
  constexpr double kTol = 1e-15;
  constexpr int kNewtonLimit = 50;
  *iterations = 0;
  if (t == 0.0) return 0.0;

  // F(s) = t(s) - t is increasing in s with F(0) = -t.
  double lo = t > 0.0 ? 0.0 : -INFINITY;
  double hi = t > 0.0 ? INFINITY : 0.0;
  double s = guess != nullptr ? *guess : initial_guess(o, t);
  if (!(s > lo && s < hi)) s = initial_guess(o, t);
  double last_step = INFINITY;

  for (int it = 1; it <= kNewtonLimit; ++it) {
    *iterations = it;
    double r = 0.0;
    const double f = kepler_residual(o, s, t, &r);
    if (f == 0.0) return s;
    if (f < 0.0) {
      lo = std::max(lo, s);
    } else {
      hi = std::min(hi, s);
    }
    double next = s - f / r;
    if (r > 0.0 && std::abs(next - s) <= kTol * std::abs(s)) return next;
    if (!(r > 0.0) || !(next > lo && next < hi)) {
      if (std::isfinite(lo) && std::isfinite(hi)) {
        next = 0.5 * (lo + hi);
      } else if (t > 0.0) {
        next = lo > 0.0 ? 2.0 * lo : std::abs(t) / o.r0;
      } else {
        next = hi < 0.0 ? 2.0 * hi : -std::abs(t) / o.r0;
      }
    }
    // Near the root the residual is dominated by rounding; a step that no
    // longer shrinks is as converged as double arithmetic allows.
    const double step = std::abs(next - s);
    if (step <= kTol * std::abs(next)) return next;
    if (step >= last_step && step <= 1e-10 * std::abs(next)) return next;
    last_step = step;
    s = next;
  }

  // Bisection fallback on a finite bracket.
  for (int expand = 0; expand < 2000 && !std::isfinite(hi); ++expand) {
    const double trial = lo > 0.0 ? 2.0 * lo : std::abs(t) / o.r0;
    if (kepler_residual(o, trial, t, nullptr) < 0.0) {
      lo = trial;
    } else {
      hi = trial;
    }
  }
  for (int expand = 0; expand < 2000 && !std::isfinite(lo); ++expand) {
    const double trial = hi < 0.0 ? 2.0 * hi : -std::abs(t) / o.r0;
    if (kepler_residual(o, trial, t, nullptr) > 0.0) {
      hi = trial;
    } else {
      lo = trial;
    }
  }
  double residual = NAN;
  for (int it = 0; it < 400 && std::isfinite(lo) && std::isfinite(hi); ++it) {
    ++*iterations;
    const double mid = 0.5 * (lo + hi);
    residual = kepler_residual(o, mid, t, nullptr);
    if (residual == 0.0 || (hi - lo) <= 2e-16 * std::abs(mid)) return mid;
    if (residual < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw SolverError("universal Kepler equation did not converge (t = " +
                        std::to_string(t) + ")",
                    s, residual, *iterations);
}

// Only radial orbits reach the origin; they do so where dr/ds changes sign
// from negative to positive.
void check_radial_collision(const OrbitScalars& o, double s,
                            double angular_sq, double speed_sq,
                            long long periods) {
  if (angular_sq > 1e-28 * o.r0 * o.r0 * speed_sq) return;
  // A whole radial period always passes through the centre.
  if (periods != 0) {
    throw SingularityError("radial Kepler orbit collides with the centre");
  }
  const double a = std::min(0.0, s);
  const double b = std::max(0.0, s);
  constexpr int kSamples = 64;
  double prev = NAN;
  for (int i = 0; i <= kSamples; ++i) {
    const double x = a + (b - a) * i / kSamples;
    const GFunctions<double> g = gfunctions(x, o.beta);
    const double rate = o.sigma0 * g.g0 + (o.k - o.beta * o.r0) * g.g1;
    if (i > 0 && prev < 0.0 && rate >= 0.0) {
      throw SingularityError("radial Kepler orbit collides with the centre");
    }
    prev = rate;
  }
}

template <class T>
struct Reduced {
  T t;
  long long periods;
};

// Removes whole periods from t on elliptic orbits.
template <class T>
Reduced<T> reduce_time(const T& t, const T& beta, const T& k) {
  using std::sqrt;
  if (!(value_of(beta) > 0.0)) return {t, 0};
  const T period = 2.0 * constant_from<T>(kDDPi) * k / (beta * sqrt(beta));
  const double pv = value_of(period);
  const double tv = value_of(t);
  if (!(std::abs(tv) > 0.5 * pv) || !std::isfinite(pv)) return {t, 0};
  const auto n = static_cast<long long>(std::llround(tv / pv));
  return {t - period * static_cast<double>(n), n};
}

template <class T>
T solve_tier(const OrbitScalars& ov, const T& r0, const T& sigma0,
             const T& beta, const T& k, const T& t_reduced,
             KeplerSolve<T>* memo) {
  double guess = 0.0;
  const double* guess_ptr = nullptr;
  if (memo != nullptr && memo->valid) {
    guess = value_of(memo->s);
    guess_ptr = &guess;
  }
  int iterations = 0;
  const double s_w = solve_universal(ov, value_of(t_reduced), guess_ptr,
                                     &iterations);
  T s = T(s_w);
  if constexpr (is_double_word<T>()) {
    for (int it = 0; it < 4 && t_reduced.hi != 0.0; ++it) {
      const GFunctions<T> g = gfunctions(s, beta);
      const T f = r0 * g.g1 + sigma0 * g.g2 + k * g.g3 - t_reduced;
      const T r = r0 * g.g0 + sigma0 * g.g1 + k * g.g2;
      const T ds = f / r;
      s = s - ds;
      ++iterations;
      if (std::abs(ds.hi) <= 1e-32 * std::abs(s.hi)) break;
    }
  }
  if (memo != nullptr) memo->iterations = iterations;
  return s;
}

}  // namespace

template <class T>
Stumpff<T> stumpff(const T& z) {
  const auto& inv_fact = inverse_factorials();
  T zz = z;
  int quarterings = 0;
  double az = std::abs(value_of(z));
  while (az >= kStumpffSeriesThreshold) {
    zz = zz * 0.25;
    az *= 0.25;
    ++quarterings;
  }

  constexpr int kTerms = series_terms<T>();
  T c2 = constant_from<T>(inv_fact[2 * kTerms + 2]);
  T c3 = constant_from<T>(inv_fact[2 * kTerms + 3]);
  for (int k = kTerms - 1; k >= 0; --k) {
    c2 = constant_from<T>(inv_fact[static_cast<std::size_t>(2 * k + 2)]) - zz * c2;
    c3 = constant_from<T>(inv_fact[static_cast<std::size_t>(2 * k + 3)]) - zz * c3;
  }

  for (int i = 0; i < quarterings; ++i) {
    const T c0 = 1.0 - zz * c2;
    const T c1 = 1.0 - zz * c3;
    c3 = (c2 + c0 * c3) * 0.25;
    c2 = c1 * c1 * 0.5;
    zz = zz * 4.0;
  }
  return {1.0 - z * c2, 1.0 - z * c3, c2, c3};
}

template <class T>
KeplerBodyT<T> kepler_flow(const KeplerBodyT<T>& body, const T& t,
                           KeplerSolve<T>* memo) {
  using std::sqrt;
  const Vec3<T>& q = body.q;
  const Vec3<T>& v = body.v;
  const T r0_sq = dot(q, q);
  if (!(value_of(r0_sq) > 0.0)) {
    throw SingularityError("Kepler flow evaluated at the centre (|q| = 0)");
  }
  if (value_of(t) == 0.0 && value_of(T(t - T(value_of(t)))) == 0.0) {
    if (memo != nullptr) *memo = KeplerSolve<T>{T(0.0), 0, 0, true};
    return body;
  }

  const T r0 = sqrt(r0_sq);
  const T sigma0 = dot(q, v);
  const T speed_sq = dot(v, v);
  const T beta = 2.0 * body.k / r0 - speed_sq;
  const Reduced<T> red = reduce_time(t, beta, body.k);

  const OrbitScalars ov{value_of(r0), value_of(sigma0), value_of(beta),
                        value_of(body.k)};
  const T s = solve_tier(ov, r0, sigma0, beta, body.k, red.t, memo);
  check_radial_collision(ov, value_of(s), value_of(cross_sq_norm(q, v)),
                         value_of(speed_sq), red.periods);

  const GFunctions<T> g = gfunctions(s, beta);
  const T r = r0 * g.g0 + sigma0 * g.g1 + body.k * g.g2;
  if (!(value_of(r) > 0.0)) {
    throw SingularityError("Kepler flow reached the centre");
  }
  const T f = 1.0 - body.k * g.g2 / r0;
  const T gg = r0 * g.g1 + sigma0 * g.g2;
  const T fd = -body.k * g.g1 / (r * r0);
  const T gd = 1.0 - body.k * g.g2 / r;

  KeplerBodyT<T> out;
  out.k = body.k;
  for (int i = 0; i < 3; ++i) {
    out.q[i] = f * q[i] + gg * v[i];
    out.v[i] = fd * q[i] + gd * v[i];
  }
  if (memo != nullptr) {
    memo->s = s;
    memo->periods = red.periods;
    memo->valid = true;
  }
  return out;
}

template <class T>
std::array<T, 6> kepler_flow_jacT_apply(const KeplerBodyT<T>& body, const T& t,
                                        const std::array<T, 6>& w,
                                        const KeplerSolve<T>* memo) {
  using std::sqrt;
  using D = Dual3<T>;
  const Vec3<T>& q = body.q;
  const Vec3<T>& v = body.v;
  const T k = body.k;

  const T r0_sq = dot(q, q);
  if (!(value_of(r0_sq) > 0.0)) {
    throw SingularityError("Kepler flow evaluated at the centre (|q| = 0)");
  }
  const T r0v = sqrt(r0_sq);
  const T sigma0v = dot(q, v);
  const T speed_sq = dot(v, v);
  const T betav = 2.0 * k / r0v - speed_sq;

  KeplerSolve<T> sol;
  if (memo != nullptr && memo->valid) {
    sol = *memo;
  } else {
    kepler_flow(body, t, &sol);
  }

  // Propagation depends on (q, v) only through r0, sigma0 and beta. Their
  // partials are carried as dual numbers; one Newton step from the converged
  // anomaly gives its implicit derivative.
  const D r0(r0v, {T(1.0), T(0.0), T(0.0)});
  const D sigma0(sigma0v, {T(0.0), T(1.0), T(0.0)});
  const D beta(betav, {T(0.0), T(0.0), T(1.0)});
  D t_red = D(t);
  if (sol.periods != 0) {
    const D period = 2.0 * constant_from<D>(kDDPi) * D(k) / (beta * sqrt(beta));
    t_red = D(t) - period * static_cast<double>(sol.periods);
  }

  D s = D(sol.s);
  {
    const GFunctions<D> g = gfunctions(s, beta);
    const D f = r0 * g.g1 + sigma0 * g.g2 + D(k) * g.g3 - t_red;
    const D r = r0 * g.g0 + sigma0 * g.g1 + D(k) * g.g2;
    s = s - f / r;
  }
  const GFunctions<D> g = gfunctions(s, beta);
  const D r = r0 * g.g0 + sigma0 * g.g1 + D(k) * g.g2;
  const D f = 1.0 - D(k) * g.g2 / r0;
  const D gg = r0 * g.g1 + sigma0 * g.g2;
  const D fd = -D(k) * g.g1 / (r * r0);
  const D gd = 1.0 - D(k) * g.g2 / r;

  const Vec3<T> wq{w[0], w[1], w[2]};
  const Vec3<T> wv{w[3], w[4], w[5]};
  const T wq_q = dot(wq, q);
  const T wq_v = dot(wq, v);
  const T wv_q = dot(wv, q);
  const T wv_v = dot(wv, v);

  // alpha_p = d(w . phi)/dp for p in (r0, sigma0, beta), (q, v) held fixed.
  std::array<T, 3> alpha{};
  for (int p = 0; p < 3; ++p) {
    alpha[p] = wq_q * f.d[p] + wq_v * gg.d[p] + wv_q * fd.d[p] + wv_v * gd.d[p];
  }
  const T dr0 = alpha[0] / r0v;
  const T dbeta_q = -2.0 * k / (r0v * r0_sq) * alpha[2];
  const T dbeta_v = -2.0 * alpha[2];

  std::array<T, 6> out{};
  for (int i = 0; i < 3; ++i) {
    out[i] = f.v * wq[i] + fd.v * wv[i] + (dr0 + dbeta_q) * q[i] +
             alpha[1] * v[i];
    out[3 + i] = gg.v * wq[i] + gd.v * wv[i] + alpha[1] * q[i] +
                 dbeta_v * v[i];
  }
  return out;
}

template Stumpff<double> stumpff(const double&);
template Stumpff<DDReal> stumpff(const DDReal&);
template KeplerBodyT<double> kepler_flow(const KeplerBodyT<double>&,
                                         const double&, KeplerSolve<double>*);
template KeplerBodyT<DDReal> kepler_flow(const KeplerBodyT<DDReal>&,
                                         const DDReal&, KeplerSolve<DDReal>*);
template std::array<double, 6> kepler_flow_jacT_apply(
    const KeplerBodyT<double>&, const double&, const std::array<double, 6>&,
    const KeplerSolve<double>*);
template std::array<DDReal, 6> kepler_flow_jacT_apply(
    const KeplerBodyT<DDReal>&, const DDReal&, const std::array<DDReal, 6>&,
    const KeplerSolve<DDReal>*);

}  // namespace fcirk
