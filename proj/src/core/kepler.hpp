#pragma once

// Exact flow of the Kepler problem  q'' = -k q / |q|^3  in Cartesian
// coordinates, for any conic, via universal variables. Both precision tiers
// (double, DDReal) are supported.

#include <array>

#include "xprec.hpp"

namespace fcirk {

template <class T>
using Vec3 = std::array<T, 3>;

template <class T>
struct KeplerBodyT {
  Vec3<T> q{};  // position
  Vec3<T> v{};  // velocity
  T k{};        // gravitational parameter G (m0 + m_i)
};

using KeplerBody = KeplerBodyT<double>;
using KeplerBodyDD = KeplerBodyT<DDReal>;

// Converged state of the universal Kepler equation for one (body, t) pair.
// Passed to kepler_flow it is a warm start and is overwritten with the new
// solution; passed to kepler_flow_jacT_apply it is trusted to be the solution
// for exactly the same inputs.
template <class T>
struct KeplerSolve {
  T s{};                   // universal anomaly
  long long periods = 0;   // whole periods removed from t (elliptic only)
  int iterations = 0;
  bool valid = false;
};

// Argument below which the Stumpff functions are summed directly; larger
// arguments are quartered until below it and rebuilt with the doubling
// identities.
inline constexpr double kStumpffSeriesThreshold = 0.1;

template <class T>
struct Stumpff {
  T c0, c1, c2, c3;
};

template <class T>
Stumpff<T> stumpff(const T& z);

// Propagates (q, v) by time t. Errors: SingularityError if |q| = 0 or the
// trajectory passes through the origin; SolverError if the universal
// anomaly cannot be found.
template <class T>
KeplerBodyT<T> kepler_flow(const KeplerBodyT<T>& body, const T& t,
                           KeplerSolve<T>* memo = nullptr);

// Returns phi_t'(q, v)^T w for the 6-vector w = (w_q, w_v).
template <class T>
std::array<T, 6> kepler_flow_jacT_apply(const KeplerBodyT<T>& body, const T& t,
                                        const std::array<T, 6>& w,
                                        const KeplerSolve<T>* memo = nullptr);

extern template Stumpff<double> stumpff(const double&);
extern template Stumpff<DDReal> stumpff(const DDReal&);
extern template KeplerBodyT<double> kepler_flow(const KeplerBodyT<double>&,
                                                const double&,
                                                KeplerSolve<double>*);
extern template KeplerBodyT<DDReal> kepler_flow(const KeplerBodyT<DDReal>&,
                                                const DDReal&,
                                                KeplerSolve<DDReal>*);
extern template std::array<double, 6> kepler_flow_jacT_apply(
    const KeplerBodyT<double>&, const double&, const std::array<double, 6>&,
    const KeplerSolve<double>*);
extern template std::array<DDReal, 6> kepler_flow_jacT_apply(
    const KeplerBodyT<DDReal>&, const DDReal&, const std::array<DDReal, 6>&,
    const KeplerSolve<DDReal>*);

}  // namespace fcirk
