#pragma once

// Double-word ("double-double") arithmetic and compensated accumulation.
//
// A DDReal represents hi + lo exactly, with |lo| <= ulp(hi)/2 after every
// normalizing operation. That gives roughly 106 significand bits, which is
// the higher precision tier used for the unperturbed flows and for carrying
// the integrator state between steps.
//
// The algorithms are the classic error-free transformations (Knuth two-sum,
// Dekker/FMA two-product) in the formulation popularized by the QD library.
// They require round-to-nearest and no floating-point contraction.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace fcirk {

// Which arithmetic a pipeline stage runs in.
enum class PrecisionTier { kWorking, kDoubleWord };

struct DDReal {
  double hi = 0.0;
  double lo = 0.0;

  constexpr DDReal() = default;
  constexpr DDReal(double x) : hi(x), lo(0.0) {}  // NOLINT(google-explicit-constructor)
  constexpr DDReal(double h, double l) : hi(h), lo(l) {}

  // Rounds to the nearest working-precision value.
  constexpr double to_double() const { return hi + lo; }
};

// ---------------------------------------------------------------------------
// Error-free transformations on two working-precision numbers.

inline DDReal two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

// Requires |a| >= |b| (or a == 0).
inline DDReal quick_two_sum(double a, double b) {
  const double s = a + b;
  return {s, b - (s - a)};
}

inline DDReal two_prod(double a, double b) {
  const double p = a * b;
#if defined(__FMA__)
  return {p, std::fma(a, b, -p)};
#else
  constexpr double kSplitter = 134217729.0;  // 2^27 + 1
  double t = kSplitter * a;
  const double a_hi = t - (t - a);
  const double a_lo = a - a_hi;
  t = kSplitter * b;
  const double b_hi = t - (t - b);
  const double b_lo = b - b_hi;
  return {p, ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo};
#endif
}

// ---------------------------------------------------------------------------
// DDReal arithmetic.

inline DDReal operator-(DDReal x) { return {-x.hi, -x.lo}; }

inline DDReal operator+(DDReal x, DDReal y) {
  DDReal s = two_sum(x.hi, y.hi);
  const DDReal t = two_sum(x.lo, y.lo);
  s.lo += t.hi;
  s = quick_two_sum(s.hi, s.lo);
  s.lo += t.lo;
  return quick_two_sum(s.hi, s.lo);
}

inline DDReal operator+(DDReal x, double y) {
  DDReal s = two_sum(x.hi, y);
  s.lo += x.lo;
  return quick_two_sum(s.hi, s.lo);
}
inline DDReal operator+(double x, DDReal y) { return y + x; }

inline DDReal operator-(DDReal x, DDReal y) { return x + (-y); }
inline DDReal operator-(DDReal x, double y) { return x + (-y); }
inline DDReal operator-(double x, DDReal y) { return (-y) + x; }

inline DDReal operator*(DDReal x, DDReal y) {
  DDReal p = two_prod(x.hi, y.hi);
  p.lo += x.hi * y.lo + x.lo * y.hi;
  return quick_two_sum(p.hi, p.lo);
}

inline DDReal operator*(DDReal x, double y) {
  DDReal p = two_prod(x.hi, y);
  p.lo += x.lo * y;
  return quick_two_sum(p.hi, p.lo);
}
inline DDReal operator*(double x, DDReal y) { return y * x; }

inline DDReal operator/(DDReal x, DDReal y) {
  if (y.hi == 0.0) throw DomainError("double-word division by zero");
  const double q1 = x.hi / y.hi;
  DDReal r = x - y * q1;
  const double q2 = r.hi / y.hi;
  r = r - y * q2;
  const double q3 = r.hi / y.hi;
  return quick_two_sum(q1, q2) + q3;
}

inline DDReal operator/(DDReal x, double y) { return x / DDReal(y); }
inline DDReal operator/(double x, DDReal y) { return DDReal(x) / y; }

inline DDReal& operator+=(DDReal& x, DDReal y) { return x = x + y; }
inline DDReal& operator-=(DDReal& x, DDReal y) { return x = x - y; }
inline DDReal& operator*=(DDReal& x, DDReal y) { return x = x * y; }
inline DDReal& operator/=(DDReal& x, DDReal y) { return x = x / y; }

inline bool operator==(DDReal x, DDReal y) {
  return x.hi == y.hi && x.lo == y.lo;
}
inline bool operator!=(DDReal x, DDReal y) { return !(x == y); }
inline bool operator<(DDReal x, DDReal y) {
  return x.hi < y.hi || (x.hi == y.hi && x.lo < y.lo);
}
inline bool operator>(DDReal x, DDReal y) { return y < x; }
inline bool operator<=(DDReal x, DDReal y) { return !(y < x); }
inline bool operator>=(DDReal x, DDReal y) { return !(x < y); }

inline DDReal abs(DDReal x) { return x.hi < 0.0 ? -x : x; }

inline DDReal sqrt(DDReal x) {
  if (x.hi < 0.0) throw DomainError("double-word sqrt of negative value");
  if (x.hi == 0.0) return {};
  const double inv = 1.0 / std::sqrt(x.hi);
  const double ax = x.hi * inv;
  const DDReal ax2 = two_prod(ax, ax);
  const double corr = (x - ax2).hi * (inv * 0.5);
  return two_sum(ax, corr);
}

inline DDReal square(DDReal x) { return x * x; }

// Named forms of the arithmetic.
inline DDReal dd_add(DDReal x, DDReal y) { return x + y; }
inline DDReal dd_mul(DDReal x, DDReal y) { return x * y; }
inline DDReal dd_div(DDReal x, DDReal y) { return x / y; }
inline DDReal dd_sqrt(DDReal x) { return sqrt(x); }

// Spacing of the double-word format around x: ulp(hi) * 2^-53.
inline double dd_ulp(DDReal x) {
  const double h = std::abs(x.hi);
  if (h == 0.0) return std::numeric_limits<double>::denorm_min();
  const double ulp_hi = std::nextafter(h, INFINITY) - h;
  return std::ldexp(ulp_hi, -53);
}

// 10^n to double-word accuracy.
DDReal dd_pow10(int n);

constexpr DDReal kDDPi{3.141592653589793116e+00, 1.224646799147353207e-16};

// Decimal conversions. Formatting gives `digits` significant digits in
// scientific notation; parsing accepts the usual floating literal syntax.
std::string to_string(DDReal x, int digits = 34);
DDReal dd_from_string(std::string_view text);

// Uniform access to the working-precision value of a scalar.
inline double value_of(double x) { return x; }
inline double value_of(DDReal x) { return x.hi; }

// Rounding between tiers.
inline double to_working(double x) { return x; }
inline double to_working(DDReal x) { return x.to_double(); }

// ---------------------------------------------------------------------------
// Compensated accumulation.
//
// Each add captures the rounding error of the running sum exactly (two-sum)
// and folds it into `carry`, so the accumulated error does not grow with the
// number of terms.
struct CompensatedAccumulator {
  double sum = 0.0;
  double carry = 0.0;

  void add(double term) {
    const DDReal t = two_sum(sum, term);
    sum = t.hi;
    carry += t.lo;
  }

  double value() const { return sum + carry; }
  DDReal as_dd() const { return two_sum(sum, carry); }
};

inline CompensatedAccumulator comp_accumulate(CompensatedAccumulator acc,
                                              double term) {
  acc.add(term);
  return acc;
}

}  // namespace fcirk
