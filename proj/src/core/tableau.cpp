#include "tableau.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <sstream>

#include <mpfr.h>

namespace fcirk {
namespace {

// Generation runs in 256-bit binary floating point; every entry is then
// rounded once to double-word, so all entries are correctly rounded to
// about 2^-106 relative.
constexpr mpfr_prec_t kGenerationBits = 256;

class Wide {
 public:
  Wide() { mpfr_init2(v_, kGenerationBits); mpfr_set_zero(v_, 1); }
  explicit Wide(double x) { mpfr_init2(v_, kGenerationBits); mpfr_set_d(v_, x, MPFR_RNDN); }
  Wide(const Wide& o) { mpfr_init2(v_, kGenerationBits); mpfr_set(v_, o.v_, MPFR_RNDN); }
  Wide& operator=(const Wide& o) {
    mpfr_set(v_, o.v_, MPFR_RNDN);
    return *this;
  }
  ~Wide() { mpfr_clear(v_); }

  friend Wide operator+(const Wide& a, const Wide& b) { Wide r; mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN); return r; }
  friend Wide operator-(const Wide& a, const Wide& b) { Wide r; mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN); return r; }
  friend Wide operator*(const Wide& a, const Wide& b) { Wide r; mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN); return r; }
  friend Wide operator/(const Wide& a, const Wide& b) { Wide r; mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN); return r; }

  static Wide cos_pi_fraction(double num, double den) {
    Wide r;
    mpfr_const_pi(r.v_, MPFR_RNDN);
    r = r * Wide(num) / Wide(den);
    mpfr_cos(r.v_, r.v_, MPFR_RNDN);
    return r;
  }

  // Exponent of the value (log2 magnitude), very negative for zero.
  long exponent() const {
    return mpfr_zero_p(v_) ? -100000 : static_cast<long>(mpfr_get_exp(v_));
  }

  DDReal to_dd() const {
    const double hi = mpfr_get_d(v_, MPFR_RNDN);
    Wide rest;
    mpfr_sub_d(rest.v_, v_, hi, MPFR_RNDN);
    return {hi, mpfr_get_d(rest.v_, MPFR_RNDN)};
  }

 private:
  mpfr_t v_;
};

struct LegendreValue {
  Wide p;   // P_n(x)
  Wide dp;  // P_n'(x)
};

// Three-term recurrence, derivative from P_n and P_{n-1}.
LegendreValue legendre(int n, const Wide& x) {
  Wide p_prev(1.0);
  Wide p = x;
  for (int k = 1; k < n; ++k) {
    const Wide next = (Wide(2.0 * k + 1) * x * p - Wide(k) * p_prev) / Wide(k + 1.0);
    p_prev = p;
    p = next;
  }
  const Wide dp = Wide(n) * (x * p - p_prev) / (x * x - Wide(1.0));
  return {p, dp};
}

// Positive root number i (0-based, descending) of P_n.
Wide legendre_root(int n, int i) {
  // Tricomi-style initial guess, then Newton to full width.
  Wide x = Wide::cos_pi_fraction(i + 0.75, n + 0.5);
  for (int it = 0; it < 100; ++it) {
    const LegendreValue v = legendre(n, x);
    const Wide dx = v.p / v.dp;
    x = x - dx;
    if (dx.exponent() < -static_cast<long>(kGenerationBits) + 8) break;
  }
  return x;
}

Tableau build_gauss(int s) {
  const auto n = static_cast<std::size_t>(s);
  std::vector<Wide> c(n), b(n);

  // Nodes in ascending order c_i = (1 - x_i) / 2 with x_i descending.
  for (int i = 0; i < s / 2; ++i) {
    const Wide x = legendre_root(s, i);
    const LegendreValue v = legendre(s, x);
    const Wide w = Wide(1.0) / ((Wide(1.0) - x * x) * v.dp * v.dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(s - 1 - i);
    c[lo] = (Wide(1.0) - x) * Wide(0.5);
    c[hi] = (Wide(1.0) + x) * Wide(0.5);
    b[lo] = w;
    b[hi] = w;
  }
  if (s % 2 == 1) {
    const auto mid = static_cast<std::size_t>(s / 2);
    const LegendreValue v = legendre(s, Wide(0.0));
    c[mid] = Wide(0.5);
    b[mid] = Wide(1.0) / (v.dp * v.dp);
  }

  // a_ij = int_0^{c_i} l_j(tau) dtau. The integrand has degree s - 1, so the
  // s-point Gauss rule mapped to [0, c_i] integrates it exactly.
  std::vector<Wide> denom(n, Wide(1.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t m = 0; m < n; ++m) {
      if (m != j) denom[j] = denom[j] * (c[j] - c[m]);
    }
  }
  auto lagrange = [&](std::size_t j, const Wide& x) {
    Wide prod(1.0);
    for (std::size_t m = 0; m < n; ++m) {
      if (m != j) prod = prod * (x - c[m]);
    }
    return prod / denom[j];
  };

  std::vector<DDReal> a(n * n), bd(n), cd(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Wide acc(0.0);
      for (std::size_t k = 0; k < n; ++k) {
        acc = acc + b[k] * lagrange(j, c[i] * c[k]);
      }
      a[i * n + j] = (c[i] * acc).to_dd();
    }
    bd[i] = b[i].to_dd();
    cd[i] = c[i].to_dd();
  }
  return Tableau::from_coefficients(std::move(a), std::move(bd), std::move(cd),
                                    1e-28);
}

}  // namespace

Tableau::Tableau(int s, std::vector<DDReal> a, std::vector<DDReal> b,
                 std::vector<DDReal> c)
    : s_(s), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  const auto n = static_cast<std::size_t>(s_);
  a_w_.resize(n * n);
  b_w_.resize(n);
  c_w_.resize(n);
  for (std::size_t k = 0; k < n * n; ++k) a_w_[k] = a_[k].to_double();
  for (std::size_t k = 0; k < n; ++k) {
    b_w_[k] = b_[k].to_double();
    c_w_[k] = c_[k].to_double();
  }

  const bool all_weights = std::all_of(b_.begin(), b_.end(),
                                       [](const DDReal& x) { return x.hi != 0.0; });
  if (all_weights) {
    std::vector<DDReal> mu(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) mu[i * n + j] = a_[i * n + j] / b_[j];
    }
    mu_w_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const DDReal& ij = mu[i * n + j];
        const DDReal& ji = mu[j * n + i];
        if (abs(ij + ji - 1.0).hi > 1e-24) {
          mu_w_[i * n + j] = ij.to_double();
          mu_w_[j * n + i] = ji.to_double();
          continue;
        }
        // Round the member >= 1/2; 1 - x is then exact.
        const bool first = ij.hi >= 0.5;
        const double x = (first ? ij : ji).to_double();
        mu_w_[first ? i * n + j : j * n + i] = x;
        mu_w_[first ? j * n + i : i * n + j] = 1.0 - x;
      }
    }
  }

  // Extrapolation through nodes {0, c_1, .., c_s}; the node at 0 carries a
  // zero value so only the c_l weights are kept.
  extrap_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const DDReal x = 1.0 + c_[i];
    for (std::size_t l = 0; l < n; ++l) {
      DDReal num = x;  // factor for the node at 0
      DDReal den = c_[l];
      for (std::size_t m = 0; m < n; ++m) {
        if (m == l) continue;
        num = num * (x - c_[m]);
        den = den * (c_[l] - c_[m]);
      }
      if (den.hi == 0.0) {
        extrap_[i * n + l] = 0.0;  // degenerate node at 0 (explicit schemes)
      } else {
        extrap_[i * n + l] = (num / den).to_double();
      }
    }
  }
}

Tableau Tableau::from_coefficients(std::vector<DDReal> a, std::vector<DDReal> b,
                                   std::vector<DDReal> c, double tolerance) {
  const std::size_t n = b.size();
  if (n == 0) throw DomainError("tableau needs at least one stage");
  if (c.size() != n || a.size() != n * n) {
    throw DomainError("tableau arrays have inconsistent sizes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    DDReal row(0.0);
    for (std::size_t j = 0; j < n; ++j) row = row + a[i * n + j];
    if (std::abs((row - c[i]).hi) > tolerance) {
      throw DomainError("tableau row " + std::to_string(i + 1) +
                        ": c_i differs from sum_j a_ij");
    }
  }
  DDReal total(0.0);
  for (const DDReal& bi : b) total = total + bi;
  if (std::abs((total - 1.0).hi) > tolerance) {
    throw DomainError("tableau weights do not sum to one");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(c[i - 1] < c[i])) {
      throw DomainError("tableau nodes are not strictly increasing");
    }
  }
  return Tableau(static_cast<int>(n), std::move(a), std::move(b), std::move(c));
}

const Tableau& gauss_legendre_tableau(int s) {
  if (s < 1 || s > kMaxGaussStages) {
    throw DomainError("Gauss-Legendre stage count must be in [1, 32], got " +
                      std::to_string(s));
  }
  static std::mutex mutex;
  static std::array<std::unique_ptr<const Tableau>, kMaxGaussStages + 1> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[static_cast<std::size_t>(s)];
  if (!slot) slot = std::make_unique<const Tableau>(build_gauss(s));
  return *slot;
}

double symplecticity_residual(const Tableau& t) {
  const int s = t.stages();
  double worst = 0.0;
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      const DDReal r = t.b(i) * t.a(i, j) + t.b(j) * t.a(j, i) - t.b(i) * t.b(j);
      worst = std::max(worst, std::abs(r.to_double()));
    }
  }
  return worst;
}

double symmetry_residual(const Tableau& t) {
  const int s = t.stages();
  double worst = 0.0;
  for (int i = 0; i < s; ++i) {
    const int ri = s - 1 - i;
    worst = std::max(worst, std::abs((t.b(ri) - t.b(i)).to_double()));
    worst = std::max(worst, std::abs((t.c(ri) - (1.0 - t.c(i))).to_double()));
    for (int j = 0; j < s; ++j) {
      const int rj = s - 1 - j;
      const DDReal r = t.a(ri, rj) + t.a(i, j) - t.b(j);
      worst = std::max(worst, std::abs(r.to_double()));
    }
  }
  return worst;
}

std::string tableau_to_csv(const Tableau& t) {
  std::ostringstream out;
  const int s = t.stages();
  out << "c,b";
  for (int j = 0; j < s; ++j) out << ",a" << (j + 1);
  out << '\n';
  for (int i = 0; i < s; ++i) {
    out << to_string(t.c(i), 36) << ',' << to_string(t.b(i), 36);
    for (int j = 0; j < s; ++j) out << ',' << to_string(t.a(i, j), 36);
    out << '\n';
  }
  return out.str();
}

}  // namespace fcirk
