#pragma once

#include <string>
#include <vector>

#include "xprec.hpp"

namespace fcirk {

// Butcher tableau of an s-stage Runge-Kutta scheme. Coefficients are stored
// in double-word precision; rounded working-precision copies are kept for
// the stage iterations.
class Tableau {
 public:
  // Validates c_i = sum_j a_ij, sum_i b_i = 1 and strictly increasing nodes.
  // `a` is row-major s*s.
  static Tableau from_coefficients(std::vector<DDReal> a, std::vector<DDReal> b,
                                   std::vector<DDReal> c,
                                   double tolerance = 1e-14);

  int stages() const { return s_; }

  DDReal a(int i, int j) const { return a_[index(i, j)]; }
  DDReal b(int i) const { return b_[static_cast<std::size_t>(i)]; }
  DDReal c(int i) const { return c_[static_cast<std::size_t>(i)]; }

  double a_w(int i, int j) const { return a_w_[index(i, j)]; }
  double b_w(int i) const { return b_w_[static_cast<std::size_t>(i)]; }
  double c_w(int i) const { return c_w_[static_cast<std::size_t>(i)]; }

  // mu_ij = a_ij / b_j in working precision, so that stage increments read
  // Z_i = sum_j mu_ij L_j with L_j = (h b_j) F_j. Where the scheme is
  // symplectic the pairs satisfy mu_ij + mu_ji = 1 exactly in double, which
  // keeps the rounded scheme symplectic. Empty if some b_j is zero.
  bool has_mu() const { return !mu_w_.empty(); }
  double mu_w(int i, int j) const { return mu_w_[index(i, j)]; }

  // Lagrange weights that extrapolate the collocation polynomial through
  // (0, 0), (c_l, Z_l) to 1 + c_i: p(1 + c_i) = sum_l extrapolation(i, l) Z_l.
  double extrapolation(int i, int l) const { return extrap_[index(i, l)]; }

 private:
  Tableau(int s, std::vector<DDReal> a, std::vector<DDReal> b,
          std::vector<DDReal> c);

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(s_) +
           static_cast<std::size_t>(j);
  }

  int s_;
  std::vector<DDReal> a_, b_, c_;
  std::vector<double> a_w_, b_w_, c_w_, mu_w_;
  std::vector<double> extrap_;
};

inline constexpr int kMaxGaussStages = 32;

// s-stage Gauss-Legendre collocation tableau, 1 <= s <= 32. Generated once
// per s and cached; the returned reference stays valid for the program's
// lifetime.
const Tableau& gauss_legendre_tableau(int s);

// max_{i,j} |b_i a_ij + b_j a_ji - b_i b_j|, evaluated in double-word.
double symplecticity_residual(const Tableau& t);

// max over the time-symmetry conditions
//   |b_{s+1-i} - b_i|, |c_{s+1-i} - (1 - c_i)|, |a_{s+1-i,s+1-j} + a_ij - b_j|.
double symmetry_residual(const Tableau& t);

// One row per stage: c_i, b_i, a_i1..a_is with 36 significant digits.
std::string tableau_to_csv(const Tableau& t);

}  // namespace fcirk
