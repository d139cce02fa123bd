#pragma once

// Fixed-point iteration for the stage equations of an implicit RK step,
//   Z_i = h sum_l a_il F_l(U + Z_l),  i = 1..s,
// shared by every integrator family in the library. Stage vectors are
// stored as increments Z_i = W_i - U, flat s*D row-major.

#include <functional>
#include <span>
#include <vector>

#include "config.hpp"
#include "executor.hpp"
#include "tableau.hpp"

namespace fcirk {

// Writes F = rate of stage i evaluated at the stage state W.
using StageRhs =
    std::function<void(int i, std::span<const double> w, std::span<double> f)>;

// Optional second half-sweep for partitioned iterations: components with
// mask[c] != 0 are recomputed from `rate` after the other components have
// been updated.
struct StagePartition {
  std::vector<unsigned char> mask;
  StageRhs rate;
};

struct StageSolve {
  int sweeps = 0;
  double residual = 0.0;  // max |dZ| of the last sweep
};

// Iterates until the configured stopping rule holds. On entry Z holds the
// initial guess; on exit Z holds the last iterate and F the rates that
// produced it. Throws NonConvergenceError past cfg.fp_max_iters sweeps, or
// when the iteration stagnates at a correction larger than cfg.fp_tol
// relative to the state.
StageSolve solve_stages(const Tableau& tab, const IntegratorConfig& cfg,
                        double h, std::span<const double> u,
                        std::span<double> z, std::span<double> f,
                        const StageRhs& rhs, Executor* exec,
                        const StagePartition* partition = nullptr);

// delta_c = sum_i (h b_i) F_ic with compensated summation.
std::vector<CompensatedAccumulator> stage_increment(const Tableau& tab,
                                                    double h,
                                                    std::span<const double> f,
                                                    int dim);

// u += delta: error-free in the mixed tier, rounded to double otherwise.
void apply_increment(std::span<DDReal> u,
                     std::span<const CompensatedAccumulator> delta,
                     Precision precision);

// Initial guess for the next step in the same variables: the collocation
// polynomial through (0, 0), (c_l, Z_l) evaluated at 1 + c_i, minus the
// accepted increment. Result written over z.
void extrapolate_stages(const Tableau& tab, std::span<double> z,
                        std::span<const double> increment, int dim);

}  // namespace fcirk
