#pragma once

// Flow-composed implicit Runge-Kutta integration of  u' = k(u) + g(t, u).
//
// One step of length h from (t_j, u_j):
//   U   = phi_{h/2}(u_j)
//   U  <- U + h sum_i b_i F_i,   F_i = f(t_j + c_i h, W_i),
//          W_i = U + h sum_l a_il F_l
//   u_{j+1} = phi_{h/2}(U)
// where f(t, W) = phi'_tau(W)^{-1} g(t, phi_tau(W)), tau = t - t_j - h/2.
// The inverse Jacobian is applied as J^{-1} phi'^T J, valid because phi is
// symplectic.

#include <span>
#include <vector>

#include "config.hpp"
#include "executor.hpp"
#include "system.hpp"
#include "tableau.hpp"

namespace fcirk {

// F = J^{-1} phi'_{t - t_mid}(U)^T J g(t, phi_{t - t_mid}(U)).
void transformed_rhs(const PerturbedSystem& sys, double t, double t_mid,
                     std::span<const double> u, std::span<double> f,
                     FlowMemo* memo = nullptr);

// Same with the flow time tau = t - t_mid given directly, which avoids the
// cancellation in forming t - t_mid from two large absolute times.
void transformed_rhs_offset(const PerturbedSystem& sys, double t, double tau,
                            std::span<const double> u, std::span<double> f,
                            FlowMemo* memo = nullptr);

// u <- phi_t(u), in double-word for the mixed tier and in double otherwise.
void flow_state(const PerturbedSystem& sys, Precision precision, double t,
                std::span<DDReal> u, FlowMemo* memo = nullptr);

struct StepWork {
  State u;                // transformed state after the increment
  std::vector<double> w;  // s*D stage vectors W_i
  std::vector<double> f;  // s*D stage rates F_i
  int sweeps = 0;
  double residual = 0.0;
  WorkCounters counters;
};

// Solves the stage equations of psi_h at U_in (already half-flowed) and
// applies the increment. z_init, if non-empty, is the initial guess for the
// stage increments W_i - U_in; otherwise they start at zero.
StepWork fixed_point_stages(const PerturbedSystem& sys, const Tableau& tab,
                            const IntegratorConfig& cfg, double t_j,
                            std::span<const DDReal> u_in,
                            Executor* exec = nullptr,
                            std::span<const double> z_init = {});

State fcirk_step(const PerturbedSystem& sys, const Tableau& tab,
                 const IntegratorConfig& cfg, double t_j,
                 std::span<const DDReal> u_j, Executor* exec = nullptr,
                 WorkCounters* counters = nullptr);

// Runs cfg.n_steps steps, calling sink at step 0 and every cfg.m steps.
// Interior half-flows are fused into single h-flows; a sample costs one
// extra phi_{-h/2}. Step failures are rethrown as StepFailure.
IntegrationSummary integrate(const PerturbedSystem& sys, const Tableau& tab,
                             const IntegratorConfig& cfg, double t0,
                             std::span<const DDReal> u0,
                             const SampleSink& sink = {},
                             Executor* exec = nullptr);

// ||step_{-h}(step_h(u)) - u||_inf / ||u||_inf.
double time_symmetry_check(const PerturbedSystem& sys, const Tableau& tab,
                           const IntegratorConfig& cfg,
                           std::span<const DDReal> u, Executor* exec = nullptr);

// Rethrows the active exception as StepFailure carrying the last good step.
[[noreturn]] void rethrow_as_step_failure(double last_good_time,
                                          long long last_good_step);

}  // namespace fcirk
