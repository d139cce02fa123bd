#include "fcirk.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "stage_solver.hpp"

namespace fcirk {
namespace {

void check_dim(const PerturbedSystem& sys, std::size_t n) {
  if (n != static_cast<std::size_t>(sys.dim())) {
    throw InvalidArgument("state has " + std::to_string(n) +
                          " components, system expects " +
                          std::to_string(sys.dim()));
  }
}

// psi_h with the stage memory that persists between steps.
class PsiMap {
 public:
  PsiMap(const PerturbedSystem& sys, const Tableau& tab,
         const IntegratorConfig& cfg, Executor* exec)
      : sys_(sys),
        tab_(tab),
        cfg_(cfg),
        exec_(exec),
        d_(static_cast<std::size_t>(sys.dim())),
        s_(static_cast<std::size_t>(tab.stages())),
        memos_(s_),
        transport_memos_(s_),
        z_(s_ * d_, 0.0),
        f_(s_ * d_, 0.0),
        tau_(s_) {
    for (std::size_t i = 0; i < s_; ++i) {
      const int ii = static_cast<int>(i);
      tau_[i] = ((tab.c(ii) - 0.5) * cfg.h).to_double();
    }
  }

  void set_guess(std::span<const double> z) {
    if (z.empty()) {
      std::fill(z_.begin(), z_.end(), 0.0);
    } else {
      if (z.size() != z_.size()) {
        throw InvalidArgument("stage guess has the wrong size");
      }
      std::copy(z.begin(), z.end(), z_.begin());
    }
  }

  StageSolve apply(double t_j, std::span<DDReal> u, WorkCounters& counters) {
    u_w_ = to_working(u);
    const StageRhs rhs = [&](int i, std::span<const double> w,
                             std::span<double> f) {
      const auto ii = static_cast<std::size_t>(i);
      const double t = t_j + tab_.c_w(i) * cfg_.h;
      transformed_rhs_offset(sys_, t, tau_[ii], w, f, &memos_[ii]);
    };
    const StageSolve solve =
        solve_stages(tab_, cfg_, cfg_.h, u_w_, z_, f_, rhs, exec_);
    const auto evals = static_cast<long long>(s_) * solve.sweeps;
    counters.perturbation_evals += evals;
    counters.rhs_flow_evals += evals;
    counters.jacT_evals += evals;
    counters.fixed_point_sweeps += solve.sweeps;

    const auto delta = stage_increment(tab_, cfg_.h, f_, static_cast<int>(d_));
    increment_.resize(d_);
    for (std::size_t c = 0; c < d_; ++c) increment_[c] = delta[c].value();
    apply_increment(u, delta, cfg_.precision);
    return solve;
  }

  // Initial guess for the next step, whose transformed variables are those
  // of this step pushed through phi_h: W'_i = phi_h(U + p(1 + c_i)), with p
  // the collocation polynomial of this step. u_next = phi_h(U + increment).
  void transport(std::span<const DDReal> u_next, WorkCounters& counters) {
    if (cfg_.init_mode == StageInit::kZero) {
      std::fill(z_.begin(), z_.end(), 0.0);
      return;
    }
    std::vector<double> p(z_);
    extrapolate_stages(tab_, p, std::vector<double>(d_, 0.0),
                       static_cast<int>(d_));
    const std::vector<double> next_w = to_working(u_next);
    parallel_for(exec_, s_, [&](std::size_t i) {
      std::vector<double> x(d_), y(d_);
      for (std::size_t c = 0; c < d_; ++c) x[c] = u_w_[c] + p[i * d_ + c];
      sys_.flow(cfg_.h, x, y, &transport_memos_[i]);
      for (std::size_t c = 0; c < d_; ++c) z_[i * d_ + c] = y[c] - next_w[c];
    });
    counters.rhs_flow_evals += static_cast<long long>(s_);
  }

  const std::vector<double>& u_w() const { return u_w_; }
  const std::vector<double>& z() const { return z_; }
  const std::vector<double>& f() const { return f_; }

 private:
  const PerturbedSystem& sys_;
  const Tableau& tab_;
  const IntegratorConfig& cfg_;
  Executor* exec_;
  std::size_t d_, s_;
  std::vector<FlowMemo> memos_;
  std::vector<FlowMemo> transport_memos_;
  std::vector<double> z_, f_, tau_;
  std::vector<double> u_w_, increment_;
};

}  // namespace

void transformed_rhs_offset(const PerturbedSystem& sys, double t, double tau,
                            std::span<const double> u, std::span<double> f,
                            FlowMemo* memo) {
  const std::size_t d = u.size();
  thread_local std::vector<double> x, r, w, wt;
  x.resize(d);
  r.resize(d);
  w.resize(d);
  wt.resize(d);
  sys.flow(tau, u, x, memo);
  sys.perturbation(t, x, r);
  sys.structure_apply(r, w);
  sys.flow_jacT_apply(tau, u, w, wt, memo);
  sys.structure_solve(wt, f);
}

void transformed_rhs(const PerturbedSystem& sys, double t, double t_mid,
                     std::span<const double> u, std::span<double> f,
                     FlowMemo* memo) {
  transformed_rhs_offset(sys, t, t - t_mid, u, f, memo);
}

void flow_state(const PerturbedSystem& sys, Precision precision, double t,
                std::span<DDReal> u, FlowMemo* memo) {
  if (precision == Precision::kMixed) {
    const State in(u.begin(), u.end());
    sys.flow(DDReal(t), in, u, memo);
    return;
  }
  const std::vector<double> in = to_working(u);
  std::vector<double> out(in.size());
  sys.flow(t, in, out, memo);
  for (std::size_t c = 0; c < out.size(); ++c) u[c] = DDReal(out[c]);
}

StepWork fixed_point_stages(const PerturbedSystem& sys, const Tableau& tab,
                            const IntegratorConfig& cfg, double t_j,
                            std::span<const DDReal> u_in, Executor* exec,
                            std::span<const double> z_init) {
  validate(cfg);
  check_dim(sys, u_in.size());
  PsiMap psi(sys, tab, cfg, exec);
  psi.set_guess(z_init);
  StepWork work;
  work.u.assign(u_in.begin(), u_in.end());
  const StageSolve solve = psi.apply(t_j, work.u, work.counters);
  work.sweeps = solve.sweeps;
  work.residual = solve.residual;
  work.f = psi.f();
  work.w = psi.z();
  const auto d = u_in.size();
  for (std::size_t k = 0; k < work.w.size(); ++k) work.w[k] += psi.u_w()[k % d];
  return work;
}

State fcirk_step(const PerturbedSystem& sys, const Tableau& tab,
                 const IntegratorConfig& cfg, double t_j,
                 std::span<const DDReal> u_j, Executor* exec,
                 WorkCounters* counters) {
  validate(cfg);
  check_dim(sys, u_j.size());
  WorkCounters local;
  State u(u_j.begin(), u_j.end());
  FlowMemo half_memo;
  PsiMap psi(sys, tab, cfg, exec);
  flow_state(sys, cfg.precision, 0.5 * cfg.h, u, &half_memo);
  psi.apply(t_j, u, local);
  flow_state(sys, cfg.precision, 0.5 * cfg.h, u, &half_memo);
  local.flow_evals += 2;
  local.steps += 1;
  if (counters != nullptr) *counters += local;
  return u;
}

IntegrationSummary integrate(const PerturbedSystem& sys, const Tableau& tab,
                             const IntegratorConfig& cfg, double t0,
                             std::span<const DDReal> u0,
                             const SampleSink& sink, Executor* exec) {
  validate(cfg);
  check_dim(sys, u0.size());
  IntegrationSummary summary;
  WorkCounters& counters = summary.counters;
  State u(u0.begin(), u0.end());
  if (sink) sink(Sample{0, t0, u, counters});
  if (cfg.n_steps == 0) {
    summary.final_state = u;
    summary.t_final = t0;
    return summary;
  }

  const double h = cfg.h;
  FlowMemo half_memo, full_memo, back_memo;
  PsiMap psi(sys, tab, cfg, exec);
  long long j = 0;
  try {
    flow_state(sys, cfg.precision, 0.5 * h, u, &half_memo);
    ++counters.flow_evals;
    for (j = 1; j <= cfg.n_steps; ++j) {
      psi.apply(step_time(t0, j - 1, h), u, counters);
      ++counters.steps;
      if (j == cfg.n_steps) {
        flow_state(sys, cfg.precision, 0.5 * h, u, &half_memo);
        ++counters.flow_evals;
        if (sink && j % cfg.m == 0) {
          sink(Sample{j, step_time(t0, j, h), u, counters});
        }
        break;
      }
      flow_state(sys, cfg.precision, h, u, &full_memo);
      ++counters.flow_evals;
      psi.transport(u, counters);
      if (sink && j % cfg.m == 0) {
        State out = u;
        flow_state(sys, cfg.precision, -0.5 * h, out, &back_memo);
        ++counters.flow_evals;
        sink(Sample{j, step_time(t0, j, h), out, counters});
      }
    }
  } catch (...) {
    rethrow_as_step_failure(step_time(t0, j > 0 ? j - 1 : 0, h),
                            j > 0 ? j - 1 : 0);
  }
  summary.final_state = std::move(u);
  summary.t_final = step_time(t0, cfg.n_steps, h);
  summary.steps = cfg.n_steps;
  return summary;
}

double time_symmetry_check(const PerturbedSystem& sys, const Tableau& tab,
                           const IntegratorConfig& cfg,
                           std::span<const DDReal> u, Executor* exec) {
  IntegratorConfig back = cfg;
  back.h = -cfg.h;
  const State once = fcirk_step(sys, tab, cfg, 0.0, u, exec);
  const State twice = fcirk_step(sys, tab, back, cfg.h, once, exec);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t c = 0; c < u.size(); ++c) {
    num = std::max(num, std::abs((twice[c] - u[c]).to_double()));
    den = std::max(den, std::abs(u[c].to_double()));
  }
  return den > 0.0 ? num / den : num;
}

void rethrow_as_step_failure(double last_good_time, long long last_good_step) {
  try {
    throw;
  } catch (const StepFailure&) {
    throw;
  } catch (const Error& e) {
    throw StepFailure(e.code(), e.what(), last_good_time, last_good_step);
  }
}

}  // namespace fcirk
