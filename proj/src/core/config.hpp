#pragma once

#include <functional>
#include <span>
#include <vector>

#include "xprec.hpp"

namespace fcirk {

enum class Precision {
  kWorking,  // state, flows and stages all in double
  kMixed,    // state and flows in double-word, stages in double
};

enum class StageInit {
  kZero,                   // W_i = U at the start of every step
  kPreviousInterpolation,  // extrapolate the previous step's collocation polynomial
};

enum class StopRule {
  kStagnation,  // stop once no stage component improves between sweeps
  kAbsolute,    // stop once max |dZ| <= fp_tol * scale
};

struct IntegratorConfig {
  double h = 0.0;
  long long n_steps = 0;
  long long m = 1;  // output every m steps
  int fp_max_iters = 100;
  // Stagnation: upper bound on the relative size of the last correction
  // (larger means the iteration stalled away from a fixed point).
  // Absolute: the stopping tolerance itself.
  double fp_tol = 1e-8;
  StopRule stop_rule = StopRule::kStagnation;
  StageInit init_mode = StageInit::kPreviousInterpolation;
  Precision precision = Precision::kMixed;
  // Plain IRK only: alternate velocity and position updates within a sweep.
  bool partitioned = false;
};

// Throws InvalidArgument on an unusable configuration.
void validate(const IntegratorConfig& cfg);

struct WorkCounters {
  long long perturbation_evals = 0;
  long long flow_evals = 0;      // flows applied to the integrator state
  long long rhs_flow_evals = 0;  // flows inside stage evaluations
  long long jacT_evals = 0;
  long long fixed_point_sweeps = 0;
  long long steps = 0;

  WorkCounters& operator+=(const WorkCounters& o) {
    perturbation_evals += o.perturbation_evals;
    flow_evals += o.flow_evals;
    rhs_flow_evals += o.rhs_flow_evals;
    jacT_evals += o.jacT_evals;
    fixed_point_sweeps += o.fixed_point_sweeps;
    steps += o.steps;
    return *this;
  }
};

using State = std::vector<DDReal>;

struct Sample {
  long long step;
  double t;
  std::span<const DDReal> u;
  const WorkCounters& counters;
};

using SampleSink = std::function<void(const Sample&)>;

struct IntegrationSummary {
  State final_state;
  double t_final = 0.0;
  long long steps = 0;
  WorkCounters counters;
};

inline std::vector<double> to_working(std::span<const DDReal> u) {
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i].to_double();
  return out;
}

inline State to_state(std::span<const double> u) {
  return State(u.begin(), u.end());
}

// t0 + j h, rounded once.
inline double step_time(double t0, long long j, double h) {
  return (DDReal(t0) + two_prod(static_cast<double>(j), h)).to_double();
}

}  // namespace fcirk
