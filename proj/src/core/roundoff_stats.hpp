#pragma once

// Ensemble measurement of round-off propagation in conserved quantities.
// P copies of the initial state, each component scaled by 1 + scale * xi
// with xi uniform in [-1, 1], are integrated; the relative error of the
// invariant is averaged over members at every sample time.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "config.hpp"
#include "executor.hpp"
#include "nbody.hpp"

namespace fcirk {

enum class Quantity { kEnergy, kAngularMomentumNorm };

struct EnsembleConfig {
  int P = 100;
  double perturb_scale = 1e-6;
  std::vector<double> h_list;
  double T = 0.0;
  long long m = 1;  // sample every m steps
  std::uint64_t seed = 0;
  Quantity quantity = Quantity::kAngularMomentumNorm;
};

struct RandomWalkFit {
  double exponent = 0.0;
  double amplitude = 0.0;
};

struct EnsembleReport {
  Quantity quantity = Quantity::kEnergy;
  double h = 0.0;
  int members = 0;  // members that finished
  std::vector<double> t, mu, sigma;
  std::vector<int> failed_members;
  std::vector<std::string> failure_messages;
  std::optional<RandomWalkFit> fit;
};

// Integrates one trajectory from u0 with step h for n_steps steps, calling
// sink at step 0 and every m steps.
using TrajectoryRunner =
    std::function<void(std::span<const DDReal> u0, double h, long long n_steps,
                       long long m, const SampleSink& sink)>;

// Deterministic member perturbation of u0.
State perturb_member(std::span<const DDReal> u0, double scale,
                     std::uint64_t seed, int member);

// Relative invariant error I(u)/I(u_ref) - 1, evaluated in double-word.
double relative_invariant_error(const NBodyModel& model, Quantity quantity,
                                std::span<const DDReal> u,
                                std::span<const DDReal> u_ref);

// One report per step size in ec.h_list. Members run concurrently on exec;
// results do not depend on the number of threads.
std::vector<EnsembleReport> run_ensemble(const NBodyModel& model,
                                         std::span<const DDReal> u0,
                                         const TrajectoryRunner& runner,
                                         const EnsembleConfig& ec,
                                         Executor* exec = nullptr);

// Least-squares fit of log sigma against log t over t >= t_max / 2.
// Needs at least 10 sample times with sigma > 0, else DomainError.
RandomWalkFit random_walk_fit(const EnsembleReport& report);

// "t,mu,sigma" with 17 significant digits.
std::string report_to_csv(const EnsembleReport& report);

}  // namespace fcirk
