#pragma once

// Reference integrators: plain implicit RK on the untransformed equations,
// the generalized leapfrog (half flow, implicit midpoint on g, half flow),
// the Wisdom-Holman style leapfrog with an explicitly split perturbation,
// compositions / ABA splittings driven by coefficient files, and Lawson's
// generalized RK method (one global change of variables).

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "executor.hpp"
#include "system.hpp"
#include "tableau.hpp"

namespace fcirk {

// Gauss IRK with fixed-point iteration on u' = k(u) + g(t, u). Requires
// sys.has_unperturbed_field(); with cfg.partitioned also a position mask.
IntegrationSummary irk_integrate(const PerturbedSystem& sys, const Tableau& tab,
                                 const IntegratorConfig& cfg, double t0,
                                 std::span<const DDReal> u0,
                                 const SampleSink& sink = {},
                                 Executor* exec = nullptr);

// phi_{h/2} o psi o phi_{h/2}, psi(u) = u* with u* = u + h g((u + u*)/2).
// Uses cfg.h, the fixed-point settings and the precision tier.
State leapfrog_midpoint_step(const PerturbedSystem& sys,
                             const IntegratorConfig& cfg, double t,
                             std::span<const DDReal> u,
                             WorkCounters* counters = nullptr);

// phi_{h/2} o S_h o phi_{h/2}, where S_h is the Strang splitting of the
// perturbation parts (each part's flow is explicit). Explicit.
State wh_split_step(const PerturbedSystem& sys, double h, Precision precision,
                    double t, std::span<const DDReal> u,
                    WorkCounters* counters = nullptr);

struct SplitCoefficients {
  enum class Kind { kComposition, kAba };
  Kind kind = Kind::kComposition;
  int order = 0;
  std::string label;
  // Composition: gamma_1..gamma_k in `a`, `b` empty.
  // ABA: flow coefficients a_1..a_{k+1} and kick coefficients b_1..b_k.
  std::vector<DDReal> a;
  std::vector<DDReal> b;
};

// JSON: {"kind": "composition" | "aba", "order": int, "label": string,
//        "gamma": [string...]}  or  {..., "a": [...], "b": [...]}.
// Coefficients are decimal strings (>= 34 significant digits recommended).
SplitCoefficients parse_split_coefficients(std::string_view json_text);
SplitCoefficients load_split_coefficients(const std::string& path);

enum class BaseStep { kLeapfrogMidpoint, kWisdomHolman };

// Generic fixed-step driver: step(t, h, u, counters) advances u in place.
using StepFunction =
    std::function<void(double t, double h, State& u, WorkCounters& counters)>;

IntegrationSummary step_integrate(const StepFunction& step,
                                  const IntegratorConfig& cfg, double t0,
                                  std::span<const DDReal> u0,
                                  const SampleSink& sink = {});

// One step of the composition or ABA scheme. Composition applies the base
// step with sizes gamma_i h. ABA alternates flows phi_{a_i h} with second
// order perturbation maps of length b_i h (the base step's middle map).
void composed_step(const PerturbedSystem& sys, const SplitCoefficients& coeffs,
                   BaseStep base, const IntegratorConfig& cfg, double t,
                   double h, State& u, WorkCounters& counters);

IntegrationSummary composed_integrate(const PerturbedSystem& sys,
                                      const SplitCoefficients& coeffs,
                                      BaseStep base,
                                      const IntegratorConfig& cfg, double t0,
                                      std::span<const DDReal> u0,
                                      const SampleSink& sink = {});

// Lawson: u = phi_{t - t0}(U) globally, IRK on the U equation.
IntegrationSummary lawson_integrate(const PerturbedSystem& sys,
                                    const Tableau& tab,
                                    const IntegratorConfig& cfg, double t0,
                                    std::span<const DDReal> u0,
                                    const SampleSink& sink = {},
                                    Executor* exec = nullptr);

}  // namespace fcirk
