#include "comparators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "fcirk.hpp"
#include "json.hpp"
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

void add_to_state(State& u, std::span<const double> delta, Precision precision) {
  for (std::size_t c = 0; c < u.size(); ++c) {
    if (precision == Precision::kMixed) {
      u[c] = u[c] + delta[c];
    } else {
      u[c] = DDReal(u[c].to_double() + delta[c]);
    }
  }
}

// u* = u + h g(t, (u + u*)/2) by fixed-point iteration on d = u* - u,
// stopped on stagnation as for the IRK stages.
void midpoint_map(const PerturbedSystem& sys, const IntegratorConfig& cfg,
                  double t, double h, State& u, WorkCounters& counters) {
  const std::size_t n = u.size();
  const std::vector<double> uw = to_working(u);
  std::vector<double> d(n, 0.0), d_new(n), x(n), g(n);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  double u_norm = 0.0;
  for (double v : uw) u_norm = std::max(u_norm, std::abs(v));

  bool done = false;
  for (int sweep = 1; sweep <= cfg.fp_max_iters && !done; ++sweep) {
    for (std::size_t c = 0; c < n; ++c) x[c] = uw[c] + 0.5 * d[c];
    sys.perturbation(t, x, g);
    ++counters.perturbation_evals;
    ++counters.fixed_point_sweeps;
    bool improved = false;
    double max_delta = 0.0;
    double d_norm = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      d_new[c] = h * g[c];
      const double delta = std::abs(d_new[c] - d[c]);
      if (!std::isfinite(delta)) {
        throw NonConvergenceError("midpoint iteration produced a non-finite value",
                                  delta, sweep);
      }
      max_delta = std::max(max_delta, delta);
      d_norm = std::max(d_norm, std::abs(d_new[c]));
      if (delta < best[c]) {
        best[c] = delta;
        improved = true;
      }
    }
    d.swap(d_new);
    const double scale = u_norm + d_norm;
    if (cfg.stop_rule == StopRule::kAbsolute) {
      done = max_delta <= cfg.fp_tol * scale;
    } else if (max_delta == 0.0) {
      done = true;
    } else if (!improved) {
      if (max_delta > cfg.fp_tol * scale) {
        throw NonConvergenceError("midpoint iteration stagnated", max_delta, sweep);
      }
      done = true;
    }
    if (!done && sweep == cfg.fp_max_iters) {
      throw NonConvergenceError("midpoint iteration exceeded the sweep limit",
                                max_delta, sweep);
    }
  }
  add_to_state(u, d, cfg.precision);
}

// Strang splitting of the perturbation parts over a step of length h. Each
// part's field does not depend on the coordinates it moves, so its flow is
// one explicit Euler step.
void split_perturbation_map(const PerturbedSystem& sys, Precision precision,
                            double t, double h, State& u,
                            WorkCounters& counters) {
  const int parts = sys.perturbation_parts();
  if (parts < 1) {
    throw InvalidArgument("system does not provide a split perturbation");
  }
  const std::size_t n = u.size();
  std::vector<double> g(n), delta(n);
  auto apply_part = [&](int p, double tau) {
    const std::vector<double> uw = to_working(u);
    sys.perturbation_part(p, t, uw, g);
    if (p == parts - 1) ++counters.perturbation_evals;
    for (std::size_t c = 0; c < n; ++c) delta[c] = tau * g[c];
    add_to_state(u, delta, precision);
  };
  for (int p = 0; p < parts - 1; ++p) apply_part(p, 0.5 * h);
  apply_part(parts - 1, h);
  for (int p = parts - 2; p >= 0; --p) apply_part(p, 0.5 * h);
}

std::vector<DDReal> coefficient_array(const nlohmann::json& doc,
                                      const std::string& key) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_array() || it->empty()) {
    throw ParseError(key + ": expected a non-empty array of decimal strings");
  }
  std::vector<DDReal> out;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& item = (*it)[i];
    const std::string where = key + "[" + std::to_string(i) + "]";
    if (item.is_string()) {
      try {
        out.push_back(dd_from_string(item.get<std::string>()));
      } catch (const ParseError& e) {
        throw ParseError(where + ": " + e.what());
      }
    } else if (item.is_number()) {
      out.push_back(DDReal(item.get<double>()));
    } else {
      throw ParseError(where + ": expected a decimal string");
    }
  }
  return out;
}

void check_sum(const std::vector<DDReal>& x, const std::string& what) {
  DDReal total(0.0);
  for (const DDReal& v : x) total = total + v;
  if (std::abs((total - 1.0).to_double()) > 1e-14) {
    throw ParseError(what + " coefficients do not sum to one");
  }
}

}  // namespace

IntegrationSummary step_integrate(const StepFunction& step,
                                  const IntegratorConfig& cfg, double t0,
                                  std::span<const DDReal> u0,
                                  const SampleSink& sink) {
  validate(cfg);
  IntegrationSummary summary;
  State u(u0.begin(), u0.end());
  if (sink) sink(Sample{0, t0, u, summary.counters});
  long long j = 0;
  try {
    for (j = 1; j <= cfg.n_steps; ++j) {
      step(step_time(t0, j - 1, cfg.h), cfg.h, u, summary.counters);
      ++summary.counters.steps;
      if (sink && j % cfg.m == 0) {
        sink(Sample{j, step_time(t0, j, cfg.h), u, summary.counters});
      }
    }
  } catch (...) {
    rethrow_as_step_failure(step_time(t0, j > 0 ? j - 1 : 0, cfg.h),
                            j > 0 ? j - 1 : 0);
  }
  summary.final_state = std::move(u);
  summary.t_final = step_time(t0, cfg.n_steps, cfg.h);
  summary.steps = cfg.n_steps;
  return summary;
}

State leapfrog_midpoint_step(const PerturbedSystem& sys,
                             const IntegratorConfig& cfg, double t,
                             std::span<const DDReal> u,
                             WorkCounters* counters) {
  check_dim(sys, u.size());
  WorkCounters local;
  State x(u.begin(), u.end());
  flow_state(sys, cfg.precision, 0.5 * cfg.h, x);
  midpoint_map(sys, cfg, t + 0.5 * cfg.h, cfg.h, x, local);
  flow_state(sys, cfg.precision, 0.5 * cfg.h, x);
  local.flow_evals += 2;
  if (counters != nullptr) *counters += local;
  return x;
}

State wh_split_step(const PerturbedSystem& sys, double h, Precision precision,
                    double t, std::span<const DDReal> u,
                    WorkCounters* counters) {
  check_dim(sys, u.size());
  WorkCounters local;
  State x(u.begin(), u.end());
  flow_state(sys, precision, 0.5 * h, x);
  split_perturbation_map(sys, precision, t + 0.5 * h, h, x, local);
  flow_state(sys, precision, 0.5 * h, x);
  local.flow_evals += 2;
  if (counters != nullptr) *counters += local;
  return x;
}

SplitCoefficients parse_split_coefficients(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text.begin(), json_text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("coefficient file must be an object");
  for (const auto& item : doc.items()) {
    static const char* const kAllowed[] = {"kind", "order", "label", "gamma",
                                           "a", "b", "source"};
    if (std::find(std::begin(kAllowed), std::end(kAllowed), item.key()) ==
        std::end(kAllowed)) {
      throw ParseError(item.key() + ": unknown field");
    }
  }

  SplitCoefficients out;
  if (!doc.contains("kind") || !doc["kind"].is_string()) {
    throw ParseError("kind: expected \"composition\" or \"aba\"");
  }
  const std::string kind = doc["kind"].get<std::string>();
  if (doc.contains("order")) {
    if (!doc["order"].is_number_integer()) throw ParseError("order: expected an integer");
    out.order = doc["order"].get<int>();
  }
  if (doc.contains("label")) {
    if (!doc["label"].is_string()) throw ParseError("label: expected a string");
    out.label = doc["label"].get<std::string>();
  }
  if (kind == "composition") {
    out.kind = SplitCoefficients::Kind::kComposition;
    out.a = coefficient_array(doc, "gamma");
    check_sum(out.a, "composition");
  } else if (kind == "aba") {
    out.kind = SplitCoefficients::Kind::kAba;
    out.a = coefficient_array(doc, "a");
    out.b = coefficient_array(doc, "b");
    if (out.a.size() != out.b.size() + 1) {
      throw ParseError("aba: expected one more flow coefficient than kicks");
    }
    check_sum(out.a, "flow");
    check_sum(out.b, "kick");
  } else {
    throw ParseError("kind: expected \"composition\" or \"aba\", got \"" + kind + "\"");
  }
  return out;
}

SplitCoefficients load_split_coefficients(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open coefficient file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_split_coefficients(text.str());
}

void composed_step(const PerturbedSystem& sys, const SplitCoefficients& coeffs,
                   BaseStep base, const IntegratorConfig& cfg, double t,
                   double h, State& u, WorkCounters& counters) {
  if (coeffs.kind == SplitCoefficients::Kind::kComposition) {
    double tau = t;
    for (const DDReal& gamma : coeffs.a) {
      const double hi = (gamma * h).to_double();
      if (base == BaseStep::kLeapfrogMidpoint) {
        IntegratorConfig sub = cfg;
        sub.h = hi;
        u = leapfrog_midpoint_step(sys, sub, tau, u, &counters);
      } else {
        u = wh_split_step(sys, hi, cfg.precision, tau, u, &counters);
      }
      tau += hi;
    }
    return;
  }
  double tau = t;
  for (std::size_t i = 0; i < coeffs.a.size(); ++i) {
    const double ai = (coeffs.a[i] * h).to_double();
    flow_state(sys, cfg.precision, ai, u);
    ++counters.flow_evals;
    tau += ai;
    if (i < coeffs.b.size()) {
      const double bi = (coeffs.b[i] * h).to_double();
      if (base == BaseStep::kLeapfrogMidpoint) {
        midpoint_map(sys, cfg, tau, bi, u, counters);
      } else {
        split_perturbation_map(sys, cfg.precision, tau, bi, u, counters);
      }
    }
  }
}

IntegrationSummary composed_integrate(const PerturbedSystem& sys,
                                      const SplitCoefficients& coeffs,
                                      BaseStep base,
                                      const IntegratorConfig& cfg, double t0,
                                      std::span<const DDReal> u0,
                                      const SampleSink& sink) {
  check_dim(sys, u0.size());
  return step_integrate(
      [&](double t, double h, State& u, WorkCounters& counters) {
        composed_step(sys, coeffs, base, cfg, t, h, u, counters);
      },
      cfg, t0, u0, sink);
}

IntegrationSummary irk_integrate(const PerturbedSystem& sys, const Tableau& tab,
                                 const IntegratorConfig& cfg, double t0,
                                 std::span<const DDReal> u0,
                                 const SampleSink& sink, Executor* exec) {
  validate(cfg);
  check_dim(sys, u0.size());
  if (!sys.has_unperturbed_field()) {
    throw InvalidArgument("plain IRK needs the unperturbed vector field");
  }
  const auto d = u0.size();
  const auto s = static_cast<std::size_t>(tab.stages());
  const int dim = static_cast<int>(d);

  StagePartition partition;
  if (cfg.partitioned) {
    partition.mask = sys.position_mask();
    if (partition.mask.size() != d) {
      throw InvalidArgument("partitioned iteration needs a position mask");
    }
  }

  std::vector<double> z(s * d, 0.0), f(s * d, 0.0), increment(d);
  double t_j = t0;
  const StageRhs rhs = [&](int i, std::span<const double> w,
                           std::span<double> out) {
    thread_local std::vector<double> g;
    g.resize(d);
    const double t = t_j + tab.c_w(i) * cfg.h;
    sys.unperturbed_field(w, out);
    sys.perturbation(t, w, g);
    for (std::size_t c = 0; c < d; ++c) out[c] += g[c];
  };
  if (cfg.partitioned) {
    partition.rate = [&](int i, std::span<const double> w,
                         std::span<double> out) {
      sys.position_rate(t_j + tab.c_w(i) * cfg.h, w, out);
    };
  }

  return step_integrate(
      [&](double t, double h, State& u, WorkCounters& counters) {
        t_j = t;
        const std::vector<double> uw = to_working(u);
        if (cfg.init_mode == StageInit::kZero) std::fill(z.begin(), z.end(), 0.0);
        const StageSolve solve =
            solve_stages(tab, cfg, h, uw, z, f, rhs, exec,
                         cfg.partitioned ? &partition : nullptr);
        counters.perturbation_evals += static_cast<long long>(s) * solve.sweeps;
        counters.fixed_point_sweeps += solve.sweeps;
        const auto delta = stage_increment(tab, h, f, dim);
        for (std::size_t c = 0; c < d; ++c) increment[c] = delta[c].value();
        apply_increment(u, delta, cfg.precision);
        if (cfg.init_mode == StageInit::kPreviousInterpolation) {
          extrapolate_stages(tab, z, increment, dim);
        }
      },
      cfg, t0, u0, sink);
}

IntegrationSummary lawson_integrate(const PerturbedSystem& sys,
                                    const Tableau& tab,
                                    const IntegratorConfig& cfg, double t0,
                                    std::span<const DDReal> u0,
                                    const SampleSink& sink, Executor* exec) {
  validate(cfg);
  check_dim(sys, u0.size());
  const auto d = u0.size();
  const auto s = static_cast<std::size_t>(tab.stages());
  const int dim = static_cast<int>(d);

  std::vector<double> z(s * d, 0.0), f(s * d, 0.0), increment(d), tau(s);
  std::vector<FlowMemo> memos(s);
  FlowMemo out_memo;
  double t_j = t0;
  const StageRhs rhs = [&](int i, std::span<const double> w,
                           std::span<double> out) {
    const auto ii = static_cast<std::size_t>(i);
    transformed_rhs_offset(sys, t_j + tab.c_w(i) * cfg.h, tau[ii], w, out,
                           &memos[ii]);
  };

  IntegrationSummary summary;
  WorkCounters& counters = summary.counters;
  State big_u(u0.begin(), u0.end());
  State u(u0.begin(), u0.end());
  if (sink) sink(Sample{0, t0, u, counters});
  long long j = 0;
  try {
    for (j = 1; j <= cfg.n_steps; ++j) {
      t_j = step_time(t0, j - 1, cfg.h);
      for (std::size_t i = 0; i < s; ++i) {
        const int ii = static_cast<int>(i);
        tau[i] = ((static_cast<double>(j - 1) + tab.c(ii)) * cfg.h).to_double();
      }
      const std::vector<double> uw = to_working(big_u);
      if (cfg.init_mode == StageInit::kZero) std::fill(z.begin(), z.end(), 0.0);
      const StageSolve solve = solve_stages(tab, cfg, cfg.h, uw, z, f, rhs, exec);
      const auto evals = static_cast<long long>(s) * solve.sweeps;
      counters.perturbation_evals += evals;
      counters.rhs_flow_evals += evals;
      counters.jacT_evals += evals;
      counters.fixed_point_sweeps += solve.sweeps;
      const auto delta = stage_increment(tab, cfg.h, f, dim);
      for (std::size_t c = 0; c < d; ++c) increment[c] = delta[c].value();
      apply_increment(big_u, delta, cfg.precision);
      if (cfg.init_mode == StageInit::kPreviousInterpolation) {
        extrapolate_stages(tab, z, increment, dim);
      }
      ++counters.steps;
      if ((sink && j % cfg.m == 0) || j == cfg.n_steps) {
        u = big_u;
        const double elapsed = (DDReal(static_cast<double>(j)) * cfg.h).to_double();
        flow_state(sys, cfg.precision, elapsed, u, &out_memo);
        ++counters.flow_evals;
        if (sink && j % cfg.m == 0) sink(Sample{j, step_time(t0, j, cfg.h), u, counters});
      }
    }
  } catch (...) {
    rethrow_as_step_failure(step_time(t0, j > 0 ? j - 1 : 0, cfg.h),
                            j > 0 ? j - 1 : 0);
  }
  summary.final_state = std::move(u);
  summary.t_final = step_time(t0, cfg.n_steps, cfg.h);
  summary.steps = cfg.n_steps;
  return summary;
}

}  // namespace fcirk
