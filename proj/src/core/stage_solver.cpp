#include "stage_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace fcirk {
namespace {

double inf_norm(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

// L_l = (h b_l) f_l, rounded once; the same products feed the increment.
void scaled_rates(const Tableau& tab, double h, std::span<const double> f,
                  std::span<double> l, int dim) {
  const auto d = static_cast<std::size_t>(dim);
  for (int j = 0; j < tab.stages(); ++j) {
    const double hb = h * tab.b_w(j);
    const std::size_t o = static_cast<std::size_t>(j) * d;
    for (std::size_t c = 0; c < d; ++c) l[o + c] = hb * f[o + c];
  }
}

// z_new_i = sum_l mu_il L_l (or sum_l (h a_il) f_l when the tableau has no
// mu form) for the components selected by `keep`.
void combine(const Tableau& tab, double h, std::span<const double> f,
             std::span<double> scratch, std::span<double> z_new, int dim,
             const unsigned char* keep, unsigned char want) {
  const int s = tab.stages();
  const auto d = static_cast<std::size_t>(dim);
  const bool mu = tab.has_mu();
  if (mu) scaled_rates(tab, h, f, scratch, dim);
  for (int i = 0; i < s; ++i) {
    double* zi = z_new.data() + static_cast<std::size_t>(i) * d;
    for (std::size_t c = 0; c < d; ++c) {
      if (keep != nullptr && keep[c] != want) continue;
      CompensatedAccumulator acc;
      for (int l = 0; l < s; ++l) {
        const std::size_t k = static_cast<std::size_t>(l) * d + c;
        acc.add(mu ? tab.mu_w(i, l) * scratch[k] : h * tab.a_w(i, l) * f[k]);
      }
      zi[c] = acc.value();
    }
  }
}

}  // namespace

void validate(const IntegratorConfig& cfg) {
  if (!(cfg.h != 0.0) || !std::isfinite(cfg.h)) {
    throw InvalidArgument("step size h must be finite and nonzero");
  }
  if (cfg.n_steps < 0) throw InvalidArgument("n_steps must be >= 0");
  if (cfg.m < 1) throw InvalidArgument("output interval m must be >= 1");
  if (cfg.fp_max_iters < 1) throw InvalidArgument("fp_max_iters must be >= 1");
  if (!(cfg.fp_tol > 0.0)) throw InvalidArgument("fp_tol must be positive");
}

StageSolve solve_stages(const Tableau& tab, const IntegratorConfig& cfg,
                        double h, std::span<const double> u,
                        std::span<double> z, std::span<double> f,
                        const StageRhs& rhs, Executor* exec,
                        const StagePartition* partition) {
  const int s = tab.stages();
  const auto d = u.size();
  const auto n = static_cast<std::size_t>(s) * d;
  const int dim = static_cast<int>(d);

  std::vector<double> w(n);
  std::vector<double> z_new(n);
  std::vector<double> scaled(n);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  const unsigned char* mask =
      partition != nullptr ? partition->mask.data() : nullptr;

  auto evaluate = [&](const StageRhs& fn, std::span<const double> zz) {
    parallel_for(exec, static_cast<std::size_t>(s), [&](std::size_t i) {
      double* wi = w.data() + i * d;
      const double* zi = zz.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) wi[c] = u[c] + zi[c];
      fn(static_cast<int>(i), std::span<const double>(wi, d),
         f.subspan(i * d, d));
    });
  };

  StageSolve result;
  const double u_norm = inf_norm(u);
  for (int sweep = 1; sweep <= cfg.fp_max_iters; ++sweep) {
    result.sweeps = sweep;
    evaluate(rhs, z);
    if (partition == nullptr) {
      combine(tab, h, f, scaled, z_new, dim, nullptr, 0);
    } else {
      // Velocity-like components first, then positions from the updated
      // velocities.
      combine(tab, h, f, scaled, z_new, dim, mask, 0);
      for (std::size_t i = 0; i < static_cast<std::size_t>(s); ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          if (mask[c] != 0) z_new[i * d + c] = z[i * d + c];
        }
      }
      std::vector<double> f_vel(f.begin(), f.end());
      evaluate(partition->rate, z_new);
      for (std::size_t i = 0; i < static_cast<std::size_t>(s); ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          if (mask[c] == 0) f[i * d + c] = f_vel[i * d + c];
        }
      }
      combine(tab, h, f, scaled, z_new, dim, mask, 1);
    }

    bool improved = false;
    double max_delta = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double delta = std::abs(z_new[k] - z[k]);
      if (!std::isfinite(delta)) {
        throw NonConvergenceError(
            "stage iteration produced a non-finite value", delta, sweep);
      }
      max_delta = std::max(max_delta, delta);
      if (delta < best[k]) {
        improved = true;
        best[k] = delta;
      }
    }
    std::copy(z_new.begin(), z_new.end(), z.begin());
    result.residual = max_delta;

    const double scale = u_norm + inf_norm(z);
    if (cfg.stop_rule == StopRule::kAbsolute) {
      if (max_delta <= cfg.fp_tol * scale) return result;
      continue;
    }
    if (max_delta == 0.0) return result;
    if (!improved) {
      if (max_delta > cfg.fp_tol * scale) {
        throw NonConvergenceError(
            "stage iteration stagnated with relative correction " +
                std::to_string(max_delta / scale),
            max_delta, sweep);
      }
      return result;
    }
  }
  throw NonConvergenceError("stage iteration exceeded " +
                                std::to_string(cfg.fp_max_iters) + " sweeps",
                            result.residual, result.sweeps);
}

std::vector<CompensatedAccumulator> stage_increment(const Tableau& tab,
                                                    double h,
                                                    std::span<const double> f,
                                                    int dim) {
  const auto d = static_cast<std::size_t>(dim);
  std::vector<CompensatedAccumulator> delta(d);
  for (int i = 0; i < tab.stages(); ++i) {
    const double hb = h * tab.b_w(i);
    const double* fi = f.data() + static_cast<std::size_t>(i) * d;
    for (std::size_t c = 0; c < d; ++c) delta[c].add(hb * fi[c]);
  }
  return delta;
}

void apply_increment(std::span<DDReal> u,
                     std::span<const CompensatedAccumulator> delta,
                     Precision precision) {
  for (std::size_t c = 0; c < u.size(); ++c) {
    if (precision == Precision::kMixed) {
      u[c] = u[c] + delta[c].as_dd();
    } else {
      u[c] = DDReal(u[c].to_double() + delta[c].value());
    }
  }
}

void extrapolate_stages(const Tableau& tab, std::span<double> z,
                        std::span<const double> increment, int dim) {
  const int s = tab.stages();
  const auto d = static_cast<std::size_t>(dim);
  std::vector<double> out(z.size());
  for (int i = 0; i < s; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int l = 0; l < s; ++l) {
        acc += tab.extrapolation(i, l) * z[static_cast<std::size_t>(l) * d + c];
      }
      out[static_cast<std::size_t>(i) * d + c] = acc - increment[c];
    }
  }
  std::copy(out.begin(), out.end(), z.begin());
}

}  // namespace fcirk
