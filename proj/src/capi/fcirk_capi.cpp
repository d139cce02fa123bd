#include "fcirk/fcirk.h"

#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "comparators.hpp"
#include "errors.hpp"
#include "executor.hpp"
#include "fcirk.hpp"
#include "nbody.hpp"
#include "roundoff_stats.hpp"
#include "tableau.hpp"

struct fcirk_tableau {
  const fcirk::Tableau* tab;
};

struct fcirk_model {
  fcirk::BarycentricState barycentric;
  std::unique_ptr<fcirk::NBodyModel> model;
  fcirk::State initial;
};

struct fcirk_ensemble_report {
  std::vector<fcirk::EnsembleReport> reports;
};

namespace {

thread_local std::string last_error;

struct Cancelled {};

fcirk_status fail(fcirk_status status, const std::string& message) {
  last_error = message;
  return status;
}

fcirk_status status_of(fcirk::ErrorCode code) {
  using fcirk::ErrorCode;
  switch (code) {
    case ErrorCode::kDomain: return FCIRK_E_DOMAIN;
    case ErrorCode::kParse: return FCIRK_E_PARSE;
    case ErrorCode::kUnit: return FCIRK_E_UNIT;
    case ErrorCode::kSingularity: return FCIRK_E_SINGULAR;
    case ErrorCode::kSolver: return FCIRK_E_SOLVER;
    case ErrorCode::kNonConvergence: return FCIRK_E_NONCONVERGENCE;
    case ErrorCode::kNormalization: return FCIRK_E_NORMALIZATION;
    case ErrorCode::kInvalidArgument: return FCIRK_E_INVALID_ARGUMENT;
    case ErrorCode::kIo: return FCIRK_E_IO;
  }
  return FCIRK_E_INTERNAL;
}

// Maps the active exception to a status and records its message.
fcirk_status translate() {
  try {
    throw;
  } catch (const Cancelled&) {
    return fail(FCIRK_E_CANCELLED, "cancelled by sample callback");
  } catch (const fcirk::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FCIRK_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FCIRK_E_INTERNAL, e.what());
  } catch (...) {
    return fail(FCIRK_E_INTERNAL, "unknown error");
  }
}

template <class Fn>
fcirk_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    return fn();
  } catch (...) {
    return translate();
  }
}

fcirk_status copy_text(const std::string& text, char* buffer, size_t capacity,
                       size_t* needed) {
  if (needed != nullptr) *needed = text.size() + 1;
  if (buffer == nullptr || capacity == 0) {
    return needed != nullptr
               ? FCIRK_OK
               : fail(FCIRK_E_INVALID_ARGUMENT, "no output buffer");
  }
  const size_t n = std::min(capacity - 1, text.size());
  std::memcpy(buffer, text.data(), n);
  buffer[n] = '\0';
  return FCIRK_OK;
}

fcirk::IntegratorConfig core_config(const fcirk_config& c) {
  fcirk::IntegratorConfig cfg;
  cfg.h = c.h;
  cfg.n_steps = c.n_steps;
  cfg.m = c.m;
  cfg.fp_max_iters = c.fp_max_iters;
  cfg.fp_tol = c.fp_tol;
  cfg.precision = c.precision == FCIRK_PRECISION_WORKING
                      ? fcirk::Precision::kWorking
                      : fcirk::Precision::kMixed;
  cfg.init_mode = c.init_mode == FCIRK_INIT_ZERO
                      ? fcirk::StageInit::kZero
                      : fcirk::StageInit::kPreviousInterpolation;
  cfg.partitioned = c.family == FCIRK_FAMILY_IRK_PARTITIONED;
  return cfg;
}

// Resolved integrator: everything a trajectory needs besides h and n_steps.
class Runner {
 public:
  Runner(const fcirk::NBodyModel& model, const fcirk_config& c)
      : model_(model), family_(c.family), cfg_(core_config(c)) {
    switch (family_) {
      case FCIRK_FAMILY_FCIRK:
      case FCIRK_FAMILY_IRK:
      case FCIRK_FAMILY_IRK_PARTITIONED:
      case FCIRK_FAMILY_LAWSON:
        tab_ = &fcirk::gauss_legendre_tableau(c.stages);
        break;
      case FCIRK_FAMILY_LEAPFROG:
      case FCIRK_FAMILY_WH:
        break;
      case FCIRK_FAMILY_COMPOSED:
        if (c.coefficients == nullptr) {
          throw fcirk::InvalidArgument("composed integrator needs a coefficient file");
        }
        if (c.composed_base != 0 && c.composed_base != 1) {
          throw fcirk::InvalidArgument("composed_base must be 0 or 1");
        }
        coeffs_ = fcirk::load_split_coefficients(c.coefficients);
        base_ = c.composed_base == 0 ? fcirk::BaseStep::kLeapfrogMidpoint
                                     : fcirk::BaseStep::kWisdomHolman;
        break;
      default:
        throw fcirk::InvalidArgument("unknown integrator family " +
                                     std::to_string(static_cast<int>(family_)));
    }
    if (c.threads != 1) exec_ = std::make_unique<fcirk::Executor>(c.threads);
  }

  fcirk::Executor* executor() const { return exec_.get(); }

  fcirk::IntegrationSummary run(double t0, std::span<const fcirk::DDReal> u0,
                                double h, long long n_steps, long long m,
                                const fcirk::SampleSink& sink,
                                fcirk::Executor* exec) const {
    fcirk::IntegratorConfig cfg = cfg_;
    cfg.h = h;
    cfg.n_steps = n_steps;
    cfg.m = m;
    switch (family_) {
      case FCIRK_FAMILY_FCIRK:
        return fcirk::integrate(model_, *tab_, cfg, t0, u0, sink, exec);
      case FCIRK_FAMILY_IRK:
      case FCIRK_FAMILY_IRK_PARTITIONED:
        return fcirk::irk_integrate(model_, *tab_, cfg, t0, u0, sink, exec);
      case FCIRK_FAMILY_LAWSON:
        return fcirk::lawson_integrate(model_, *tab_, cfg, t0, u0, sink, exec);
      case FCIRK_FAMILY_LEAPFROG:
        return fcirk::step_integrate(
            [&](double t, double, fcirk::State& u, fcirk::WorkCounters& w) {
              u = fcirk::leapfrog_midpoint_step(model_, cfg, t, u, &w);
            },
            cfg, t0, u0, sink);
      case FCIRK_FAMILY_WH:
        return fcirk::step_integrate(
            [&](double t, double step, fcirk::State& u, fcirk::WorkCounters& w) {
              u = fcirk::wh_split_step(model_, step, cfg.precision, t, u, &w);
            },
            cfg, t0, u0, sink);
      case FCIRK_FAMILY_COMPOSED:
        return fcirk::composed_integrate(model_, *coeffs_, base_, cfg, t0, u0, sink);
    }
    throw fcirk::InvalidArgument("unknown integrator family");
  }

  const fcirk::IntegratorConfig& config() const { return cfg_; }

 private:
  const fcirk::NBodyModel& model_;
  fcirk_family family_;
  fcirk::IntegratorConfig cfg_;
  const fcirk::Tableau* tab_ = nullptr;
  std::optional<fcirk::SplitCoefficients> coeffs_;
  fcirk::BaseStep base_ = fcirk::BaseStep::kLeapfrogMidpoint;
  std::unique_ptr<fcirk::Executor> exec_;
};

fcirk_counters to_c(const fcirk::WorkCounters& w) {
  return fcirk_counters{w.perturbation_evals, w.flow_evals, w.rhs_flow_evals,
                        w.jacT_evals,         w.fixed_point_sweeps, w.steps};
}

fcirk::State read_state(const fcirk_model& m, const double* hi,
                        const double* lo) {
  if (hi == nullptr) return m.initial;
  fcirk::State u(m.initial.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = lo == nullptr ? fcirk::DDReal(hi[i])
                         : fcirk::two_sum(hi[i], lo[i]);
  }
  return u;
}

double norm3(const fcirk::Vec3<fcirk::DDReal>& v) {
  return fcirk::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).to_double();
}

fcirk_status make_model(fcirk::BarycentricState b, fcirk_model** out) {
  auto handle = std::make_unique<fcirk_model>();
  handle->initial = fcirk::to_heliocentric(b);
  handle->model = std::make_unique<fcirk::NBodyModel>(fcirk::make_model(b));
  handle->barycentric = std::move(b);
  *out = handle.release();
  return FCIRK_OK;
}

const fcirk::EnsembleReport* entry(const fcirk_ensemble_report* report,
                                   size_t index) {
  if (report == nullptr || index >= report->reports.size()) return nullptr;
  return &report->reports[index];
}

}  // namespace

extern "C" {

const char* fcirk_last_error(void) { return last_error.c_str(); }

const char* fcirk_status_name(fcirk_status status) {
  switch (status) {
    case FCIRK_OK: return "ok";
    case FCIRK_E_DOMAIN: return "domain error";
    case FCIRK_E_PARSE: return "parse error";
    case FCIRK_E_UNIT: return "unit error";
    case FCIRK_E_SINGULAR: return "singular configuration";
    case FCIRK_E_SOLVER: return "Kepler solver failure";
    case FCIRK_E_NONCONVERGENCE: return "stage iteration did not converge";
    case FCIRK_E_NORMALIZATION: return "normalization error";
    case FCIRK_E_INVALID_ARGUMENT: return "invalid argument";
    case FCIRK_E_IO: return "I/O error";
    case FCIRK_E_CANCELLED: return "cancelled";
    case FCIRK_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* fcirk_version(void) { return FCIRK_VERSION_STRING; }

fcirk_status fcirk_format_dd(double hi, double lo, int digits, char* buffer,
                             size_t capacity, size_t* needed) {
  return guarded([&] {
    if (digits < 1 || digits > 40) {
      return fail(FCIRK_E_INVALID_ARGUMENT, "digits must be in 1..40");
    }
    return copy_text(fcirk::to_string(fcirk::two_sum(hi, lo), digits), buffer,
                     capacity, needed);
  });
}

fcirk_status fcirk_tableau_gauss(int stages, fcirk_tableau** out) {
  return guarded([&] {
    if (out == nullptr) return fail(FCIRK_E_INVALID_ARGUMENT, "null output");
    *out = new fcirk_tableau{&fcirk::gauss_legendre_tableau(stages)};
    return FCIRK_OK;
  });
}

int fcirk_tableau_stages(const fcirk_tableau* tab) {
  return tab == nullptr ? 0 : tab->tab->stages();
}

fcirk_status fcirk_tableau_residuals(const fcirk_tableau* tab,
                                     double* symplecticity, double* symmetry) {
  return guarded([&] {
    if (tab == nullptr) return fail(FCIRK_E_INVALID_ARGUMENT, "null tableau");
    if (symplecticity != nullptr) {
      *symplecticity = fcirk::symplecticity_residual(*tab->tab);
    }
    if (symmetry != nullptr) *symmetry = fcirk::symmetry_residual(*tab->tab);
    return FCIRK_OK;
  });
}

fcirk_status fcirk_tableau_csv(const fcirk_tableau* tab, char* buffer,
                               size_t capacity, size_t* needed) {
  return guarded([&] {
    if (tab == nullptr) return fail(FCIRK_E_INVALID_ARGUMENT, "null tableau");
    return copy_text(fcirk::tableau_to_csv(*tab->tab), buffer, capacity, needed);
  });
}

void fcirk_tableau_free(fcirk_tableau* tab) { delete tab; }

fcirk_status fcirk_model_load(const char* path, int lax, fcirk_model** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) {
      return fail(FCIRK_E_INVALID_ARGUMENT, "null argument");
    }
    return make_model(fcirk::load_initial_conditions(path, lax != 0), out);
  });
}

fcirk_status fcirk_model_parse(const char* json_text, int lax,
                               fcirk_model** out) {
  return guarded([&] {
    if (json_text == nullptr || out == nullptr) {
      return fail(FCIRK_E_INVALID_ARGUMENT, "null argument");
    }
    return make_model(fcirk::parse_initial_conditions(json_text, lax != 0), out);
  });
}

int fcirk_model_bodies(const fcirk_model* model) {
  return model == nullptr ? 0 : model->model->bodies();
}

int fcirk_model_dim(const fcirk_model* model) {
  return model == nullptr ? 0 : model->model->dim();
}

const char* fcirk_model_body_name(const fcirk_model* model, int i) {
  if (model == nullptr || i < 0 ||
      i >= static_cast<int>(model->barycentric.names.size())) {
    return nullptr;
  }
  return model->barycentric.names[static_cast<std::size_t>(i)].c_str();
}

fcirk_status fcirk_model_initial_state(const fcirk_model* model, double* hi,
                                       double* lo) {
  if (model == nullptr || hi == nullptr) {
    return fail(FCIRK_E_INVALID_ARGUMENT, "null argument");
  }
  for (std::size_t i = 0; i < model->initial.size(); ++i) {
    hi[i] = model->initial[i].hi;
    if (lo != nullptr) lo[i] = model->initial[i].lo;
  }
  return FCIRK_OK;
}

fcirk_status fcirk_model_invariants(const fcirk_model* model, const double* hi,
                                    const double* lo, double* energy,
                                    double angular_momentum[3]) {
  return guarded([&] {
    if (model == nullptr || hi == nullptr) {
      return fail(FCIRK_E_INVALID_ARGUMENT, "null argument");
    }
    const fcirk::State u = read_state(*model, hi, lo);
    if (energy != nullptr) {
      *energy = model->model->energy<fcirk::DDReal>(u).to_double();
    }
    if (angular_momentum != nullptr) {
      const auto l = model->model->angular_momentum<fcirk::DDReal>(u);
      for (int k = 0; k < 3; ++k) angular_momentum[k] = l[k].to_double();
    }
    return FCIRK_OK;
  });
}

void fcirk_model_free(fcirk_model* model) { delete model; }

void fcirk_config_default(fcirk_config* cfg) {
  if (cfg == nullptr) return;
  const fcirk::IntegratorConfig d;
  cfg->family = FCIRK_FAMILY_FCIRK;
  cfg->stages = 8;
  cfg->coefficients = nullptr;
  cfg->composed_base = 0;
  cfg->h = 0.0;
  cfg->n_steps = 0;
  cfg->m = 1;
  cfg->precision = FCIRK_PRECISION_MIXED;
  cfg->init_mode = FCIRK_INIT_PREVIOUS;
  cfg->fp_max_iters = d.fp_max_iters;
  cfg->fp_tol = d.fp_tol;
  cfg->threads = 1;
}

fcirk_status fcirk_integrate(const fcirk_model* model, const fcirk_config* cfg,
                             double t0, const double* u0_hi,
                             const double* u0_lo, fcirk_sample_fn on_sample,
                             void* user, fcirk_summary* summary,
                             double* final_hi, double* final_lo) {
  fcirk_summary local{};
  fcirk_summary& out = summary != nullptr ? *summary : local;
  out = fcirk_summary{};
  out.last_good_step = -1;

  const std::clock_t cpu_start = std::clock();
  const auto wall_start = std::chrono::steady_clock::now();
  auto stop_clocks = [&] {
    out.cpu_seconds =
        static_cast<double>(std::clock() - cpu_start) / CLOCKS_PER_SEC;
    out.wall_seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - wall_start)
                           .count();
  };

  const fcirk_status status = guarded([&] {
    if (model == nullptr || cfg == nullptr) {
      return fail(FCIRK_E_INVALID_ARGUMENT, "null argument");
    }
    const Runner runner(*model->model, *cfg);
    const fcirk::State u0 = read_state(*model, u0_hi, u0_lo);
    const fcirk::NBodyModel& sys = *model->model;
    const fcirk::DDReal e0 = sys.energy<fcirk::DDReal>(u0);
    const auto l0 = sys.angular_momentum<fcirk::DDReal>(u0);
    const double l0_norm = norm3(l0);

    std::vector<double> hi(u0.size()), lo(u0.size());
    const fcirk::SampleSink sink = [&](const fcirk::Sample& s) {
      const fcirk::DDReal e = sys.energy<fcirk::DDReal>(s.u);
      const auto l = sys.angular_momentum<fcirk::DDReal>(s.u);
      const double de = ((e - e0) / abs(e0)).to_double();
      const fcirk::Vec3<fcirk::DDReal> dl{l[0] - l0[0], l[1] - l0[1], l[2] - l0[2]};
      const double dl_rel = l0_norm > 0.0 ? norm3(dl) / l0_norm : norm3(dl);
      out.max_rel_energy_error = std::max(out.max_rel_energy_error, std::abs(de));
      out.max_rel_angular_momentum_error =
          std::max(out.max_rel_angular_momentum_error, dl_rel);
      out.last_good_time = s.t;
      out.last_good_step = s.step;
      if (on_sample == nullptr) return;
      for (std::size_t i = 0; i < s.u.size(); ++i) {
        hi[i] = s.u[i].hi;
        lo[i] = s.u[i].lo;
      }
      const fcirk_sample sample{s.step, s.t, static_cast<int>(s.u.size()),
                                hi.data(), lo.data(), de, dl_rel,
                                to_c(s.counters)};
      if (on_sample(&sample, user) != 0) throw Cancelled{};
    };

    try {
      const fcirk::IntegrationSummary r =
          runner.run(t0, u0, cfg->h, cfg->n_steps, cfg->m, sink, runner.executor());
      out.t_final = r.t_final;
      out.steps = r.steps;
      out.counters = to_c(r.counters);
      out.last_good_time = r.t_final;
      out.last_good_step = r.steps;
      for (std::size_t i = 0; i < r.final_state.size(); ++i) {
        if (final_hi != nullptr) final_hi[i] = r.final_state[i].hi;
        if (final_lo != nullptr) final_lo[i] = r.final_state[i].lo;
      }
    } catch (const fcirk::StepFailure& e) {
      out.last_good_time = e.last_good_time();
      out.last_good_step = e.last_good_step();
      throw;
    }
    return FCIRK_OK;
  });
  stop_clocks();
  return status;
}

fcirk_status fcirk_ensemble(const fcirk_model* model, const fcirk_config* cfg,
                            const fcirk_ensemble_config* ec,
                            fcirk_ensemble_report** out) {
  return guarded([&] {
    if (model == nullptr || cfg == nullptr || ec == nullptr || out == nullptr) {
      return fail(FCIRK_E_INVALID_ARGUMENT, "null argument");
    }
    if (ec->h_count > 0 && ec->h_list == nullptr) {
      return fail(FCIRK_E_INVALID_ARGUMENT, "null h_list");
    }
    fcirk_config serial = *cfg;
    serial.threads = 1;  // members run in parallel instead
    const Runner runner(*model->model, serial);
    std::unique_ptr<fcirk::Executor> exec;
    if (cfg->threads != 1) exec = std::make_unique<fcirk::Executor>(cfg->threads);

    fcirk::EnsembleConfig e;
    e.P = ec->P;
    e.perturb_scale = ec->perturb_scale;
    e.h_list.assign(ec->h_list, ec->h_list + ec->h_count);
    e.T = ec->T;
    e.m = ec->m;
    e.seed = ec->seed;
    e.quantity = ec->quantity == FCIRK_QUANTITY_ENERGY
                     ? fcirk::Quantity::kEnergy
                     : fcirk::Quantity::kAngularMomentumNorm;
    const fcirk::TrajectoryRunner trajectory =
        [&](std::span<const fcirk::DDReal> u0, double h, long long n_steps,
            long long m, const fcirk::SampleSink& sink) {
          runner.run(0.0, u0, h, n_steps, m, sink, nullptr);
        };
    auto report = std::make_unique<fcirk_ensemble_report>();
    report->reports =
        fcirk::run_ensemble(*model->model, model->initial, trajectory, e, exec.get());
    *out = report.release();
    return FCIRK_OK;
  });
}

size_t fcirk_report_count(const fcirk_ensemble_report* report) {
  return report == nullptr ? 0 : report->reports.size();
}

fcirk_status fcirk_report_series(const fcirk_ensemble_report* report,
                                 size_t index, double* h, size_t* length,
                                 const double** t, const double** mu,
                                 const double** sigma) {
  const fcirk::EnsembleReport* r = entry(report, index);
  if (r == nullptr) return fail(FCIRK_E_INVALID_ARGUMENT, "no such report entry");
  if (h != nullptr) *h = r->h;
  if (length != nullptr) *length = r->t.size();
  if (t != nullptr) *t = r->t.data();
  if (mu != nullptr) *mu = r->mu.data();
  if (sigma != nullptr) *sigma = r->sigma.data();
  return FCIRK_OK;
}

fcirk_status fcirk_report_fit(const fcirk_ensemble_report* report, size_t index,
                              double* exponent, double* amplitude) {
  const fcirk::EnsembleReport* r = entry(report, index);
  if (r == nullptr) return fail(FCIRK_E_INVALID_ARGUMENT, "no such report entry");
  if (!r->fit) {
    return fail(FCIRK_E_DOMAIN,
                "random-walk fit needs at least 10 samples with sigma > 0");
  }
  if (exponent != nullptr) *exponent = r->fit->exponent;
  if (amplitude != nullptr) *amplitude = r->fit->amplitude;
  return FCIRK_OK;
}

size_t fcirk_report_failures(const fcirk_ensemble_report* report, size_t index) {
  const fcirk::EnsembleReport* r = entry(report, index);
  return r == nullptr ? 0 : r->failed_members.size();
}

fcirk_status fcirk_report_csv(const fcirk_ensemble_report* report, size_t index,
                              char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    const fcirk::EnsembleReport* r = entry(report, index);
    if (r == nullptr) return fail(FCIRK_E_INVALID_ARGUMENT, "no such report entry");
    return copy_text(fcirk::report_to_csv(*r), buffer, capacity, needed);
  });
}

void fcirk_report_free(fcirk_ensemble_report* report) { delete report; }

}  // extern "C"
