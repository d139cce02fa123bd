/*
 * C interface to the fcirk integration library.
 *
 * All functions return an fcirk_status; on failure a description of the
 * last error on the calling thread is available from fcirk_last_error().
 * Objects are opaque handles released with the matching *_free function.
 * States of the planetary model are passed as two arrays (hi, lo) whose sum
 * is the double-word value of each component; lo may be NULL on input,
 * meaning zero.
 */
#ifndef FCIRK_FCIRK_H
#define FCIRK_FCIRK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FCIRK_BUILDING)
#    define FCIRK_API __declspec(dllexport)
#  else
#    define FCIRK_API __declspec(dllimport)
#  endif
#else
#  define FCIRK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fcirk_status {
  FCIRK_OK = 0,
  FCIRK_E_DOMAIN = 1,           /* argument outside the mathematical domain */
  FCIRK_E_PARSE = 2,            /* malformed input file */
  FCIRK_E_UNIT = 3,             /* inconsistent units */
  FCIRK_E_SINGULAR = 4,         /* collision / singular configuration */
  FCIRK_E_SOLVER = 5,           /* Kepler solver failure */
  FCIRK_E_NONCONVERGENCE = 6,   /* stage iteration failed */
  FCIRK_E_NORMALIZATION = 7,    /* total momentum does not vanish */
  FCIRK_E_INVALID_ARGUMENT = 8,
  FCIRK_E_IO = 9,
  FCIRK_E_CANCELLED = 10,       /* sample callback asked to stop */
  FCIRK_E_INTERNAL = 11
} fcirk_status;

FCIRK_API const char* fcirk_last_error(void);
FCIRK_API const char* fcirk_status_name(fcirk_status status);
FCIRK_API const char* fcirk_version(void);

/* Decimal text of hi + lo with `digits` significant digits (1..40). */
FCIRK_API fcirk_status fcirk_format_dd(double hi, double lo, int digits,
                                       char* buffer, size_t capacity,
                                       size_t* needed);

/* ---- Gauss-Legendre tableaux ------------------------------------------ */

typedef struct fcirk_tableau fcirk_tableau;

FCIRK_API fcirk_status fcirk_tableau_gauss(int stages, fcirk_tableau** out);
FCIRK_API int fcirk_tableau_stages(const fcirk_tableau* tab);
FCIRK_API fcirk_status fcirk_tableau_residuals(const fcirk_tableau* tab,
                                               double* symplecticity,
                                               double* symmetry);
/* CSV text (c, b, a_1..a_s per row). Writes at most `capacity` bytes
 * including the terminating NUL; *needed receives the full size. */
FCIRK_API fcirk_status fcirk_tableau_csv(const fcirk_tableau* tab, char* buffer,
                                         size_t capacity, size_t* needed);
FCIRK_API void fcirk_tableau_free(fcirk_tableau* tab);

/* ---- Planetary model ---------------------------------------------------- */

typedef struct fcirk_model fcirk_model;

/* Loads an initial-condition JSON file (first body is the central mass). */
FCIRK_API fcirk_status fcirk_model_load(const char* path, int lax,
                                        fcirk_model** out);
FCIRK_API fcirk_status fcirk_model_parse(const char* json_text, int lax,
                                         fcirk_model** out);
FCIRK_API int fcirk_model_bodies(const fcirk_model* model);
FCIRK_API int fcirk_model_dim(const fcirk_model* model);
FCIRK_API const char* fcirk_model_body_name(const fcirk_model* model, int i);
/* Initial heliocentric state [Q_1, V_1, ..., Q_N, V_N]. */
FCIRK_API fcirk_status fcirk_model_initial_state(const fcirk_model* model,
                                                 double* hi, double* lo);
/* Energy and angular momentum of a state, evaluated in double-word. */
FCIRK_API fcirk_status fcirk_model_invariants(const fcirk_model* model,
                                              const double* hi,
                                              const double* lo, double* energy,
                                              double angular_momentum[3]);
FCIRK_API void fcirk_model_free(fcirk_model* model);

/* ---- Integration -------------------------------------------------------- */

typedef enum fcirk_family {
  FCIRK_FAMILY_FCIRK = 0,
  FCIRK_FAMILY_IRK = 1,             /* plain Gauss IRK, k + g */
  FCIRK_FAMILY_IRK_PARTITIONED = 2, /* same, partitioned sweeps */
  FCIRK_FAMILY_LAWSON = 3,
  FCIRK_FAMILY_LEAPFROG = 4,        /* half flow, midpoint on g, half flow */
  FCIRK_FAMILY_WH = 5,              /* half flow, split g, half flow */
  FCIRK_FAMILY_COMPOSED = 6         /* coefficient file over a base step */
} fcirk_family;

typedef enum fcirk_precision {
  FCIRK_PRECISION_WORKING = 0,
  FCIRK_PRECISION_MIXED = 1
} fcirk_precision;

typedef enum fcirk_init {
  FCIRK_INIT_ZERO = 0,
  FCIRK_INIT_PREVIOUS = 1
} fcirk_init;

typedef struct fcirk_config {
  fcirk_family family;
  int stages;                /* Gauss stages for IRK-type families */
  const char* coefficients;  /* coefficient file for FCIRK_FAMILY_COMPOSED */
  int composed_base;         /* 0: leapfrog with midpoint, 1: split g */
  double h;
  int64_t n_steps;
  int64_t m;                 /* sample every m steps */
  fcirk_precision precision;
  fcirk_init init_mode;
  int fp_max_iters;
  double fp_tol;
  int threads;
} fcirk_config;

FCIRK_API void fcirk_config_default(fcirk_config* cfg);

typedef struct fcirk_counters {
  int64_t perturbation_evals;
  int64_t flow_evals;
  int64_t rhs_flow_evals;
  int64_t jacT_evals;
  int64_t fixed_point_sweeps;
  int64_t steps;
} fcirk_counters;

typedef struct fcirk_sample {
  int64_t step;
  double t;
  int dim;
  const double* hi;
  const double* lo;
  double rel_energy_error;            /* (E - E0) / |E0| */
  double rel_angular_momentum_error;  /* |L - L0| / |L0| */
  fcirk_counters counters;
} fcirk_sample;

/* Return nonzero to stop the run (status FCIRK_E_CANCELLED). */
typedef int (*fcirk_sample_fn)(const fcirk_sample* sample, void* user);

typedef struct fcirk_summary {
  double t_final;
  int64_t steps;
  fcirk_counters counters;
  double max_rel_energy_error;            /* max |.| over samples */
  double max_rel_angular_momentum_error;
  double cpu_seconds;
  double wall_seconds;
  double last_good_time;   /* valid when a step failed */
  int64_t last_good_step;
} fcirk_summary;

/* Integrates from (t0, u0). u0_hi NULL selects the model's initial state.
 * final_hi / final_lo (dim entries each) may be NULL. */
FCIRK_API fcirk_status fcirk_integrate(const fcirk_model* model,
                                       const fcirk_config* cfg, double t0,
                                       const double* u0_hi,
                                       const double* u0_lo,
                                       fcirk_sample_fn on_sample, void* user,
                                       fcirk_summary* summary,
                                       double* final_hi, double* final_lo);

/* ---- Round-off ensembles ------------------------------------------------ */

typedef enum fcirk_quantity {
  FCIRK_QUANTITY_ENERGY = 0,
  FCIRK_QUANTITY_ANGULAR_MOMENTUM = 1
} fcirk_quantity;

typedef struct fcirk_ensemble_config {
  int P;
  double perturb_scale;
  const double* h_list;
  size_t h_count;
  double T;
  int64_t m;
  uint64_t seed;
  fcirk_quantity quantity;
} fcirk_ensemble_config;

typedef struct fcirk_ensemble_report fcirk_ensemble_report;

/* Runs the ensemble with the integrator described by `cfg` (its h and
 * n_steps are replaced per entry of h_list). */
FCIRK_API fcirk_status fcirk_ensemble(const fcirk_model* model,
                                      const fcirk_config* cfg,
                                      const fcirk_ensemble_config* ec,
                                      fcirk_ensemble_report** out);
FCIRK_API size_t fcirk_report_count(const fcirk_ensemble_report* report);
FCIRK_API fcirk_status fcirk_report_series(const fcirk_ensemble_report* report,
                                           size_t index, double* h,
                                           size_t* length, const double** t,
                                           const double** mu,
                                           const double** sigma);
/* FCIRK_E_DOMAIN if the series does not allow a fit. */
FCIRK_API fcirk_status fcirk_report_fit(const fcirk_ensemble_report* report,
                                        size_t index, double* exponent,
                                        double* amplitude);
FCIRK_API size_t fcirk_report_failures(const fcirk_ensemble_report* report,
                                       size_t index);
FCIRK_API fcirk_status fcirk_report_csv(const fcirk_ensemble_report* report,
                                        size_t index, char* buffer,
                                        size_t capacity, size_t* needed);
FCIRK_API void fcirk_report_free(fcirk_ensemble_report* report);

#ifdef __cplusplus
}
#endif

#endif /* FCIRK_FCIRK_H */
