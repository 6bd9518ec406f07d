/* C interface for the ljgibbs library: simulation of Gibbs point
 * processes (Poisson, Strauss, Lennard-Jones) and maximum
 * pseudo-likelihood estimation with sandwich confidence intervals.
 *
 * All functions returning int yield LJG_OK (0) on success or an error
 * code; ljg_last_error() describes the most recent failure on the
 * calling thread. Objects created by ljg_*_create/read functions must
 * be released with the matching ljg_*_free. Strings returned through
 * char** out-parameters must be released with ljg_string_free.
 */
#ifndef LJGIBBS_H
#define LJGIBBS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
  LJG_OK = 0,
  LJG_ERROR_INVALID_ARGUMENT = 1, /* bad parameters or argument combination */
  LJG_ERROR_GEOMETRY = 2,         /* window/border-correction violations */
  LJG_ERROR_NUMERICAL = 3,        /* non-convergence, singular matrices */
  LJG_ERROR_IO = 4,               /* unreadable or malformed files */
  LJG_ERROR_INTERNAL = 5
};

typedef struct ljg_model ljg_model;     /* model family + constants (+ theta/box) */
typedef struct ljg_pattern ljg_pattern; /* point pattern in a window */
typedef struct ljg_fit ljg_fit;         /* fit result */

typedef struct {
  double x_min, x_max, y_min, y_max;
} ljg_window;

/* Message for the last error on this thread (empty string if none). */
const char* ljg_last_error(void);

void ljg_string_free(char* s);

const char* ljg_version(void);

/* ---- models ------------------------------------------------------ */

/* Parse a model description, e.g.
 *   {"family":"strauss","R":0.08}
 *   {"family":"lennard_jones","D":0.25,
 *    "theta":[0.5,1.0,0.1],
 *    "box":{"lower":[-4,0.05,0.02],"upper":[2,5,0.2]}}
 * "theta" and "box" are optional and only needed for simulation and
 * fitting respectively. */
int ljg_model_from_json(const char* json_text, ljg_model** out);
int ljg_model_from_file(const char* path, ljg_model** out);
void ljg_model_free(ljg_model* m);

int ljg_model_param_dim(const ljg_model* m);
double ljg_model_interaction_range(const ljg_model* m);
/* 1 if the model has a finite interaction range (CI-capable). */
int ljg_model_finite_range(const ljg_model* m);
/* Fetch the optional embedded theta/box; LJG_ERROR_INVALID_ARGUMENT if
 * the model file did not carry them. Arrays are filled up to the
 * parameter dimension. */
int ljg_model_theta(const ljg_model* m, double theta[3]);
int ljg_model_box(const ljg_model* m, double lower[3], double upper[3]);

/* ---- patterns ---------------------------------------------------- */

int ljg_pattern_create(const double* xs, const double* ys, size_t n,
                       ljg_window window, ljg_pattern** out);
int ljg_pattern_read(const char* csv_path, const char* sidecar_path,
                     ljg_pattern** out);
int ljg_pattern_write(const ljg_pattern* pat, const char* csv_path,
                      const char* sidecar_path);
void ljg_pattern_free(ljg_pattern* p);

size_t ljg_pattern_size(const ljg_pattern* p);
ljg_window ljg_pattern_window(const ljg_pattern* p);
/* Copies n coordinates into caller-provided arrays (each of length at
 * least ljg_pattern_size). */
int ljg_pattern_points(const ljg_pattern* p, double* xs, double* ys);

/* ---- simulation -------------------------------------------------- */

typedef struct {
  uint64_t n_steps;   /* proposals after burn-in (required > 0) */
  int64_t burn_in;    /* -1: default 10*|window|*exp(-theta1) */
  double p_birth, p_death, p_move;
  double move_sigma;  /* <= 0: interaction range / 4 */
  uint64_t seed;
  uint64_t trace_every; /* energy trace stride, 0 disables */
} ljg_sampler_options;

ljg_sampler_options ljg_sampler_options_default(void);

/* Runs the birth-death-move chain; theta may be NULL to use the model
 * file's embedded theta. stats_json (optional) receives a JSON summary
 * of acceptance rates, counts and the energy trace. */
int ljg_simulate(const ljg_model* m, const double* theta, ljg_window window,
                 const ljg_sampler_options* opts, ljg_pattern** out_pattern,
                 char** stats_json);

/* ---- fitting ----------------------------------------------------- */

typedef struct {
  double grad_tol;       /* projected-gradient stop threshold */
  int max_iter;
  int n_starts;
  uint64_t seed;
  int want_ci;           /* 0 skips the variance stage */
  double level;          /* CI level, e.g. 0.95 */
  double cell_side;      /* variance cell side; <= 0: interaction range */
  double quad_per_range; /* dummy points per interaction range per axis */
  double resolution;     /* per-unit-length override; <= 0: derived */
  int threads;
} ljg_fit_options;

ljg_fit_options ljg_fit_options_default(void);

/* Maximum pseudo-likelihood fit. lower/upper may be NULL to use the
 * model file's embedded box. */
int ljg_fit_run(const ljg_pattern* pat, const ljg_model* m,
                const double* lower, const double* upper,
                const ljg_fit_options* opts, ljg_fit** out);
void ljg_fit_free(ljg_fit* f);

int ljg_fit_theta(const ljg_fit* f, double theta[3]);
int ljg_fit_converged(const ljg_fit* f);
/* Row-major p x p covariance into cov[9]. */
int ljg_fit_cov(const ljg_fit* f, double cov[9]);
/* Interval bounds per parameter; level receives the configured level.
 * LJG_ERROR_INVALID_ARGUMENT if the fit skipped the variance stage. */
int ljg_fit_ci(const ljg_fit* f, double lower[3], double upper[3],
               double* level);
int ljg_fit_to_json(const ljg_fit* f, char** out_json);

/* ---- diagnostics ------------------------------------------------- */

enum {
  LJG_TEST_CONSTANT = 0,
  LJG_TEST_LOCAL_ENERGY = 1,
  LJG_TEST_NEIGHBOR_COUNT = 2
};

/* Innovation residual of the pattern under (model, theta) for one test
 * function, on the window eroded by the interaction range.
 * quad_per_range <= 0 picks the default resolution. */
int ljg_gnz_residual(const ljg_pattern* pat, const ljg_model* m,
                     const double* theta, int test_function,
                     double quad_per_range, double* out);

/* All three residuals at once (constant, local_energy, neighbor_count). */
int ljg_gnz_residuals(const ljg_pattern* pat, const ljg_model* m,
                      const double* theta, double quad_per_range,
                      double out[3]);

/* Per-cell score breakdown at theta as JSON (the fit diagnostic). */
int ljg_score_breakdown(const ljg_pattern* pat, const ljg_model* m,
                        const double* theta, double quad_per_range,
                        double cell_side, char** out_json);

/* Eroded-and-aligned estimation window the fit and residual paths use:
 * erode by the interaction range, round down to cell_side multiples
 * (cell_side <= 0 picks the default). */
int ljg_default_estimation_window(const ljg_model* m, ljg_window observed,
                                  double cell_side, ljg_window* out);

#ifdef __cplusplus
}
#endif

#endif /* LJGIBBS_H */
