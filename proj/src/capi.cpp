#include "ljgibbs.h"

#include <cmath>
#include <cstring>
#include <exception>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ljgibbs/diagnostics.hpp"
#include "ljgibbs/errors.hpp"
#include "ljgibbs/geometry.hpp"
#include "ljgibbs/inference.hpp"
#include "ljgibbs/io.hpp"
#include "ljgibbs/model.hpp"
#include "ljgibbs/pseudolik.hpp"
#include "ljgibbs/quadrature.hpp"
#include "ljgibbs/sampler.hpp"

struct ljg_model {
  ljgibbs::ModelFile file;
};

struct ljg_pattern {
  ljgibbs::Configuration cfg;
};

struct ljg_fit {
  ljgibbs::FitResult result;
};

namespace {

thread_local std::string t_last_error;

int fail(int code, const char* msg) {
  t_last_error = msg;
  return code;
}

// Runs fn, mapping the library exception hierarchy onto error codes.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return LJG_OK;
  } catch (const ljgibbs::geometry_error& e) {
    return fail(LJG_ERROR_GEOMETRY, e.what());
  } catch (const ljgibbs::numerical_error& e) {
    return fail(LJG_ERROR_NUMERICAL, e.what());
  } catch (const ljgibbs::io_error& e) {
    return fail(LJG_ERROR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(LJG_ERROR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LJG_ERROR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LJG_ERROR_INTERNAL, e.what());
  }
}

int require(bool ok, const char* msg) {
  return ok ? LJG_OK : fail(LJG_ERROR_INVALID_ARGUMENT, msg);
}

ljgibbs::Window to_window(ljg_window w) {
  return ljgibbs::Window(w.x_min, w.x_max, w.y_min, w.y_max);
}

ljg_window from_window(const ljgibbs::Window& w) {
  return {w.x_min, w.x_max, w.y_min, w.y_max};
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Dummy-point density per unit length: a per-range request is divided by
// the interaction range; zero- or infinite-range models read it per unit.
double resolution_per_unit(const ljgibbs::ModelSpec& spec,
                           double quad_per_range) {
  if (quad_per_range <= 0.0) return ljgibbs::default_resolution(spec);
  double range = spec.interaction_range();
  if (range > 0.0 && std::isfinite(range)) return quad_per_range / range;
  return quad_per_range;
}

ljgibbs::Theta resolve_theta(const ljg_model* m, const double* theta) {
  if (theta) {
    ljgibbs::Theta t{theta[0], 0.0, 0.0};
    int p = m->file.spec.param_dim();
    if (p > 1) t.theta2 = theta[1];
    if (p > 2) t.theta3 = theta[2];
    return t;
  }
  if (!m->file.theta)
    throw std::invalid_argument(
        "no parameter vector: pass theta explicitly or embed \"theta\" in the "
        "model file");
  return *m->file.theta;
}

// Shared setup for the residual entry points. The estimation window is
// the observed window eroded by the interaction range.
struct ResidualSetup {
  ljgibbs::Window est;
  ljgibbs::QuadratureScheme quad;
};

ResidualSetup residual_setup(const ljg_pattern* pat,
                             const ljgibbs::ModelSpec& spec,
                             double quad_per_range) {
  double range = spec.interaction_range();
  if (!std::isfinite(range))
    throw ljgibbs::geometry_error(
        "infinite interaction range: set a truncation radius to evaluate "
        "residuals");
  ljgibbs::Window est = pat->cfg.window();
  if (range > 0.0) est = ljgibbs::erode(est, range);
  double res = resolution_per_unit(spec, quad_per_range);
  return {est, ljgibbs::make_stratified(est, res)};
}

}  // namespace

extern "C" {

const char* ljg_last_error(void) { return t_last_error.c_str(); }

void ljg_string_free(char* s) { delete[] s; }

const char* ljg_version(void) { return "1.0.0"; }

/* ---- models ------------------------------------------------------ */

int ljg_model_from_json(const char* json_text, ljg_model** out) {
  if (int rc = require(json_text && out, "null argument")) return rc;
  return guarded([&] {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ljgibbs::io_error("malformed JSON model text");
    *out = new ljg_model{ljgibbs::model_file_from_json(j)};
  });
}

int ljg_model_from_file(const char* path, ljg_model** out) {
  if (int rc = require(path && out, "null argument")) return rc;
  return guarded([&] { *out = new ljg_model{ljgibbs::read_model_file(path)}; });
}

void ljg_model_free(ljg_model* m) { delete m; }

int ljg_model_param_dim(const ljg_model* m) {
  return m ? m->file.spec.param_dim() : 0;
}

double ljg_model_interaction_range(const ljg_model* m) {
  return m ? m->file.spec.interaction_range() : 0.0;
}

int ljg_model_finite_range(const ljg_model* m) {
  return m && m->file.spec.finite_range() ? 1 : 0;
}

int ljg_model_theta(const ljg_model* m, double theta[3]) {
  if (int rc = require(m && theta, "null argument")) return rc;
  return guarded([&] {
    if (!m->file.theta)
      throw std::invalid_argument("model file carries no \"theta\"");
    ljgibbs::Vec3 v = m->file.theta->as_vec();
    for (int k = 0; k < m->file.spec.param_dim(); ++k) theta[k] = v[k];
  });
}

int ljg_model_box(const ljg_model* m, double lower[3], double upper[3]) {
  if (int rc = require(m && lower && upper, "null argument")) return rc;
  return guarded([&] {
    if (!m->file.box)
      throw std::invalid_argument("model file carries no \"box\"");
    for (int k = 0; k < m->file.spec.param_dim(); ++k) {
      lower[k] = m->file.box->lower[k];
      upper[k] = m->file.box->upper[k];
    }
  });
}

/* ---- patterns ---------------------------------------------------- */

int ljg_pattern_create(const double* xs, const double* ys, size_t n,
                       ljg_window window, ljg_pattern** out) {
  if (int rc = require(out && (n == 0 || (xs && ys)), "null argument"))
    return rc;
  return guarded([&] {
    std::vector<ljgibbs::Point> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i] = {xs[i], ys[i]};
    *out = new ljg_pattern{
        ljgibbs::Configuration(std::move(pts), to_window(window))};
  });
}

int ljg_pattern_read(const char* csv_path, const char* sidecar_path,
                     ljg_pattern** out) {
  if (int rc = require(csv_path && sidecar_path && out, "null argument"))
    return rc;
  return guarded([&] {
    *out = new ljg_pattern{ljgibbs::read_pattern(csv_path, sidecar_path)};
  });
}

int ljg_pattern_write(const ljg_pattern* pat, const char* csv_path,
                      const char* sidecar_path) {
  if (int rc = require(pat && csv_path && sidecar_path, "null argument"))
    return rc;
  return guarded(
      [&] { ljgibbs::write_pattern(pat->cfg, csv_path, sidecar_path); });
}

void ljg_pattern_free(ljg_pattern* p) { delete p; }

size_t ljg_pattern_size(const ljg_pattern* p) { return p ? p->cfg.size() : 0; }

ljg_window ljg_pattern_window(const ljg_pattern* p) {
  return p ? from_window(p->cfg.window()) : ljg_window{0, 0, 0, 0};
}

int ljg_pattern_points(const ljg_pattern* p, double* xs, double* ys) {
  if (int rc = require(p && xs && ys, "null argument")) return rc;
  const auto& pts = p->cfg.points();
  for (size_t i = 0; i < pts.size(); ++i) {
    xs[i] = pts[i].x;
    ys[i] = pts[i].y;
  }
  t_last_error.clear();
  return LJG_OK;
}

/* ---- simulation -------------------------------------------------- */

ljg_sampler_options ljg_sampler_options_default(void) {
  ljgibbs::SamplerConfig d;
  ljg_sampler_options o;
  o.n_steps = 100000;
  o.burn_in = d.burn_in;
  o.p_birth = d.p_birth;
  o.p_death = d.p_death;
  o.p_move = d.p_move;
  o.move_sigma = d.move_sigma;
  o.seed = d.seed;
  o.trace_every = d.trace_every;
  return o;
}

int ljg_simulate(const ljg_model* m, const double* theta, ljg_window window,
                 const ljg_sampler_options* opts, ljg_pattern** out_pattern,
                 char** stats_json) {
  if (int rc = require(m && out_pattern, "null argument")) return rc;
  return guarded([&] {
    ljg_sampler_options o = opts ? *opts : ljg_sampler_options_default();
    ljgibbs::SamplerConfig cfg;
    cfg.n_steps = o.n_steps;
    cfg.burn_in = o.burn_in;
    cfg.p_birth = o.p_birth;
    cfg.p_death = o.p_death;
    cfg.p_move = o.p_move;
    cfg.move_sigma = o.move_sigma;
    cfg.seed = o.seed;
    cfg.trace_every = o.trace_every;
    auto [pattern, stats] = ljgibbs::simulate(
        m->file.spec, resolve_theta(m, theta), to_window(window), cfg);
    if (stats_json)
      *stats_json = dup_string(ljgibbs::chain_stats_to_json(stats).dump(2));
    *out_pattern = new ljg_pattern{std::move(pattern)};
  });
}

/* ---- fitting ----------------------------------------------------- */

ljg_fit_options ljg_fit_options_default(void) {
  ljgibbs::FitOptions d;
  ljg_fit_options o;
  o.grad_tol = d.grad_tol;
  o.max_iter = d.max_iter;
  o.n_starts = d.n_starts;
  o.seed = d.seed;
  o.want_ci = d.want_variance ? 1 : 0;
  o.level = d.level;
  o.cell_side = d.cell_side;
  o.quad_per_range = d.quad_per_range;
  o.resolution = d.resolution;
  o.threads = d.threads;
  return o;
}

int ljg_fit_run(const ljg_pattern* pat, const ljg_model* m,
                const double* lower, const double* upper,
                const ljg_fit_options* opts, ljg_fit** out) {
  if (int rc = require(pat && m && out, "null argument")) return rc;
  if (int rc = require(!lower == !upper,
                       "lower and upper bounds must be given together"))
    return rc;
  return guarded([&] {
    ljgibbs::ParameterBox box;
    if (lower) {
      for (int k = 0; k < m->file.spec.param_dim(); ++k) {
        box.lower[k] = lower[k];
        box.upper[k] = upper[k];
      }
    } else if (m->file.box) {
      box = *m->file.box;
    } else {
      throw std::invalid_argument(
          "no parameter box: pass bounds explicitly or embed \"box\" in the "
          "model file");
    }
    ljg_fit_options o = opts ? *opts : ljg_fit_options_default();
    ljgibbs::FitOptions fo;
    fo.grad_tol = o.grad_tol;
    fo.max_iter = o.max_iter;
    fo.n_starts = o.n_starts;
    fo.seed = o.seed;
    fo.want_variance = o.want_ci != 0;
    fo.level = o.level;
    fo.cell_side = o.cell_side;
    fo.quad_per_range = o.quad_per_range;
    fo.resolution = o.resolution;
    fo.threads = o.threads;
    *out = new ljg_fit{ljgibbs::fit_mple_auto(pat->cfg, m->file.spec, box, fo)};
  });
}

void ljg_fit_free(ljg_fit* f) { delete f; }

int ljg_fit_theta(const ljg_fit* f, double theta[3]) {
  if (int rc = require(f && theta, "null argument")) return rc;
  ljgibbs::Vec3 v = f->result.theta_hat.as_vec();
  for (int k = 0; k < f->result.p; ++k) theta[k] = v[k];
  t_last_error.clear();
  return LJG_OK;
}

int ljg_fit_converged(const ljg_fit* f) {
  return f && f->result.opt.converged ? 1 : 0;
}

int ljg_fit_cov(const ljg_fit* f, double cov[9]) {
  if (int rc = require(f && cov, "null argument")) return rc;
  return guarded([&] {
    if (!f->result.has_ci)
      throw std::invalid_argument("fit was run without the variance stage");
    int p = f->result.p;
    for (int j = 0; j < p; ++j)
      for (int k = 0; k < p; ++k) cov[j * p + k] = f->result.cov[j][k];
  });
}

int ljg_fit_ci(const ljg_fit* f, double lower[3], double upper[3],
               double* level) {
  if (int rc = require(f && lower && upper, "null argument")) return rc;
  return guarded([&] {
    if (!f->result.has_ci)
      throw std::invalid_argument("fit was run without the variance stage");
    for (int k = 0; k < f->result.p; ++k) {
      lower[k] = f->result.ci[k][0];
      upper[k] = f->result.ci[k][1];
    }
    if (level) *level = f->result.level;
  });
}

int ljg_fit_to_json(const ljg_fit* f, char** out_json) {
  if (int rc = require(f && out_json, "null argument")) return rc;
  return guarded([&] {
    *out_json = dup_string(ljgibbs::fit_result_to_json(f->result).dump(2));
  });
}

/* ---- diagnostics ------------------------------------------------- */

int ljg_gnz_residual(const ljg_pattern* pat, const ljg_model* m,
                     const double* theta, int test_function,
                     double quad_per_range, double* out) {
  if (int rc = require(pat && m && out, "null argument")) return rc;
  return guarded([&] {
    ljgibbs::TestFunction h;
    switch (test_function) {
      case LJG_TEST_CONSTANT: h = ljgibbs::TestFunction::constant; break;
      case LJG_TEST_LOCAL_ENERGY:
        h = ljgibbs::TestFunction::local_energy;
        break;
      case LJG_TEST_NEIGHBOR_COUNT:
        h = ljgibbs::TestFunction::neighbor_count;
        break;
      default: throw std::invalid_argument("unknown test function id");
    }
    ResidualSetup s = residual_setup(pat, m->file.spec, quad_per_range);
    *out = ljgibbs::gnz_residual(pat->cfg, m->file.spec,
                                 resolve_theta(m, theta), h, s.est, s.quad);
  });
}

int ljg_gnz_residuals(const ljg_pattern* pat, const ljg_model* m,
                      const double* theta, double quad_per_range,
                      double out[3]) {
  if (int rc = require(pat && m && out, "null argument")) return rc;
  return guarded([&] {
    ResidualSetup s = residual_setup(pat, m->file.spec, quad_per_range);
    auto r = ljgibbs::gnz_residuals(pat->cfg, m->file.spec,
                                    resolve_theta(m, theta), s.est, s.quad);
    out[0] = r[0];
    out[1] = r[1];
    out[2] = r[2];
  });
}

int ljg_score_breakdown(const ljg_pattern* pat, const ljg_model* m,
                        const double* theta, double quad_per_range,
                        double cell_side, char** out_json) {
  if (int rc = require(pat && m && out_json, "null argument")) return rc;
  return guarded([&] {
    const auto& spec = m->file.spec;
    double range = spec.interaction_range();
    if (!std::isfinite(range))
      throw ljgibbs::geometry_error(
          "infinite interaction range: set a truncation radius to evaluate "
          "the score breakdown");
    double cell = cell_side;
    if (cell <= 0.0) {
      const auto& w = pat->cfg.window();
      cell = range > 0.0 ? range : std::min(w.width(), w.height()) / 8.0;
    }
    ljgibbs::Window est =
        ljgibbs::default_estimation_window(pat->cfg.window(), range, cell);
    auto quad = ljgibbs::make_stratified(
        est, resolution_per_unit(spec, quad_per_range));
    ljgibbs::PseudoLikEvaluator eval(pat->cfg, spec, est, quad);
    auto partition = ljgibbs::build_partition(est, cell);
    auto breakdown = eval.breakdown(resolve_theta(m, theta), partition);
    *out_json = dup_string(
        ljgibbs::breakdown_to_json(breakdown, spec.param_dim()).dump(2));
  });
}

int ljg_default_estimation_window(const ljg_model* m, ljg_window observed,
                                  double cell_side, ljg_window* out) {
  if (int rc = require(m && out, "null argument")) return rc;
  return guarded([&] {
    const auto& spec = m->file.spec;
    double range = spec.interaction_range();
    if (!std::isfinite(range))
      throw ljgibbs::geometry_error(
          "infinite interaction range: set a truncation radius first");
    ljgibbs::Window obs = to_window(observed);
    double cell = cell_side;
    if (cell <= 0.0)
      cell = range > 0.0 ? range
                         : std::min(obs.width(), obs.height()) / 8.0;
    *out = from_window(ljgibbs::default_estimation_window(obs, range, cell));
  });
}

}  // extern "C"
