#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli_common.hpp"
#include "ljgibbs.h"

using nlohmann::json;

namespace cli {

void add_coverage(CLI::App& app, std::shared_ptr<GlobalOpts> g);

namespace {

struct ModelHandle {
  ljg_model* m = nullptr;
  ~ModelHandle() { ljg_model_free(m); }
};

struct PatternHandle {
  ljg_pattern* p = nullptr;
  ~PatternHandle() { ljg_pattern_free(p); }
};

struct FitHandle {
  ljg_fit* f = nullptr;
  ~FitHandle() { ljg_fit_free(f); }
};

// Validates an optional --theta list against the model dimension;
// returns nullptr when the flag was not given (embedded theta applies).
const double* theta_arg(const ModelHandle& model, const std::string& flag,
                        std::vector<double>& storage) {
  if (flag.empty()) return nullptr;
  storage = parse_doubles(flag, "--theta");
  int p = ljg_model_param_dim(model.m);
  if (static_cast<int>(storage.size()) != p)
    usage_error("--theta: expected " + std::to_string(p) +
                " values for this family, got " +
                std::to_string(storage.size()));
  storage.resize(3, 0.0);
  return storage.data();
}

// ---- simulate ----------------------------------------------------------

struct SimulateOpts {
  std::string model_path, window_arg, theta_arg, output = "pattern";
  ljg_sampler_options s = ljg_sampler_options_default();
};

void run_simulate(const GlobalOpts& g, const SimulateOpts& o) {
  ModelHandle model;
  check(ljg_model_from_file(o.model_path.c_str(), &model.m));
  ljg_window w = parse_window_arg(o.window_arg);
  std::vector<double> theta_store;
  const double* theta = theta_arg(model, o.theta_arg, theta_store);

  PatternHandle pat;
  CString stats;
  check(ljg_simulate(model.m, theta, w, &o.s, &pat.p, &stats.s));

  std::string csv = join_path(g.out_dir, o.output + ".csv");
  std::string side = join_path(g.out_dir, o.output + ".window.json");
  std::string stats_path = join_path(g.out_dir, o.output + ".stats.json");
  check(ljg_pattern_write(pat.p, csv.c_str(), side.c_str()));
  write_file(stats_path, stats.str() + "\n");
  std::printf("wrote %s (%zu points), %s, %s\n", csv.c_str(),
              ljg_pattern_size(pat.p), side.c_str(), stats_path.c_str());
}

void add_simulate(CLI::App& app, std::shared_ptr<GlobalOpts> g) {
  auto o = std::make_shared<SimulateOpts>();
  auto* cmd = app.add_subcommand(
      "simulate", "Sample a pattern from the model by birth-death-move");
  cmd->add_option("--model", o->model_path, "model JSON file")->required();
  cmd->add_option("--window", o->window_arg, "x_min,x_max,y_min,y_max")
      ->required();
  cmd->add_option("--theta", o->theta_arg,
                  "parameter values (default: model file \"theta\")");
  cmd->add_option("--steps", o->s.n_steps, "proposals after burn-in")
      ->capture_default_str();
  cmd->add_option("--burn-in", o->s.burn_in,
                  "proposals to discard (-1: automatic)")
      ->capture_default_str();
  cmd->add_option("--seed", o->s.seed, "random seed")->capture_default_str();
  cmd->add_option("--move-sigma", o->s.move_sigma,
                  "move proposal spread (<=0: range/4)");
  cmd->add_option("--trace-every", o->s.trace_every,
                  "energy trace stride (0 disables)")
      ->capture_default_str();
  cmd->add_option("--output", o->output, "output stem inside --out-dir")
      ->capture_default_str();
  cmd->callback([g, o] { run_simulate(*g, *o); });
}

// ---- fit ---------------------------------------------------------------

struct FitCmdOpts {
  std::string pattern_path, window_json, model_path, lower_arg, upper_arg;
  std::string output = "fit.json";
  ljg_fit_options f = ljg_fit_options_default();
  bool no_ci = false;
  double max_quad_gap = 0.01;
  bool no_refine_check = false;
};

ljg_fit* fit_once(const PatternHandle& pat, const ModelHandle& model,
                  const double* lo, const double* hi,
                  const ljg_fit_options& opts) {
  FitHandle fit;
  check(ljg_fit_run(pat.p, model.m, lo, hi, &opts, &fit.f));
  ljg_fit* out = fit.f;
  fit.f = nullptr;
  return out;
}

void run_fit(const GlobalOpts& g, const FitCmdOpts& o) {
  if (o.lower_arg.empty() != o.upper_arg.empty())
    usage_error("--lower and --upper must be given together");
  ModelHandle model;
  check(ljg_model_from_file(o.model_path.c_str(), &model.m));
  PatternHandle pat;
  std::string side =
      o.window_json.empty() ? sidecar_for(o.pattern_path) : o.window_json;
  check(ljg_pattern_read(o.pattern_path.c_str(), side.c_str(), &pat.p));

  const double *lo = nullptr, *hi = nullptr;
  std::vector<double> lo_store, hi_store;
  if (!o.lower_arg.empty()) {
    lo_store = parse_doubles(o.lower_arg, "--lower");
    hi_store = parse_doubles(o.upper_arg, "--upper");
    int p = ljg_model_param_dim(model.m);
    if (static_cast<int>(lo_store.size()) != p ||
        static_cast<int>(hi_store.size()) != p)
      usage_error("--lower/--upper: expected " + std::to_string(p) +
                  " values each");
    lo_store.resize(3, 0.0);
    hi_store.resize(3, 0.0);
    lo = lo_store.data();
    hi = hi_store.data();
  }

  ljg_fit_options opts = o.f;
  opts.want_ci = o.no_ci ? 0 : 1;
  FitHandle fit;
  fit.f = fit_once(pat, model, lo, hi, opts);
  CString fit_json;
  check(ljg_fit_to_json(fit.f, &fit_json.s));
  json report = json::parse(fit_json.str());

  // Successive-refinement check: refit with doubled dummy-point density
  // and require the attained log pseudo-likelihoods to agree.
  if (!o.no_refine_check && o.max_quad_gap > 0) {
    ljg_fit_options fine = opts;
    fine.want_ci = 0;
    if (fine.resolution > 0)
      fine.resolution *= 2;
    else
      fine.quad_per_range *= 2;
    FitHandle refit;
    refit.f = fit_once(pat, model, lo, hi, fine);
    CString fine_json;
    check(ljg_fit_to_json(refit.f, &fine_json.s));
    double lp = report.at("log_pl").get<double>();
    double lp_fine = json::parse(fine_json.str()).at("log_pl").get<double>();
    double gap = std::abs(lp_fine - lp) / std::max(1.0, std::abs(lp));
    report["diagnostics"]["quad_refinement"] = {
        {"log_pl", lp},
        {"refined_log_pl", lp_fine},
        {"relative_gap", gap},
        {"tolerance", o.max_quad_gap}};
    if (gap > o.max_quad_gap) {
      write_file(join_path(g.out_dir, o.output), report.dump(2) + "\n");
      std::fprintf(stderr,
                   "error: quadrature refinement gap %.3g exceeds %.3g; "
                   "increase --quad-resolution\n",
                   gap, o.max_quad_gap);
      throw Exit{kNumerical};
    }
  }

  std::string out_path = join_path(g.out_dir, o.output);
  write_file(out_path, report.dump(2) + "\n");
  double theta[3] = {0, 0, 0};
  check(ljg_fit_theta(fit.f, theta));
  int p = ljg_model_param_dim(model.m);
  std::string line = "theta_hat = (";
  for (int k = 0; k < p; ++k)
    line += (k ? ", " : "") + fmt17(theta[k]);
  line += ")";
  std::printf("%s  converged=%d  wrote %s\n", line.c_str(),
              ljg_fit_converged(fit.f), out_path.c_str());
}

void add_fit(CLI::App& app, std::shared_ptr<GlobalOpts> g) {
  auto o = std::make_shared<FitCmdOpts>();
  auto* cmd = app.add_subcommand(
      "fit", "Maximum pseudo-likelihood fit with sandwich intervals");
  cmd->add_option("--pattern", o->pattern_path, "pattern CSV")->required();
  cmd->add_option("--window-json", o->window_json,
                  "window sidecar (default: <pattern>.window.json)");
  cmd->add_option("--model", o->model_path, "model JSON file")->required();
  cmd->add_option("--lower", o->lower_arg,
                  "parameter box lower bounds (default: model file \"box\")");
  cmd->add_option("--upper", o->upper_arg, "parameter box upper bounds");
  cmd->add_flag("--no-ci", o->no_ci, "skip the variance/interval stage");
  cmd->add_option("--level", o->f.level, "confidence level")
      ->capture_default_str();
  cmd->add_option("--grad-tol", o->f.grad_tol, "gradient stop threshold")
      ->capture_default_str();
  cmd->add_option("--max-iter", o->f.max_iter, "iteration cap per start")
      ->capture_default_str();
  cmd->add_option("--starts", o->f.n_starts, "optimizer starts")
      ->capture_default_str();
  cmd->add_option("--seed", o->f.seed, "start-placement seed")
      ->capture_default_str();
  cmd->add_option("--cell-side", o->f.cell_side,
                  "variance cell side (<=0: interaction range)");
  cmd->add_option("--quad-resolution", o->f.quad_per_range,
                  "dummy points per interaction range per axis")
      ->capture_default_str();
  cmd->add_option("--resolution", o->f.resolution,
                  "dummy points per unit length (overrides --quad-resolution)");
  cmd->add_option("--threads", o->f.threads, "quadrature worker threads")
      ->capture_default_str();
  cmd->add_option("--max-quad-gap", o->max_quad_gap,
                  "largest allowed refinement gap in log_pl (relative)")
      ->capture_default_str();
  cmd->add_flag("--no-refinement-check", o->no_refine_check,
                "skip the doubled-resolution consistency refit");
  cmd->add_option("--output", o->output, "report file inside --out-dir")
      ->capture_default_str();
  cmd->callback([g, o] { run_fit(*g, *o); });
}

// ---- gnz ---------------------------------------------------------------

struct GnzOpts {
  std::string pattern_path, window_json, model_path, theta_arg;
  std::string output = "gnz.json";
  double quad_per_range = 0.0;  // 0: model default
  int replicates = 0;
  ljg_sampler_options s = ljg_sampler_options_default();
};

void run_gnz(const GlobalOpts& g, const GnzOpts& o) {
  ModelHandle model;
  check(ljg_model_from_file(o.model_path.c_str(), &model.m));
  PatternHandle pat;
  std::string side =
      o.window_json.empty() ? sidecar_for(o.pattern_path) : o.window_json;
  check(ljg_pattern_read(o.pattern_path.c_str(), side.c_str(), &pat.p));
  std::vector<double> theta_store;
  const double* theta = theta_arg(model, o.theta_arg, theta_store);

  double obs[3];
  check(ljg_gnz_residuals(pat.p, model.m, theta, o.quad_per_range, obs));

  const char* names[3] = {"constant", "local_energy", "neighbor_count"};
  json report;
  for (int k = 0; k < 3; ++k) report["residuals"][names[k]] = obs[k];

  if (o.replicates > 0) {
    // Monte-Carlo spread of the residuals under the model itself:
    // replicate chains on the same window at the same theta.
    std::vector<std::array<double, 3>> reps;
    ljg_window w = ljg_pattern_window(pat.p);
    for (int i = 0; i < o.replicates; ++i) {
      ljg_sampler_options s = o.s;
      s.seed = o.s.seed + (static_cast<uint64_t>(i) + 1) * kSeedStride;
      s.trace_every = 0;
      PatternHandle rep;
      check(ljg_simulate(model.m, theta, w, &s, &rep.p, nullptr));
      double r[3];
      check(ljg_gnz_residuals(rep.p, model.m, theta, o.quad_per_range, r));
      reps.push_back({r[0], r[1], r[2]});
    }
    report["replicates"] = o.replicates;
    for (int k = 0; k < 3; ++k) {
      double mean = 0;
      for (const auto& r : reps) mean += r[k];
      mean /= reps.size();
      double ss = 0;
      for (const auto& r : reps) ss += (r[k] - mean) * (r[k] - mean);
      double sd = reps.size() > 1 ? std::sqrt(ss / (reps.size() - 1)) : 0.0;
      report["mc_sd"][names[k]] = sd;
      if (sd > 0)
        report["studentized"][names[k]] = obs[k] / sd;
      else
        report["studentized"][names[k]] = nullptr;
    }
  }

  std::string out_path = join_path(g.out_dir, o.output);
  write_file(out_path, report.dump(2) + "\n");
  for (int k = 0; k < 3; ++k) {
    std::printf("%-15s residual % .6e", names[k], obs[k]);
    if (o.replicates > 0 && !report["studentized"][names[k]].is_null())
      std::printf("  studentized % .3f",
                  report["studentized"][names[k]].get<double>());
    std::printf("\n");
  }
  std::printf("wrote %s\n", out_path.c_str());
}

void add_gnz(CLI::App& app, std::shared_ptr<GlobalOpts> g) {
  auto o = std::make_shared<GnzOpts>();
  auto* cmd = app.add_subcommand(
      "gnz", "Innovation residuals of a pattern under a fitted model");
  cmd->add_option("--pattern", o->pattern_path, "pattern CSV")->required();
  cmd->add_option("--window-json", o->window_json,
                  "window sidecar (default: <pattern>.window.json)");
  cmd->add_option("--model", o->model_path, "model JSON file")->required();
  cmd->add_option("--theta", o->theta_arg,
                  "parameter values (default: model file \"theta\")");
  cmd->add_option("--quad-resolution", o->quad_per_range,
                  "dummy points per interaction range per axis (0: default)");
  cmd->add_option("--replicates", o->replicates,
                  "simulate this many chains for Monte-Carlo standard errors");
  cmd->add_option("--steps", o->s.n_steps, "proposals per replicate chain")
      ->capture_default_str();
  cmd->add_option("--burn-in", o->s.burn_in, "replicate chain burn-in")
      ->capture_default_str();
  cmd->add_option("--seed", o->s.seed, "replicate chain seed")
      ->capture_default_str();
  cmd->add_option("--output", o->output, "report file inside --out-dir")
      ->capture_default_str();
  cmd->callback([g, o] { run_gnz(*g, *o); });
}

// ---- diagnose ----------------------------------------------------------

struct DiagnoseOpts {
  std::string pattern_path, window_json, model_path, theta_arg;
  std::string output = "breakdown.json";
  double quad_per_range = 0.0;
  double cell_side = 0.0;
};

void run_diagnose(const GlobalOpts& g, const DiagnoseOpts& o) {
  ModelHandle model;
  check(ljg_model_from_file(o.model_path.c_str(), &model.m));
  PatternHandle pat;
  std::string side =
      o.window_json.empty() ? sidecar_for(o.pattern_path) : o.window_json;
  check(ljg_pattern_read(o.pattern_path.c_str(), side.c_str(), &pat.p));
  std::vector<double> theta_store;
  const double* theta = theta_arg(model, o.theta_arg, theta_store);

  CString breakdown;
  check(ljg_score_breakdown(pat.p, model.m, theta, o.quad_per_range,
                            o.cell_side, &breakdown.s));
  std::string out_path = join_path(g.out_dir, o.output);
  write_file(out_path, breakdown.str() + "\n");
  json j = json::parse(breakdown.str());
  std::printf("score cells: %zu  total = %s\nwrote %s\n",
              j.at("cells").size(), j.at("total").dump().c_str(),
              out_path.c_str());
}

void add_diagnose(CLI::App& app, std::shared_ptr<GlobalOpts> g) {
  auto o = std::make_shared<DiagnoseOpts>();
  auto* cmd = app.add_subcommand(
      "diagnose", "Per-cell score breakdown of the pseudo-likelihood");
  cmd->add_option("--pattern", o->pattern_path, "pattern CSV")->required();
  cmd->add_option("--window-json", o->window_json,
                  "window sidecar (default: <pattern>.window.json)");
  cmd->add_option("--model", o->model_path, "model JSON file")->required();
  cmd->add_option("--theta", o->theta_arg,
                  "parameter values (default: model file \"theta\")");
  cmd->add_option("--quad-resolution", o->quad_per_range,
                  "dummy points per interaction range per axis (0: default)");
  cmd->add_option("--cell-side", o->cell_side,
                  "partition cell side (<=0: interaction range)");
  cmd->add_option("--output", o->output, "report file inside --out-dir")
      ->capture_default_str();
  cmd->callback([g, o] { run_diagnose(*g, *o); });
}

}  // namespace
}  // namespace cli

int main(int argc, char** argv) {
  CLI::App app{
      "Gibbs point process toolkit: simulation, pseudo-likelihood fitting, "
      "residual diagnostics, coverage experiments"};
  app.require_subcommand(1);
  // Let global options (--out-dir) appear after the subcommand too.
  app.fallthrough();
  auto g = std::make_shared<cli::GlobalOpts>();
  app.add_option("--out-dir", g->out_dir, "directory for output files")
      ->envname("LJGIBBS_OUT_DIR")
      ->capture_default_str();

  cli::add_simulate(app, g);
  cli::add_fit(app, g);
  cli::add_gnz(app, g);
  cli::add_diagnose(app, g);
  cli::add_coverage(app, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsage;
  } catch (const cli::Exit& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return cli::kNumerical;
  }
  return 0;
}
