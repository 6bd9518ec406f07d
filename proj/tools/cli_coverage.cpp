#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli_common.hpp"
#include "ljgibbs.h"

using nlohmann::json;

namespace cli {
namespace {

struct Plan {
  json model_json;
  std::string model_text;
  int p = 1;
  std::array<double, 3> theta_star{};
  std::vector<double> sides;
  int replicates = 1;
  double level = 0.95;
  uint64_t seed = 0;
  std::array<double, 3> lower{}, upper{};
  ljg_sampler_options sim = ljg_sampler_options_default();
  ljg_fit_options fit = ljg_fit_options_default();
};

[[noreturn]] void plan_error(const std::string& field, const std::string& msg) {
  usage_error("plan." + field + ": " + msg);
}

double plan_number(const json& j, const std::string& field) {
  if (!j.is_number()) plan_error(field, "expected a number");
  return j.get<double>();
}

Plan parse_plan(const std::string& path, ljg_model** model_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) usage_error("cannot open plan file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) usage_error("malformed JSON in plan file '" + path + "'");
  if (!j.is_object()) usage_error("plan file must hold a JSON object");

  Plan plan;
  if (!j.contains("model")) plan_error("model", "missing");
  plan.model_json = j["model"];
  plan.model_text = plan.model_json.dump();
  check(ljg_model_from_json(plan.model_text.c_str(), model_out));
  plan.p = ljg_model_param_dim(*model_out);
  if (!ljg_model_finite_range(*model_out))
    plan_error("model",
               "coverage intervals need a finite interaction range; set "
               "\"truncation_radius\" or a finite \"D\"");

  if (!j.contains("theta_star") || !j["theta_star"].is_array() ||
      static_cast<int>(j["theta_star"].size()) != plan.p)
    plan_error("theta_star",
               "expected an array of " + std::to_string(plan.p) + " numbers");
  for (int k = 0; k < plan.p; ++k)
    plan.theta_star[k] = plan_number(j["theta_star"][k], "theta_star");

  if (!j.contains("window_sides") || !j["window_sides"].is_array() ||
      j["window_sides"].empty())
    plan_error("window_sides", "expected a non-empty array of side lengths");
  for (const auto& s : j["window_sides"]) {
    double side = plan_number(s, "window_sides");
    if (side <= 0) plan_error("window_sides", "sides must be positive");
    if (!plan.sides.empty() && side <= plan.sides.back())
      plan_error("window_sides", "window areas must be strictly increasing");
    plan.sides.push_back(side);
  }

  if (j.contains("replicates")) {
    if (!j["replicates"].is_number_integer() ||
        j["replicates"].get<int64_t>() < 1)
      plan_error("replicates", "must be a positive integer");
    plan.replicates = j["replicates"].get<int>();
  }
  if (j.contains("level")) {
    plan.level = plan_number(j["level"], "level");
    if (!(plan.level > 0 && plan.level < 1))
      plan_error("level", "must lie strictly between 0 and 1");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) plan_error("seed", "expected an integer");
    plan.seed = j["seed"].get<uint64_t>();
  }

  if (j.contains("box")) {
    const json& b = j["box"];
    if (!b.is_object() || !b.contains("lower") || !b.contains("upper") ||
        static_cast<int>(b["lower"].size()) != plan.p ||
        static_cast<int>(b["upper"].size()) != plan.p)
      plan_error("box", "expected {\"lower\": [...], \"upper\": [...]} with " +
                            std::to_string(plan.p) + " entries each");
    for (int k = 0; k < plan.p; ++k) {
      plan.lower[k] = plan_number(b["lower"][k], "box.lower");
      plan.upper[k] = plan_number(b["upper"][k], "box.upper");
    }
  } else if (ljg_model_box(*model_out, plan.lower.data(), plan.upper.data()) !=
             LJG_OK) {
    plan_error("box", "missing and the model carries no \"box\"");
  }

  plan.sim.trace_every = 0;
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    if (!s.is_object()) plan_error("sampler", "expected an object");
    if (s.contains("steps"))
      plan.sim.n_steps = static_cast<uint64_t>(
          plan_number(s["steps"], "sampler.steps"));
    if (s.contains("burn_in"))
      plan.sim.burn_in = static_cast<int64_t>(
          plan_number(s["burn_in"], "sampler.burn_in"));
    if (s.contains("move_sigma"))
      plan.sim.move_sigma = plan_number(s["move_sigma"], "sampler.move_sigma");
  }

  plan.fit.want_ci = 1;
  plan.fit.level = plan.level;
  if (j.contains("fit")) {
    const json& f = j["fit"];
    if (!f.is_object()) plan_error("fit", "expected an object");
    if (f.contains("grad_tol"))
      plan.fit.grad_tol = plan_number(f["grad_tol"], "fit.grad_tol");
    if (f.contains("max_iter"))
      plan.fit.max_iter =
          static_cast<int>(plan_number(f["max_iter"], "fit.max_iter"));
    if (f.contains("starts"))
      plan.fit.n_starts =
          static_cast<int>(plan_number(f["starts"], "fit.starts"));
    if (f.contains("quad_per_range"))
      plan.fit.quad_per_range =
          plan_number(f["quad_per_range"], "fit.quad_per_range");
    if (f.contains("resolution"))
      plan.fit.resolution = plan_number(f["resolution"], "fit.resolution");
    if (f.contains("cell_side"))
      plan.fit.cell_side = plan_number(f["cell_side"], "fit.cell_side");
    if (f.contains("threads"))
      plan.fit.threads =
          static_cast<int>(plan_number(f["threads"], "fit.threads"));
  }
  return plan;
}

struct RepResult {
  bool ok = false;
  bool converged = false;
  std::string error;
  size_t n_points = 0;
  std::array<double, 3> theta{}, se{}, lo{}, hi{};
  std::array<bool, 3> covered{};
};

RepResult run_replicate(const Plan& plan, const ljg_model* model,
                        size_t window_index, size_t flat_index) {
  RepResult r;
  double side = plan.sides[window_index];
  ljg_window w{0, side, 0, side};
  ljg_sampler_options sim = plan.sim;
  sim.seed = plan.seed + (flat_index + 1) * kSeedStride;

  ljg_pattern* pat = nullptr;
  int rc = ljg_simulate(model, plan.theta_star.data(), w, &sim, &pat, nullptr);
  if (rc != LJG_OK) {
    r.error = ljg_last_error();
    return r;
  }
  r.n_points = ljg_pattern_size(pat);

  ljg_fit_options fo = plan.fit;
  fo.seed = sim.seed ^ 0x94D049BB133111EBull;
  ljg_fit* fit = nullptr;
  rc = ljg_fit_run(pat, model, plan.lower.data(), plan.upper.data(), &fo, &fit);
  ljg_pattern_free(pat);
  if (rc != LJG_OK) {
    r.error = ljg_last_error();
    return r;
  }
  double cov[9] = {0};
  double level = 0;
  if (ljg_fit_theta(fit, r.theta.data()) == LJG_OK &&
      ljg_fit_cov(fit, cov) == LJG_OK &&
      ljg_fit_ci(fit, r.lo.data(), r.hi.data(), &level) == LJG_OK) {
    r.ok = true;
    r.converged = ljg_fit_converged(fit) != 0;
    for (int k = 0; k < plan.p; ++k) {
      r.se[k] = std::sqrt(std::max(cov[k * plan.p + k], 0.0));
      r.covered[k] =
          r.lo[k] <= plan.theta_star[k] && plan.theta_star[k] <= r.hi[k];
    }
  } else {
    r.error = ljg_last_error();
  }
  ljg_fit_free(fit);
  return r;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sample skewness and excess kurtosis from central moments.
void shape_stats(const std::vector<double>& v, json& skew_out, json& kurt_out) {
  size_t n = v.size();
  skew_out = nullptr;
  kurt_out = nullptr;
  if (n < 4) return;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : v) {
    double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 <= 0) return;
  skew_out = m3 / std::pow(m2, 1.5);
  kurt_out = m4 / (m2 * m2) - 3.0;
}

struct CoverageOpts {
  std::string plan_path;
  int jobs = 1;
};

void run_coverage(const GlobalOpts& g, const CoverageOpts& o) {
  ljg_model* model = nullptr;
  Plan plan = parse_plan(o.plan_path, &model);
  std::shared_ptr<ljg_model> model_guard(model, ljg_model_free);

  size_t n_windows = plan.sides.size();
  size_t total = n_windows * static_cast<size_t>(plan.replicates);
  std::vector<RepResult> results(total);

  int jobs = std::max(1, o.jobs);
  jobs = static_cast<int>(
      std::min<size_t>(static_cast<size_t>(jobs), total));
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      size_t k = next.fetch_add(1);
      if (k >= total) return;
      results[k] = run_replicate(plan, model, k / plan.replicates, k);
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Replicate table, one ordered row per (window, replicate).
  std::string csv = "window_side,replicate,status,n_points,converged";
  for (int k = 1; k <= plan.p; ++k) {
    std::string s = std::to_string(k);
    csv += ",theta" + s + ",se" + s + ",lo" + s + ",hi" + s + ",covered" + s;
  }
  csv += "\n";
  size_t n_failed = 0;
  std::vector<std::string> failures;
  for (size_t k = 0; k < total; ++k) {
    const RepResult& r = results[k];
    size_t wi = k / plan.replicates, ri = k % plan.replicates;
    csv += fmt17(plan.sides[wi]) + "," + std::to_string(ri) + "," +
           (r.ok ? "ok" : "failed") + "," + std::to_string(r.n_points) + "," +
           (r.ok ? (r.converged ? "1" : "0") : "");
    for (int q = 0; q < plan.p; ++q) {
      if (r.ok)
        csv += "," + fmt17(r.theta[q]) + "," + fmt17(r.se[q]) + "," +
               fmt17(r.lo[q]) + "," + fmt17(r.hi[q]) + "," +
               (r.covered[q] ? "1" : "0");
      else
        csv += ",,,,,";
    }
    csv += "\n";
    if (!r.ok) {
      ++n_failed;
      if (failures.size() < 10)
        failures.push_back("side " + fmt17(plan.sides[wi]) + " replicate " +
                           std::to_string(ri) + ": " + r.error);
    }
  }

  json summary;
  summary["model"] = plan.model_json;
  summary["theta_star"] =
      std::vector<double>(plan.theta_star.begin(),
                          plan.theta_star.begin() + plan.p);
  summary["replicates"] = plan.replicates;
  summary["level"] = plan.level;
  summary["seed"] = plan.seed;

  std::vector<std::vector<double>> rmse_by_window(
      plan.p), medabs_by_window(plan.p);
  summary["windows"] = json::array();
  for (size_t wi = 0; wi < n_windows; ++wi) {
    json jw;
    jw["side"] = plan.sides[wi];
    size_t ok = 0;
    for (int ri = 0; ri < plan.replicates; ++ri)
      if (results[wi * plan.replicates + ri].ok) ++ok;
    jw["n_ok"] = ok;
    jw["n_failed"] = plan.replicates - static_cast<int>(ok);
    jw["params"] = json::array();
    for (int q = 0; q < plan.p; ++q) {
      std::vector<double> err, abs_err, halfw, stud;
      size_t cov_hits = 0;
      for (int ri = 0; ri < plan.replicates; ++ri) {
        const RepResult& r = results[wi * plan.replicates + ri];
        if (!r.ok) continue;
        double e = r.theta[q] - plan.theta_star[q];
        err.push_back(e);
        abs_err.push_back(std::abs(e));
        halfw.push_back(0.5 * (r.hi[q] - r.lo[q]));
        if (r.se[q] > 0) stud.push_back(e / r.se[q]);
        if (r.covered[q]) ++cov_hits;
      }
      json jp;
      if (err.empty()) {
        jp["bias"] = nullptr;
        jp["rmse"] = nullptr;
        jp["median_abs_error"] = nullptr;
        jp["mean_ci_half_width"] = nullptr;
      } else {
        double bias = 0, mse = 0, mw = 0;
        for (double e : err) {
          bias += e;
          mse += e * e;
        }
        for (double h : halfw) mw += h;
        bias /= err.size();
        mse /= err.size();
        mw /= halfw.size();
        jp["bias"] = bias;
        jp["rmse"] = std::sqrt(mse);
        jp["median_abs_error"] = median(abs_err);
        jp["mean_ci_half_width"] = mw;
        rmse_by_window[q].push_back(std::sqrt(mse));
        medabs_by_window[q].push_back(median(abs_err));
      }
      // Coverage needs repetition to mean anything.
      if (plan.replicates < 2 || err.size() < 2)
        jp["coverage"] = nullptr;
      else
        jp["coverage"] = static_cast<double>(cov_hits) / err.size();
      shape_stats(stud, jp["studentized_skewness"],
                  jp["studentized_excess_kurtosis"]);
      jw["params"].push_back(jp);
    }
    summary["windows"].push_back(jw);
  }

  if (n_windows >= 2) {
    auto decreasing = [&](const std::vector<std::vector<double>>& seq) {
      json out = json::array();
      for (int q = 0; q < plan.p; ++q) {
        if (seq[q].size() != n_windows) {
          out.push_back(nullptr);
          continue;
        }
        bool dec = true;
        for (size_t wi = 1; wi < n_windows; ++wi)
          dec = dec && seq[q][wi] < seq[q][wi - 1];
        out.push_back(dec);
      }
      return out;
    };
    summary["rmse_strictly_decreasing"] = decreasing(rmse_by_window);
    summary["median_abs_error_strictly_decreasing"] =
        decreasing(medabs_by_window);
  }
  double failed_fraction = static_cast<double>(n_failed) / total;
  summary["failed_fraction"] = failed_fraction;
  summary["failures"] = failures;

  std::string csv_path = join_path(g.out_dir, "replicates.csv");
  std::string sum_path = join_path(g.out_dir, "summary.json");
  write_file(csv_path, csv);
  write_file(sum_path, summary.dump(2) + "\n");
  for (size_t wi = 0; wi < n_windows; ++wi) {
    const json& jw = summary["windows"][wi];
    std::string line = "side " + fmt17(plan.sides[wi]) + ": " +
                       jw["n_ok"].dump() + " ok, " + jw["n_failed"].dump() +
                       " failed";
    for (int q = 0; q < plan.p; ++q) {
      const json& jp = jw["params"][q];
      line += "  rmse" + std::to_string(q + 1) + "=" + jp["rmse"].dump();
      if (!jp["coverage"].is_null())
        line += " cov" + std::to_string(q + 1) + "=" + jp["coverage"].dump();
    }
    std::printf("%s\n", line.c_str());
  }
  std::printf("wrote %s, %s\n", csv_path.c_str(), sum_path.c_str());

  if (failed_fraction > 0.05) {
    std::fprintf(stderr,
                 "error: %zu of %zu replicates failed (%.1f%% > 5%%)\n",
                 n_failed, total, 100.0 * failed_fraction);
    throw Exit{kNumerical};
  }
}

}  // namespace

void add_coverage(CLI::App& app, std::shared_ptr<GlobalOpts> g) {
  auto o = std::make_shared<CoverageOpts>();
  auto* cmd = app.add_subcommand(
      "coverage",
      "Simulate-and-refit experiment: RMSE, interval coverage, normality");
  cmd->add_option("--plan", o->plan_path, "experiment plan JSON")->required();
  cmd->add_option("--jobs", o->jobs, "parallel replicate workers")
      ->capture_default_str();
  cmd->callback([g, o] { run_coverage(*g, *o); });
}

}  // namespace cli
