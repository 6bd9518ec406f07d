#include "ljgibbs/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ljgibbs/errors.hpp"

namespace ljgibbs {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double parse_double(std::string_view text, const std::string& path,
                    std::size_t line) {
  double value = 0.0;
  const char* b = text.data();
  const char* e = b + text.size();
  const auto [ptr, ec] = std::from_chars(b, e, value);
  if (ec != std::errc() || ptr != e) {
    std::ostringstream msg;
    msg << path << ":" << line << ": cannot parse number \"" << text << "\"";
    throw io_error(msg.str());
  }
  return value;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double number_or_inf(const json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "infinity") {
      return std::numeric_limits<double>::infinity();
    }
  }
  throw io_error("field \"" + field + "\" must be a number or \"inf\"");
}

const json& require_field(const json& j, const std::string& field) {
  const auto it = j.find(field);
  if (it == j.end()) throw io_error("missing field \"" + field + "\"");
  return *it;
}

}  // namespace

Configuration read_pattern(const std::string& csv_path,
                           const std::string& sidecar_path) {
  const json sidecar = read_json_file(sidecar_path);
  const Window window = window_from_json(require_field(sidecar, "window"));

  const std::string text = read_file(csv_path);
  std::vector<Point> points;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != "x,y") {
        throw io_error(csv_path + ": expected header \"x,y\", got \"" +
                       std::string(line) + "\"");
      }
      continue;
    }
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) {
      std::ostringstream msg;
      msg << csv_path << ":" << line_no << ": expected two comma-separated "
          << "columns";
      throw io_error(msg.str());
    }
    points.push_back({parse_double(line.substr(0, comma), csv_path, line_no),
                      parse_double(line.substr(comma + 1), csv_path, line_no)});
  }
  try {
    return Configuration(std::move(points), window);
  } catch (const std::invalid_argument& err) {
    throw io_error(csv_path + ": " + err.what());
  }
}

void write_pattern(const Configuration& cfg, const std::string& csv_path,
                   const std::string& sidecar_path) {
  std::ostringstream out;
  out << "x,y\n";
  for (const Point p : cfg.points()) {
    out << fmt17(p.x) << "," << fmt17(p.y) << "\n";
  }
  write_text_file(out.str(), csv_path);

  json sidecar;
  sidecar["window"] = window_to_json(cfg.window());
  write_json_file(sidecar, sidecar_path);
}

Window window_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw io_error("window must be an array [x_min, x_max, y_min, y_max]");
  }
  for (const auto& v : j) {
    if (!v.is_number()) throw io_error("window bounds must be numbers");
  }
  try {
    return Window(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                  j[3].get<double>());
  } catch (const std::invalid_argument& err) {
    throw io_error(std::string("invalid window: ") + err.what());
  }
}

json window_to_json(const Window& w) {
  return json::array({w.x_min, w.x_max, w.y_min, w.y_max});
}

ModelSpec model_from_json(const json& j) {
  if (!j.is_object()) throw io_error("model must be a JSON object");
  ModelSpec spec;
  try {
    spec.family =
        family_from_name(require_field(j, "family").get<std::string>());
    switch (spec.family) {
      case Family::poisson:
        break;
      case Family::strauss:
        spec.strauss_radius = require_field(j, "R").get<double>();
        break;
      case Family::lennard_jones:
        spec.lj_range = number_or_inf(require_field(j, "D"), "D");
        if (j.contains("truncation_radius")) {
          spec.truncation_radius = j["truncation_radius"].get<double>();
        }
        break;
    }
    spec.validate();
  } catch (const json::exception& err) {
    throw io_error(std::string("invalid model: ") + err.what());
  } catch (const std::invalid_argument& err) {
    throw io_error(std::string("invalid model: ") + err.what());
  }
  return spec;
}

json model_to_json(const ModelSpec& spec) {
  json j;
  j["family"] = family_name(spec.family);
  switch (spec.family) {
    case Family::poisson:
      break;
    case Family::strauss:
      j["R"] = spec.strauss_radius;
      break;
    case Family::lennard_jones:
      if (std::isfinite(spec.lj_range)) {
        j["D"] = spec.lj_range;
      } else {
        j["D"] = "inf";
        if (spec.truncation_radius > 0.0) {
          j["truncation_radius"] = spec.truncation_radius;
        }
      }
      break;
  }
  return j;
}

ModelFile model_file_from_json(const json& j) {
  ModelFile out;
  out.spec = model_from_json(j);
  const int p = out.spec.param_dim();
  if (j.contains("theta")) {
    const json& t = j["theta"];
    if (!t.is_array() || t.size() != static_cast<std::size_t>(p)) {
      std::ostringstream msg;
      msg << "field \"theta\" must be an array of " << p << " numbers for the "
          << family_name(out.spec.family) << " family";
      throw io_error(msg.str());
    }
    Vec3 v = zero_vec();
    try {
      for (int i = 0; i < p; ++i) v[i] = t[i].get<double>();
      out.spec.validate_theta(Theta::from_vec(v));
    } catch (const json::exception& err) {
      throw io_error(std::string("invalid theta: ") + err.what());
    } catch (const std::invalid_argument& err) {
      throw io_error(std::string("invalid theta: ") + err.what());
    }
    out.theta = Theta::from_vec(v);
  }
  if (j.contains("box")) {
    out.box = box_from_json(j["box"], p);
  }
  return out;
}

ModelFile read_model_file(const std::string& path) {
  try {
    return model_file_from_json(read_json_file(path));
  } catch (const io_error& err) {
    throw io_error(path + ": " + err.what());
  }
}

ParameterBox box_from_json(const json& j, int p) {
  if (!j.is_object() || !j.contains("lower") || !j.contains("upper")) {
    throw io_error("box must be an object with \"lower\" and \"upper\" arrays");
  }
  const json& lo = j["lower"];
  const json& hi = j["upper"];
  if (!lo.is_array() || !hi.is_array() ||
      lo.size() != static_cast<std::size_t>(p) ||
      hi.size() != static_cast<std::size_t>(p)) {
    std::ostringstream msg;
    msg << "box bounds must be arrays of " << p << " numbers";
    throw io_error(msg.str());
  }
  ParameterBox box;
  try {
    for (int i = 0; i < p; ++i) {
      box.lower[i] = lo[i].get<double>();
      box.upper[i] = hi[i].get<double>();
    }
    box.validate(p);
  } catch (const json::exception& err) {
    throw io_error(std::string("invalid box: ") + err.what());
  } catch (const std::invalid_argument& err) {
    throw io_error(std::string("invalid box: ") + err.what());
  }
  return box;
}

json box_to_json(const ParameterBox& box, int p) {
  json lo = json::array(), hi = json::array();
  for (int i = 0; i < p; ++i) {
    lo.push_back(box.lower[i]);
    hi.push_back(box.upper[i]);
  }
  return json{{"lower", lo}, {"upper", hi}};
}

json fit_result_to_json(const FitResult& fit) {
  const int p = fit.p;
  json theta = json::array();
  const Vec3 th = fit.theta_hat.as_vec();
  for (int i = 0; i < p; ++i) theta.push_back(th[i]);

  const auto mat = [&](const Mat3& m) {
    json rows = json::array();
    for (int r = 0; r < p; ++r) {
      json row = json::array();
      for (int c = 0; c < p; ++c) row.push_back(m[r][c]);
      rows.push_back(row);
    }
    return rows;
  };

  json j;
  j["theta_hat"] = theta;
  j["log_pl"] = fit.log_pl_value;
  j["grad_norm"] = fit.grad_norm;
  if (fit.has_ci) {
    j["u2"] = mat(fit.u2);
    j["sigma_hat"] = mat(fit.sigma);
    j["cov"] = mat(fit.cov);
    json intervals = json::array();
    for (int k = 0; k < p; ++k) {
      intervals.push_back(json::array({fit.ci[k][0], fit.ci[k][1]}));
    }
    j["ci"] = json{{"level", fit.level}, {"intervals", intervals}};
  }
  j["diagnostics"] = json{
      {"converged", fit.opt.converged},
      {"iterations", fit.opt.iterations},
      {"starts", fit.opt.start_values.size()},
      {"start_values", fit.opt.start_values},
      {"nm_fallbacks", fit.opt.nm_fallbacks},
      {"projected_grad_norm", fit.opt.grad_pnorm},
      {"boundary_warning", fit.boundary_warning},
      {"small_sample_warning", fit.small_sample_warning},
      {"degenerate_ci", fit.degenerate_ci},
      {"u2_condition", fit.u2_condition},
      {"sigma_psd_clip", fit.sigma_psd_clip},
      {"estimation_window", window_to_json(fit.estimation_window)},
      {"cell_side", fit.cell_side},
      {"quad_resolution_per_unit", fit.resolution},
      {"n_points", fit.n_points},
      {"truncation_radius", fit.truncation_radius},
  };
  return j;
}

json chain_stats_to_json(const ChainStats& stats) {
  return json{
      {"steps", stats.steps},
      {"burn_in", stats.burn_in},
      {"seed", stats.seed},
      {"proposals",
       json{{"birth", stats.birth_proposed},
            {"death", stats.death_proposed},
            {"move", stats.move_proposed}}},
      {"acceptance_rates",
       json{{"birth", stats.birth_rate()},
            {"death", stats.death_rate()},
            {"move", stats.move_rate()}}},
      {"final_count", stats.final_count},
      {"final_energy", stats.final_energy},
      {"energy_trace", stats.energy_trace},
  };
}

json breakdown_to_json(const ScoreBreakdown& breakdown, int p) {
  const auto vec = [&](const Vec3& v) {
    json out = json::array();
    for (int i = 0; i < p; ++i) out.push_back(v[i]);
    return out;
  };
  json cells = json::array();
  const CellPartition& part = breakdown.partition;
  for (int j = 0; j < part.ky(); ++j) {
    for (int i = 0; i < part.kx(); ++i) {
      cells.push_back(json{
          {"index", json::array({i, j})},
          {"grad", vec(breakdown.cell_grads[part.flat_index({i, j})])}});
    }
  }
  return json{
      {"integral_term", vec(breakdown.integral_term)},
      {"sum_term", vec(breakdown.sum_term)},
      {"total", vec(breakdown.total)},
      {"cell_side", part.cell_side()},
      {"cells", cells},
  };
}

json read_json_file(const std::string& path) {
  const std::string text = read_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw io_error(path + ": malformed JSON");
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  write_text_file(j.dump(2) + "\n", path);
}

void write_text_file(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw io_error("failed writing " + path);
}

}  // namespace ljgibbs
