#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "ljgibbs/geometry.hpp"
#include "ljgibbs/inference.hpp"
#include "ljgibbs/model.hpp"
#include "ljgibbs/pseudolik.hpp"
#include "ljgibbs/sampler.hpp"

namespace ljgibbs {

// Pattern files: a CSV with header "x,y" and one point per row, plus a
// JSON sidecar {"window": [x_min, x_max, y_min, y_max]}. Doubles are
// written with 17 significant digits so a round trip is bit-exact.
Configuration read_pattern(const std::string& csv_path,
                           const std::string& sidecar_path);
void write_pattern(const Configuration& cfg, const std::string& csv_path,
                   const std::string& sidecar_path);

Window window_from_json(const nlohmann::json& j);
nlohmann::json window_to_json(const Window& w);

// Model description files carry the family and its structural constants,
// and optionally a parameter vector ("theta") and a fit box ("box").
struct ModelFile {
  ModelSpec spec;
  std::optional<Theta> theta;
  std::optional<ParameterBox> box;
};

ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelSpec& spec);
ModelFile model_file_from_json(const nlohmann::json& j);
ModelFile read_model_file(const std::string& path);

ParameterBox box_from_json(const nlohmann::json& j, int p);
nlohmann::json box_to_json(const ParameterBox& box, int p);

nlohmann::json fit_result_to_json(const FitResult& fit);
nlohmann::json chain_stats_to_json(const ChainStats& stats);
nlohmann::json breakdown_to_json(const ScoreBreakdown& breakdown, int p);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& j, const std::string& path);
void write_text_file(const std::string& text, const std::string& path);

}  // namespace ljgibbs
