#pragma once

#include "peakfilter/model.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>

namespace peakfilter {

/// Malformed model/filter/report files. Carries the source path and the offending key.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physical parameters of the linearized inverted pendulum (angle sensor fault example).
struct PendulumParameters {
  double m = 0.5;
  double l = 0.7;
  double kappa = 0.5;
  double zeta = 0.25;
  double g = 9.81;
  double k1 = -29.7398;
  double k2 = -63.9668;
  double R1 = 1.0;
  double R2 = 0.4;
};

/// Contents of a model file. Exactly one of `model` or `pendulum` is set.
struct ModelFile {
  std::string name;
  std::string description;
  std::optional<PolytopicModel> model;
  std::optional<PendulumParameters> pendulum;
  /// Fault direction F (r×p), present for fault-reconstruction models.
  std::optional<Matrix> fault_direction;
};

Matrix matrix_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json matrix_to_json(const Matrix& m);

ModelFile parse_model_file(const nlohmann::json& j, const std::string& source);
ModelFile load_model_file(const std::string& path);

/// Built-in names ("example1", "pendulum", "unstable_demo") resolve to the shipped data
/// directory; anything else is treated as a path.
std::string resolve_model_path(const std::string& name_or_path);
std::string resolve_filter_path(const std::string& name_or_path);

DeconvolutionFilter parse_filter_file(const nlohmann::json& j, const std::string& source);
DeconvolutionFilter load_filter_file(const std::string& path);
nlohmann::json filter_to_json(const DeconvolutionFilter& f);

std::string read_text_file(const std::string& path);
/// Write via a temporary sibling file and rename.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace peakfilter
