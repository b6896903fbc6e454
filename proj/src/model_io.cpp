#include "peakfilter/model_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace peakfilter {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw FormatError(where + ": unknown key \"" + key + "\"");
  }
}

const json& required(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(where + ": missing key \"" + key + "\"");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw FormatError(where + ": expected a number");
  return j.get<double>();
}

}  // namespace

Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw FormatError(where + ": expected a nonempty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw FormatError(where + ": row 1 is not a nonempty array");
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw FormatError(where + ": row " + std::to_string(i + 1) + " does not have " +
                        std::to_string(cols) + " entries");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      m(i, k) = number(j[i][k], where + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

StochasticLtiSystem parse_vertex(const json& v, const std::string& where) {
  reject_unknown(v, {"A", "B1", "C1", "C2", "D11", "D2", "G1", "G2"}, where);
  auto get = [&](const char* key) {
    return matrix_from_json(required(v, key, where), where + "." + key);
  };
  return StochasticLtiSystem(get("A"), get("B1"), get("C1"), get("C2"), get("D11"), get("D2"),
                             get("G1"), get("G2"));
}

PendulumParameters parse_pendulum(const json& p, const std::string& where) {
  reject_unknown(p, {"m", "l", "kappa", "zeta", "g", "k1", "k2", "R1", "R2"}, where);
  PendulumParameters out;
  auto get = [&](const char* key) { return number(required(p, key, where), where + "." + key); };
  out.m = get("m");
  out.l = get("l");
  out.kappa = get("kappa");
  out.zeta = get("zeta");
  out.g = get("g");
  out.k1 = get("k1");
  out.k2 = get("k2");
  out.R1 = get("R1");
  out.R2 = get("R2");
  return out;
}

}  // namespace

ModelFile parse_model_file(const json& j, const std::string& source) {
  reject_unknown(j, {"name", "description", "dims", "vertices", "pendulum", "fault_direction"},
                 source);
  ModelFile f;
  f.name = required(j, "name", source).get<std::string>();
  if (j.contains("description")) f.description = j["description"].get<std::string>();
  const bool has_vertices = j.contains("vertices");
  const bool has_pendulum = j.contains("pendulum");
  if (has_vertices == has_pendulum) {
    throw FormatError(source + ": exactly one of \"vertices\" or \"pendulum\" is required");
  }
  if (has_vertices) {
    const json& vs = j["vertices"];
    if (!vs.is_array() || vs.empty()) throw FormatError(source + ": \"vertices\" must be a nonempty array");
    std::vector<StochasticLtiSystem> list;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      list.push_back(parse_vertex(vs[i], source + ": vertices[" + std::to_string(i) + "]"));
    }
    f.model.emplace(std::move(list));
    if (j.contains("dims")) {
      const json& d = j["dims"];
      reject_unknown(d, {"n", "q", "r", "m"}, source + ": dims");
      const Dims want{d.at("n").get<Index>(), d.at("q").get<Index>(), d.at("r").get<Index>(),
                      d.at("m").get<Index>()};
      if (!(want == f.model->dims())) {
        throw FormatError(source + ": dims " + to_string(want) + " disagree with the vertices " +
                          to_string(f.model->dims()));
      }
    }
  } else {
    if (j.contains("dims")) throw FormatError(source + ": \"dims\" is derived for pendulum models");
    f.pendulum = parse_pendulum(j["pendulum"], source + ": pendulum");
  }
  if (j.contains("fault_direction")) {
    f.fault_direction = matrix_from_json(j["fault_direction"], source + ": fault_direction");
  }
  return f;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

namespace {

json parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string resolve(const std::string& name, const char* sub) {
  if (std::filesystem::exists(name)) return name;
  const std::filesystem::path p =
      std::filesystem::path(PEAKFILTER_DATA_DIR) / sub / (name + ".json");
  if (std::filesystem::exists(p)) return p.string();
  return name;
}

}  // namespace

ModelFile load_model_file(const std::string& path) {
  return parse_model_file(parse_json_file(path), path);
}

std::string resolve_model_path(const std::string& name_or_path) {
  return resolve(name_or_path, "models");
}

std::string resolve_filter_path(const std::string& name_or_path) {
  return resolve(name_or_path, "filters");
}

DeconvolutionFilter parse_filter_file(const json& j, const std::string& source) {
  reject_unknown(j, {"name", "description", "Af", "Bf", "Cf", "Df"}, source);
  auto get = [&](const char* key) {
    return matrix_from_json(required(j, key, source), source + ": " + key);
  };
  return DeconvolutionFilter(get("Af"), get("Bf"), get("Cf"), get("Df"));
}

DeconvolutionFilter load_filter_file(const std::string& path) {
  return parse_filter_file(parse_json_file(path), path);
}

json filter_to_json(const DeconvolutionFilter& f) {
  json j;
  j["Af"] = matrix_to_json(f.Af());
  j["Bf"] = matrix_to_json(f.Bf());
  j["Cf"] = matrix_to_json(f.Cf());
  j["Df"] = matrix_to_json(f.Df());
  return j;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace peakfilter
