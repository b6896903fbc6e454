#include "peakfilter/model_io.hpp"
#include "peakfilter/synthesis.hpp"

#include <cstdio>
#include <sstream>

namespace peakfilter {

using nlohmann::json;

namespace {

json stats_json(const SolverStats& s) {
  json j;
  j["iterations"] = s.iterations;
  j["duality_gap"] = s.duality_gap;
  j["primal_infeasibility"] = s.primal_infeasibility;
  j["dual_infeasibility"] = s.dual_infeasibility;
  j["max_margin"] = s.max_margin ? json(*s.max_margin) : json(nullptr);
  j["bound_active"] = s.bound_active;
  j["note"] = s.note;
  return j;
}

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string matrix4(const Matrix& m) {
  std::ostringstream os;
  os << "[";
  for (Index i = 0; i < m.rows(); ++i) {
    if (i) os << "; ";
    for (Index k = 0; k < m.cols(); ++k) os << (k ? " " : "") << fmt4(m(i, k));
  }
  os << "]";
  return os.str();
}

}  // namespace

json report_json(const SynthesisResult& r) {
  json j;
  j["family"] = r.family;
  j["method"] = to_string(r.method);
  j["gamma"] = r.gamma;
  j["mu"] = r.mu;
  j["lambda"] = r.lambda;
  j["epsilon"] = r.epsilon ? json(*r.epsilon) : json(nullptr);
  j["filter"] = filter_to_json(r.filter);
  json cert;
  cert["certified"] = r.certified;
  cert["note"] = r.certification_note;
  cert["lambda_bound_closed_loop"] = r.lambda_bound_closed_loop;
  cert["extraction_condition"] = r.extraction_condition;
  json vars = json::object();
  for (const auto& [name, value] : r.certificates) vars[name] = matrix_to_json(value);
  cert["variables"] = std::move(vars);
  j["certificate"] = std::move(cert);
  j["solver"] = stats_json(r.solver);
  return j;
}

json report_json(const SynthesisOutcome& o) {
  json j;
  j["outcome"] = to_string(o.kind);
  j["reason"] = o.reason;
  j["max_margin"] = o.max_margin ? json(*o.max_margin) : json(nullptr);
  if (o.result) j["result"] = report_json(*o.result);
  return j;
}

std::string human_summary(const SynthesisResult& r) {
  std::ostringstream os;
  os << r.family << " (" << to_string(r.method) << "): gamma = " << fmt4(r.gamma)
     << ", mu = " << fmt4(r.mu) << ", lambda = " << fmt4(r.lambda);
  if (r.epsilon) os << ", epsilon = " << fmt4(*r.epsilon);
  os << "\n  " << (r.certified ? "certified" : "uncertified") << ": " << r.certification_note;
  os << "\n  Af = " << matrix4(r.filter.Af()) << "\n  Bf = " << matrix4(r.filter.Bf())
     << "\n  Cf = " << matrix4(r.filter.Cf()) << "\n  Df = " << matrix4(r.filter.Df()) << "\n";
  return os.str();
}

}  // namespace peakfilter
