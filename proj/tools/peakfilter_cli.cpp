#include "peakfilter/fault.hpp"
#include "peakfilter/model_io.hpp"
#include "peakfilter/simulate.hpp"
#include "peakfilter/synthesis.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace peakfilter;
using nlohmann::json;

namespace {

enum Exit { ok = 0, failure = 1, negative = 2, blowup = 3 };

struct Config {
  std::string model;
  std::string method = "improved";
  std::optional<double> gamma, lambda, epsilon, horizon;
  std::uint64_t seed = 1;
  std::size_t trials = 200;
  double dt = 1e-4;
  std::string out = ".";
  std::string filter;
  double h1 = 1.0;
  std::string fault = "ramp";
  std::string disturbance = "sinusoid";
  double amplitude = 1.0;
  double frequency = 0.5;
  int vertex = 1;
  bool tune = false;
};

// Model plus, for fault models, the fault structure.
struct Loaded {
  ModelFile file;
  PolytopicModel model;
  std::optional<FaultModel> fault;
};

Loaded load(const std::string& name) {
  ModelFile f = load_model_file(resolve_model_path(name));
  if (f.pendulum) {
    FaultModel fm = pendulum_model(*f.pendulum);
    if (f.fault_direction) fm = FaultModel(fm.base, *f.fault_direction);
    return Loaded{f, PolytopicModel({fm.base}), fm};
  }
  Loaded l{f, *f.model, std::nullopt};
  if (f.fault_direction) {
    if (f.model->size() != 1) throw FormatError(name + ": fault models must have one vertex");
    l.fault = FaultModel(f.model->vertex(0), *f.fault_direction);
  }
  return l;
}

std::string out_path(const Config& c, const std::string& file) {
  return (std::filesystem::path(c.out) / file).string();
}

void write_json(const Config& c, const std::string& file, const json& j) {
  write_file_atomic(out_path(c, file), j.dump(2) + "\n");
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

json params_json(const Config& c) {
  json p;
  p["model"] = c.model;
  p["method"] = c.method;
  p["gamma"] = c.gamma ? json(*c.gamma) : json(nullptr);
  p["lambda"] = c.lambda ? json(*c.lambda) : json(nullptr);
  p["epsilon"] = c.epsilon ? json(*c.epsilon) : json(nullptr);
  return p;
}

void validate_method(const Config& c) {
  const Method m = method_from_string(c.method);
  if (m == Method::quadratic && c.epsilon) {
    throw PreconditionError("--epsilon applies to the improved method only");
  }
}

int report_outcome(const Config& c, const SynthesisOutcome& o, const json& params,
                   const std::string& stem) {
  json j = report_json(o);
  j["parameters"] = params;
  write_json(c, stem + "_report.json", j);
  if (o.ok()) {
    write_json(c, stem + "_filter.json", filter_to_json(o.result->filter));
    std::cout << human_summary(*o.result);
    return o.result->certified ? ok : negative;
  }
  std::cerr << to_string(o.kind) << ": " << o.reason << "\n";
  return o.kind == SynthesisOutcome::Kind::no_admissible_filter ? negative : failure;
}

int cmd_synth(const Config& c) {
  validate_method(c);
  Loaded l = load(c.model);
  SynthesisSpec spec{l.model, method_from_string(c.method), DeconvolutionMode{}};
  if (l.fault) {
    if (spec.method != Method::improved) {
      throw PreconditionError("fault models are synthesized with the improved method");
    }
    const auto part = normalize_fault_structure(l.fault->base.C2(), l.fault->base.D2(), l.fault->F);
    const Matrix H1 = Matrix::Constant(l.fault->faults(), part.split, c.h1);
    spec.mode = fault_output_map(part, build_H(H1, part.F2));
  }
  const std::optional<double> eps =
      spec.method == Method::improved ? std::optional<double>(c.epsilon.value_or(1e-3)) : std::nullopt;
  SynthesisOutcome o;
  if (c.tune) {
    TuningBounds b;
    if (c.lambda) b.lambda_start = c.lambda;
    if (c.epsilon) b.epsilon_start = c.epsilon;
    o = tune_parameters(spec, b).outcome;
  } else if (!c.lambda) {
    std::string why;
    try {
      o = line_search_lambda(spec, eps).best;
    } catch (const PreconditionError& e) {
      o.kind = SynthesisOutcome::Kind::no_admissible_filter;
      o.reason = std::string("no admissible filter: ") + e.what();
    }
  } else if (c.gamma) {
    o = synthesize_at_gamma(spec, *c.gamma, *c.lambda, eps);
  } else {
    o = minimize_gamma(spec, *c.lambda, eps);
  }
  return report_outcome(c, o, params_json(c), "synth");
}

int cmd_analyze(const Config& c) {
  validate_method(c);
  if (!c.gamma || !c.lambda) throw CLI::ValidationError("analyze needs --gamma and --lambda");
  if (c.filter.empty()) throw CLI::ValidationError("analyze needs --filter");
  Loaded l = load(c.model);
  const DeconvolutionFilter filt = load_filter_file(resolve_filter_path(c.filter));
  AugmentationMode mode = DeconvolutionMode{};
  if (l.fault) {
    const auto part = normalize_fault_structure(l.fault->base.C2(), l.fault->base.D2(), l.fault->F);
    mode = fault_output_map(part, build_H(Matrix::Constant(l.fault->faults(), part.split, c.h1), part.F2));
  }
  const Method m = method_from_string(c.method);
  const ClosedLoopCertificate cert =
      certify_closed_loop(l.model, filt, *c.gamma, *c.lambda, m, c.epsilon, mode);

  json j;
  j["parameters"] = params_json(c);
  j["parameters"]["filter"] = c.filter;
  j["certified"] = cert.certified;
  j["reason"] = cert.reason;
  j["status"] = to_string(cert.status);
  j["lambda_bound_closed_loop"] = cert.lambda_bound;
  j["mu"] = cert.mu ? json(*cert.mu) : json(nullptr);
  j["max_margin"] = cert.max_margin ? json(*cert.max_margin) : json(nullptr);
  json checks = json::array();
  for (const auto& ch : cert.report.constraints) {
    checks.push_back({{"label", ch.label}, {"min_eigenvalue", ch.min_eigenvalue},
                      {"margin", ch.margin}, {"slack", ch.slack}, {"satisfied", ch.satisfied}});
  }
  j["constraints"] = std::move(checks);
  write_json(c, "analyze_report.json", j);

  std::cout << (cert.certified ? "certified" : "uncertified") << " at gamma = " << fmt(*c.gamma)
            << ", lambda = " << fmt(*c.lambda) << ": " << cert.reason << "\n";
  if (cert.mu) std::cout << "  mu = " << fmt(*cert.mu) << "\n";
  return cert.certified ? ok : negative;
}

DisturbanceSpec make_disturbance(const Config& c, Index q) {
  if (c.disturbance == "zero") return DisturbanceSpec::zero(q);
  if (c.disturbance == "sinusoid") {
    std::vector<double> amp(q, c.amplitude / std::sqrt(static_cast<double>(q)));
    std::vector<double> freq(q, c.frequency), phase(q, 0.0);
    return DisturbanceSpec{Sinusoid{amp, freq, phase}};
  }
  if (c.disturbance == "noise") {
    return DisturbanceSpec{FilteredNoise{q, 2.0 * M_PI * c.frequency, c.amplitude, c.seed}};
  }
  if (c.disturbance == "steps") {
    Matrix levels(q, 2);
    levels.col(0).setConstant(c.amplitude / std::sqrt(static_cast<double>(q)));
    levels.col(1) = -levels.col(0);
    return DisturbanceSpec{PiecewiseConstant{levels, 0.5 / c.frequency}};
  }
  throw CLI::ValidationError("--disturbance must be sinusoid, noise, steps or zero");
}

int cmd_simulate(const Config& c) {
  if (c.filter.empty()) throw CLI::ValidationError("simulate needs --filter");
  Loaded l = load(c.model);
  const DeconvolutionFilter filt = load_filter_file(resolve_filter_path(c.filter));
  if (c.vertex < 1 || static_cast<std::size_t>(c.vertex) > l.model.size()) {
    throw CLI::ValidationError("--vertex out of range");
  }
  AugmentationMode mode = DeconvolutionMode{};
  if (l.fault) {
    const auto part = normalize_fault_structure(l.fault->base.C2(), l.fault->base.D2(), l.fault->F);
    mode = fault_output_map(part, build_H(Matrix::Constant(l.fault->faults(), part.split, c.h1), part.F2));
  }
  const AugmentedSystem aug = build_augmented(l.model.vertex(c.vertex - 1), filt, mode);
  const DisturbanceSpec w = make_disturbance(c, aug.disturbances());

  EstimateOptions eo;
  eo.trials = c.trials;
  eo.dt = c.dt;
  eo.horizon = c.horizon;
  eo.seed = c.seed;
  const PeakEstimate est = peak_to_peak_estimate(aug, w, eo);

  SimulationOptions so;
  so.dt = c.dt;
  so.horizon = c.horizon;
  so.seed = sub_seed(c.seed, 0);
  so.record_stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1e-2 / c.dt)));
  const Trajectory tr = euler_maruyama(aug, w, so);
  write_file_atomic(out_path(c, "trajectory.csv"),
                    trajectory_csv(tr, l.file.name, filter_hash(filt)));

  json j;
  j["parameters"] = params_json(c);
  j["disturbance"] = w.describe();
  j["trials"] = est.trials;
  j["dt"] = c.dt;
  j["steps"] = est.steps;
  j["input_peak"] = est.input_peak;
  j["output_peak"] = est.output_peak;
  j["ratio"] = est.defined() ? json(est.ratio) : json(nullptr);
  j["standard_error"] = est.defined() ? json(est.standard_error) : json(nullptr);
  write_json(c, "simulate_summary.json", j);

  const std::string g = c.gamma ? fmt(*c.gamma) : std::string("n/a");
  if (!est.defined()) {
    std::cout << "ratio = undefined (zero disturbance, output peak " << fmt(est.output_peak)
              << ") (gamma = " << g << ")\n";
  } else {
    std::cout << "ratio = " << fmt(est.ratio) << " ± " << fmt(est.standard_error)
              << " (gamma = " << g << ")\n";
  }
  return ok;
}

int cmd_fault_demo(const Config& c) {
  Loaded l = load(c.model.empty() ? "pendulum" : c.model);
  if (!l.fault) throw CLI::ValidationError("fault-demo needs a model with a fault direction");
  const FaultModel& fm = *l.fault;
  const auto part = normalize_fault_structure(fm.base.C2(), fm.base.D2(), fm.F);
  const Matrix H1 = Matrix::Constant(fm.faults(), part.split, c.h1);
  const double gamma = c.gamma.value_or(1.0);
  const FaultSynthesis fs =
      synthesize_fault_filter(fm, H1, gamma, c.lambda.value_or(2.0), c.epsilon.value_or(1e-3));
  json params = params_json(c);
  params["h1"] = c.h1;
  params["fault"] = c.fault;
  int code = report_outcome(c, fs.outcome, params, "fault");
  if (!fs.estimator) return code;

  FaultScenario sc;
  if (c.fault == "none") {
    sc.fault = FaultProfile::none(fm.faults());
  } else if (c.fault == "ramp") {
    sc.fault = FaultProfile::ramp_and_hold(2.0, 0.1, 0.5);
  } else {
    throw CLI::ValidationError("--fault must be ramp or none");
  }
  const Index q = fm.base.dims().q;
  sc.disturbance = DisturbanceSpec{FilteredNoise{q, 20.0, 1.0, c.seed}};
  sc.dt = c.dt;
  sc.sample_period = recommended_sample_period(fs.estimator->filter, c.dt);
  sc.horizon = c.horizon.value_or(10.0);
  sc.seed = c.seed;
  const FaultRun run = simulate_fault_scenario(fm, *fs.estimator, sc);
  std::ostringstream header;
  header << "model=" << l.file.name << " filter=" << filter_hash(fs.estimator->filter)
         << " seed=" << c.seed << " dt=" << c.dt;
  write_file_atomic(out_path(c, "fault_run.csv"), fault_run_csv(run, header.str()));

  // plateau: mean |f̂| over the last quarter of the run
  const Index n = static_cast<Index>(run.t.size());
  const Index from = 3 * n / 4;
  const double plateau = run.fhat.rightCols(n - from).cwiseAbs().mean();
  std::cout << "fhat plateau (last quarter mean |fhat|) = " << fmt(plateau) << "\n";
  return code;
}

int cmd_reproduce(const Config& c) {
  int code = ok;
  auto merge = [&](int r) {
    if (r == failure || code == failure) code = failure;
    else if (r != ok) code = r;
  };
  Config q = c;
  q.model = "example1";
  q.method = "quadratic";
  q.lambda = 2.5;
  q.epsilon.reset();
  q.gamma.reset();
  std::cout << "Example 1, quadratic framework, lambda = 2.5\n";
  merge(cmd_synth(q));
  std::filesystem::rename(out_path(c, "synth_report.json"), out_path(c, "example1_quadratic_report.json"));
  std::filesystem::rename(out_path(c, "synth_filter.json"), out_path(c, "example1_quadratic_filter.json"));

  Config i = q;
  i.method = "improved";
  i.lambda = 2.7;
  i.epsilon = 1e-3;
  std::cout << "Example 1, parameter-dependent approach, lambda = 2.7, epsilon = 0.001\n";
  merge(cmd_synth(i));
  std::filesystem::rename(out_path(c, "synth_report.json"), out_path(c, "example1_improved_report.json"));
  std::filesystem::rename(out_path(c, "synth_filter.json"), out_path(c, "example1_improved_filter.json"));

  Config f = c;
  f.model = "pendulum";
  f.gamma = 1.0;
  f.lambda = 2.0;
  f.epsilon = 1e-3;
  f.h1 = 1.0;
  std::cout << "Pendulum fault reconstruction, gamma = 1, lambda = 2, epsilon = 0.001, H1 = 1\n";
  merge(cmd_fault_demo(f));
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust peak-to-peak deconvolution filter synthesis for Ito systems"};
  app.require_subcommand(1);
  Config cfg;

  auto common = [&](CLI::App* s, bool needs_model) {
    auto* m = s->add_option("--model", cfg.model, "model name (example1, pendulum, unstable_demo) or JSON path");
    if (needs_model) m->required();
    s->add_option("--method", cfg.method, "quadratic or improved")
        ->check(CLI::IsMember({"quadratic", "improved"}));
    s->add_option("--gamma", cfg.gamma, "peak-to-peak level")->check(CLI::PositiveNumber);
    s->add_option("--lambda", cfg.lambda, "decay parameter lambda")->check(CLI::PositiveNumber);
    s->add_option("--epsilon", cfg.epsilon, "slack scaling epsilon (improved method)")
        ->check(CLI::PositiveNumber);
    s->add_option("--out", cfg.out, "output directory");
    s->add_option("--h1", cfg.h1, "fault weighting H1 (all entries)");
  };
  auto sim = [&](CLI::App* s) {
    s->add_option("--seed", cfg.seed, "root seed");
    s->add_option("--trials", cfg.trials, "Monte-Carlo paths")->check(CLI::Range(2, 1000000));
    s->add_option("--dt", cfg.dt, "Euler-Maruyama step")->check(CLI::PositiveNumber);
    s->add_option("--horizon", cfg.horizon, "simulated time")->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "synthesize a filter (minimize gamma)");
  common(synth, true);
  synth->add_flag("--tune", cfg.tune, "tune (lambda, epsilon) with a simplex search");

  auto* analyze = app.add_subcommand("analyze", "certify a given filter at (gamma, lambda)");
  common(analyze, true);
  analyze->add_option("--filter", cfg.filter, "filter name (ex1_quadratic, ex1_improved, pendulum_fault) or JSON path")->required();
  cfg.method = "quadratic";

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo peak-to-peak ratio estimate");
  common(simulate, true);
  sim(simulate);
  simulate->add_option("--filter", cfg.filter, "filter name or JSON path")->required();
  simulate->add_option("--disturbance", cfg.disturbance, "sinusoid, noise, steps or zero");
  simulate->add_option("--amplitude", cfg.amplitude, "disturbance peak norm");
  simulate->add_option("--frequency", cfg.frequency, "disturbance frequency (Hz)");
  simulate->add_option("--vertex", cfg.vertex, "polytope vertex to simulate (1-based)");

  auto* fault = app.add_subcommand("fault-demo", "fault reconstruction synthesis and run");
  common(fault, false);
  sim(fault);
  fault->add_option("--fault", cfg.fault, "ramp or none");

  auto* repro = app.add_subcommand("reproduce", "rerun the worked examples");
  repro->add_option("--out", cfg.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : failure;
  }
  // the analyze default method is quadratic, the others improved unless given
  const CLI::Option* given = app.get_subcommands().front()->get_option_no_throw("--method");
  if (!analyze->parsed() && (!given || given->count() == 0)) {
    cfg.method = "improved";
  }

  try {
    if (synth->parsed()) return cmd_synth(cfg);
    if (analyze->parsed()) return cmd_analyze(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (fault->parsed()) return cmd_fault_demo(cfg);
    if (repro->parsed()) return cmd_reproduce(cfg);
  } catch (const BlowUpError& e) {
    std::cerr << "numerical blow-up: " << e.what() << "\n";
    return blowup;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return failure;
}
