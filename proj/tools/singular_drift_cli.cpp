// Command-line front end of the singular-drift lab.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "singular_drift/drifts.hpp"
#include "singular_drift/kolmogorov.hpp"
#include "singular_drift/lab.hpp"
#include "singular_drift/sde.hpp"
#include "singular_drift/snapshot.hpp"
#include "singular_drift/zvonkin.hpp"

namespace sd = singular_drift;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw sd::InvalidSpec("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw sd::InvalidSpec("bad JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw sd::FormatError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// A solver config file may hold PdeConfig fields directly or under "pde".
sd::PdeConfig pde_config(const std::string& path) {
  if (path.empty()) return {};
  const json j = read_json(path);
  return (j.contains("pde") ? j.at("pde") : j).get<sd::PdeConfig>();
}

void gen_drift(const std::string& spec_path, const std::string& out) {
  const json j = read_json(spec_path);
  const auto spec = j.get<sd::DriftSpec>();
  const json grid_j = j.value("grid", json::object());
  const sd::GridSpec grid(grid_j.value("d", 1), grid_j.value("N", 256), 2.0 * std::numbers::pi);
  const sd::TimeGrid time(grid_j.value("T", 1.0), grid_j.value("M", 128));
  const auto b = sd::generate(spec, grid, time);
  json extra = {{"spec", spec}};
  sd::snapshot::write_time_field(out, b, "drift " + sd::to_string(spec.family), extra);
  json manifest = {{"spec", spec},
                   {"grid", {{"d", grid.dim()}, {"N", grid.modes()}, {"L", grid.period()}, {"T", time.horizon()},
                             {"M", time.intervals()}}},
                   {"seed", spec.seed},
                   {"spec_sha256", sd::lab::file_sha256(spec_path)},
                   {"payload_sha256", sd::lab::file_sha256(out)}};
  if (j.contains("q")) manifest["assumptions"] = sd::assumption_check(b, spec.beta, j.at("q").get<double>());
  write_json(out + ".manifest.json", manifest);
  std::cout << "wrote " << out << "\n";
}

void solve_pde(const std::string& drift, double lambda, const std::string& config, const std::string& out) {
  const auto b = sd::snapshot::read_time_field(drift);
  auto cfg = pde_config(config);
  cfg.lambda = lambda;
  const auto sol = sd::solve_fwd(b, lambda, cfg);
  const auto u = sd::to_backward(sol.v);
  sd::snapshot::write_time_field(out, u, "backward Kolmogorov solution u", {{"lambda", lambda}, {"pde", cfg}});
  json report = {{"lambda", lambda},
                 {"pde", cfg},
                 {"solver", sol.report},
                 {"gradient_sup", sd::gradient_sup(u)},
                 {"value_sup", sd::value_sup(u)},
                 {"drift_sha256", sd::lab::file_sha256(drift)}};
  write_json(out + ".report.json", report);
  std::cout << report.dump(2) << "\n";
}

void calibrate(const std::string& drift, const std::string& config, double target, const std::string& out) {
  const auto b = sd::snapshot::read_time_field(drift);
  const auto cfg = pde_config(config);
  const auto cal = sd::calibrate_lambda(b, cfg, target);
  sd::lab::Table trace{"calibration", {"lambda", "gradient_sup"}, {}};
  json rows = json::array();
  for (const auto& [l, g] : cal.trace) {
    trace.add({sd::lab::format_number(l), sd::lab::format_number(g)});
    rows.push_back({l, g});
  }
  json report = {{"lambda", cal.lambda},
                 {"target", target},
                 {"trace", rows},
                 {"slope", cal.trace.size() >= 2 ? json(sd::calibration_slope(cal.trace)) : json(nullptr)},
                 {"solver", cal.solution.report},
                 {"drift_sha256", sd::lab::file_sha256(drift)}};
  write_json(out, report);
  const fs::path csv = fs::path(out).replace_extension(".csv");
  std::ofstream(csv, std::ios::binary) << trace.csv();
  std::cout << "lambda = " << cal.lambda << "; trace written to " << csv.string() << "\n";
}

void simulate(const std::string& u_path, const std::string& drift_path, double lambda, const std::string& config,
              const std::string& out) {
  auto cfg = read_json(config);
  json sim_j = cfg.contains("sim") ? cfg.at("sim") : cfg;
  sim_j["lambda"] = lambda;
  const auto sim = sim_j.get<sd::SimConfig>();
  sd::PathEnsemble ensemble;
  if (!drift_path.empty()) {
    ensemble = sd::simulate_classical(sd::snapshot::read_time_field(drift_path), sim);
  } else {
    const sd::TransformContext ctx(sd::snapshot::read_time_field(u_path));
    sd::simulate_y(ctx, sim, &ensemble);
  }
  sd::write_ensemble(out, ensemble, sim);
  std::cout << "wrote " << ensemble.label << " ensemble (" << ensemble.paths << " paths, " << ensemble.steps
            << " steps) to " << out << "\n";
}

void study(const std::string& kind, const std::string& config, const std::string& out_root) {
  const auto cfg = sd::lab::load_config(config);
  sd::lab::StudyReport report;
  if (kind == "study-mollify") report = sd::lab::study_mollify(cfg);
  else if (kind == "study-lambda") report = sd::lab::study_lambda(cfg);
  else if (kind == "study-consistency") report = sd::lab::study_smooth_consistency(cfg);
  else report = sd::lab::diagnostics(cfg);
  const fs::path root = out_root.empty() ? fs::path(cfg.output_dir) : fs::path(out_root);
  const auto dir = sd::lab::write_results(report, cfg, root, {config});
  std::cout << report.study << ": " << (report.passed ? "passed" : "failed") << "\n"
            << report.summary.dump(2) << "\nresults in " << dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for SDEs with distributional drift"};
  app.require_subcommand(1);

  std::string spec, out, drift, config, u_path, results;
  double lambda = 1.0, target = 0.5;

  auto* gen = app.add_subcommand("gen-drift", "Generate a drift and write its snapshot");
  gen->add_option("--spec", spec, "drift spec JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "payload path")->required();

  auto* solve = app.add_subcommand("solve-pde", "Solve the Kolmogorov equation for one lambda");
  solve->add_option("--drift", drift, "drift payload")->required()->check(CLI::ExistingFile);
  solve->add_option("--lambda", lambda, "killing rate")->required();
  solve->add_option("--config", config, "solver config JSON")->check(CLI::ExistingFile);
  solve->add_option("--out", out, "payload path for u")->required();

  auto* cal = app.add_subcommand("calibrate", "Double lambda until sup |grad u| <= target");
  cal->add_option("--drift", drift, "drift payload")->required()->check(CLI::ExistingFile);
  cal->add_option("--config", config, "solver config JSON")->check(CLI::ExistingFile);
  cal->add_option("--target", target, "gradient bound");
  cal->add_option("--out", out, "calibration JSON; the trace goes to the same stem with .csv")->required();

  auto* sim = app.add_subcommand("simulate", "Simulate the virtual solution (or a classical SDE with --drift)");
  sim->add_option("--u", u_path, "payload of u")->check(CLI::ExistingFile);
  sim->add_option("--drift", drift, "smooth drift payload for a classical simulation")->check(CLI::ExistingFile);
  sim->add_option("--lambda", lambda, "lambda used to compute u");
  sim->add_option("--config", config, "simulation config JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out, "ensemble path")->required();

  std::vector<CLI::App*> studies;
  for (const auto& [name, help] : {std::pair{"study-mollify", "Mollified-drift convergence in law"},
                                   std::pair{"study-lambda", "Independence of the virtual solution from lambda"},
                                   std::pair{"study-consistency", "Classical versus virtual route for a smooth drift"},
                                   std::pair{"diagnostics", "Solver, transform and bound diagnostics"}}) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", config, "experiment config JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--out", results, "results root (default: config output_dir)");
    studies.push_back(s);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) gen_drift(spec, out);
    else if (*solve) solve_pde(drift, lambda, config, out);
    else if (*cal) calibrate(drift, config, target, out);
    else if (*sim) {
      if (u_path.empty() == drift.empty()) throw sd::InvalidSpec("simulate needs exactly one of --u or --drift");
      simulate(u_path, drift, lambda, config, out);
    } else
      for (auto* s : studies)
        if (*s) study(s->get_name(), config, results);
  } catch (const std::exception& e) {
    std::cerr << "error: " << sd::lab::describe(e) << "\n";
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
