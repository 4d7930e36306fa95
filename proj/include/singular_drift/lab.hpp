#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "singular_drift/drifts.hpp"
#include "singular_drift/kolmogorov.hpp"
#include "singular_drift/sde.hpp"
#include "singular_drift/statistics.hpp"

namespace singular_drift::lab {

enum class Statistic { W1, KS, Moment };

std::string to_string(Statistic s);
Statistic parse_statistic(const std::string& name);
TwoSampleStatistic statistic_fn(Statistic s);

struct ExperimentConfig {
  /// Inline drift recipe; ignored when drift_file is set.
  DriftSpec drift;
  /// Optional snapshot of a precomputed drift (time-field payload).
  std::string drift_file;
  double beta = 0.25;
  double q = 3.0;
  /// Unset: picked inside K(beta, q).
  std::optional<Kappa> kappa;
  /// Unset: calibrated so that sup |grad u| <= calibration_target.
  std::optional<double> lambda;
  double calibration_target = 0.5;
  int dim = 1;
  int modes = 256;
  int time_steps = 128;
  PdeConfig pde;
  TransformOptions transform;
  SimConfig sim;
  std::vector<int> n_list{2, 4, 8, 16, 32};
  /// Multiples of the working lambda for study_lambda.
  std::vector<double> lambda_factors{1.0, 2.0};
  /// SDE step counts for study_smooth_consistency.
  std::vector<int> step_list{250, 500, 1000};
  Statistic statistic = Statistic::W1;
  int bootstrap = 1000;
  std::string output_dir = "results";
  /// "all", "virtual" or "none".
  std::string write_ensembles = "virtual";
  std::uint64_t seed = 1;

  void validate() const;
  /// Hex SHA-256 of the canonical JSON form.
  std::string digest() const;

  friend void to_json(nlohmann::json& j, const ExperimentConfig& c);
  friend void from_json(const nlohmann::json& j, ExperimentConfig& c);
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Named CSV table.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  /// RFC 4180: CRLF records, fields quoted when they contain , " CR or LF.
  std::string csv() const;
};

std::string format_number(double x);

struct StudyReport {
  std::string study;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<Table> tables;
  nlohmann::json timings = nlohmann::json::object();
  std::vector<std::pair<std::string, TimeField>> fields;
  std::vector<std::pair<std::string, PathEnsemble>> ensembles;
  /// Whether the study's own contract held.
  bool passed = false;

  nlohmann::json to_json() const;
};

/// Drift, assumption check, PDE solve (with calibration) and transform.
struct Pipeline {
  GridSpec grid;
  TimeGrid time;
  TimeField b;
  AssumptionReport assumptions;
  PdeConfig pde;
  double lambda = 1.0;
  std::vector<std::pair<double, double>> calibration_trace;
  PdeSolution solution;
  TimeField u;
};

/// Builds the drift only (stage "drift").
TimeField build_drift(const ExperimentConfig& cfg, GridSpec* grid = nullptr, TimeGrid* time = nullptr);

/// Runs stages drift, assumptions, pde; throws StageFailed naming the stage
/// with the original error nested.
Pipeline prepare(const ExperimentConfig& cfg, nlohmann::json* timings = nullptr);

/// Solves for a given lambda on an existing pipeline (shares b and kappa).
PdeSolution solve_at(const Pipeline& pipe, double lambda);

StudyReport study_mollify(const ExperimentConfig& cfg);
StudyReport study_lambda(const ExperimentConfig& cfg);
StudyReport study_smooth_consistency(const ExperimentConfig& cfg);
/// Solver, transform and assumption diagnostics without Monte Carlo.
StudyReport diagnostics(const ExperimentConfig& cfg);

/// Writes report.json, <table>.csv, field and ensemble binaries and
/// manifest.json to <root>/<digest>/, the digest covering study name and
/// config; returns that directory.
std::filesystem::path write_results(const StudyReport& report, const ExperimentConfig& cfg,
                                    const std::filesystem::path& root,
                                    const std::vector<std::filesystem::path>& inputs = {});

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

/// Compiler, thread count and library versions.
nlohmann::json environment_fingerprint();

/// Runs `fn` as the named stage; failures are rethrown as StageFailed with the
/// original exception nested.
template <typename Fn>
auto run_stage(const std::string& name, Fn&& fn) -> decltype(fn());

/// Message of an exception and all nested exceptions, joined by ": ".
std::string describe(const std::exception& e);

}  // namespace singular_drift::lab

#include "singular_drift/errors.hpp"

template <typename Fn>
auto singular_drift::lab::run_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (...) {
    std::throw_with_nested(StageFailed("stage '" + name + "' failed"));
  }
}
