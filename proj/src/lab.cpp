#include "singular_drift/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/version.hpp>
#include <fftw3.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include "singular_drift/parallel.hpp"
#include "singular_drift/rng.hpp"
#include "singular_drift/snapshot.hpp"

namespace singular_drift::lab {

std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::W1: return "W1";
    case Statistic::KS: return "KS";
    case Statistic::Moment: return "moment";
  }
  return "W1";
}

Statistic parse_statistic(const std::string& name) {
  if (name == "W1") return Statistic::W1;
  if (name == "KS") return Statistic::KS;
  if (name == "moment") return Statistic::Moment;
  throw InvalidSpec("unknown statistic '" + name + "' (expected W1, KS or moment)");
}

TwoSampleStatistic statistic_fn(Statistic s) {
  switch (s) {
    case Statistic::KS: return ks_stat;
    case Statistic::Moment: return moment_distance;
    case Statistic::W1: break;
  }
  return wasserstein1;
}

void ExperimentConfig::validate() const {
  drift.validate();
  if (dim < 1 || dim > kMaxDim) throw InvalidSpec("dim must be 1..3");
  if (sim.dim != dim) throw InvalidSpec("sim.dim must equal dim");
  if (n_list.empty()) throw InvalidSpec("n_list must not be empty");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw InvalidSpec("n_list must be strictly increasing");
  for (double f : lambda_factors)
    if (!(f >= 1.0)) throw InvalidSpec("lambda factors must be >= 1 so every lambda exceeds the calibrated one");
  for (int s : step_list)
    if (s < 1) throw InvalidSpec("step_list entries must be positive");
  if (lambda && !(*lambda >= 0.0)) throw InvalidSpec("lambda must be >= 0");
  if (bootstrap < 1) throw InvalidSpec("bootstrap must be >= 1");
  if (write_ensembles != "all" && write_ensembles != "virtual" && write_ensembles != "none")
    throw InvalidSpec("write_ensembles must be all, virtual or none");
  if (!drift_file.empty() && !std::filesystem::exists(drift_file))
    throw InvalidSpec("drift_file '" + drift_file + "' does not exist");
  sim.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"drift", c.drift},
       {"drift_file", c.drift_file},
       {"beta", c.beta},
       {"q", c.q},
       {"kappa", c.kappa ? nlohmann::json{{"delta", c.kappa->delta}, {"p", c.kappa->p}} : nlohmann::json(nullptr)},
       {"lambda", c.lambda ? nlohmann::json(*c.lambda) : nlohmann::json("auto")},
       {"calibration_target", c.calibration_target},
       {"dim", c.dim},
       {"N", c.modes},
       {"M", c.time_steps},
       {"pde", c.pde},
       {"transform", {{"inverse_tol", c.transform.inverse_tol}, {"inverse_max_iter", c.transform.inverse_max_iter}}},
       {"sim", c.sim},
       {"n_list", c.n_list},
       {"lambda_factors", c.lambda_factors},
       {"step_list", c.step_list},
       {"statistic", to_string(c.statistic)},
       {"bootstrap", c.bootstrap},
       {"output_dir", c.output_dir},
       {"write_ensembles", c.write_ensembles},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  if (j.contains("drift")) c.drift = j.at("drift").get<DriftSpec>();
  c.drift_file = j.value("drift_file", c.drift_file);
  c.beta = j.value("beta", c.beta);
  c.q = j.value("q", c.q);
  c.drift.beta = c.beta;
  if (j.contains("kappa") && !j.at("kappa").is_null())
    c.kappa = Kappa{j.at("kappa").at("delta").get<double>(), j.at("kappa").at("p").get<double>()};
  if (j.contains("lambda") && j.at("lambda").is_number()) c.lambda = j.at("lambda").get<double>();
  c.calibration_target = j.value("calibration_target", c.calibration_target);
  c.dim = j.value("dim", c.dim);
  c.modes = j.value("N", c.modes);
  c.time_steps = j.value("M", c.time_steps);
  if (j.contains("pde")) c.pde = j.at("pde").get<PdeConfig>();
  if (j.contains("transform")) {
    c.transform.inverse_tol = j.at("transform").value("inverse_tol", c.transform.inverse_tol);
    c.transform.inverse_max_iter = j.at("transform").value("inverse_max_iter", c.transform.inverse_max_iter);
  }
  nlohmann::json sim = j.value("sim", nlohmann::json::object());
  if (!sim.contains("dim")) sim["dim"] = c.dim;
  c.sim = sim.get<SimConfig>();
  c.n_list = j.value("n_list", c.n_list);
  c.lambda_factors = j.value("lambda_factors", c.lambda_factors);
  c.step_list = j.value("step_list", c.step_list);
  c.statistic = parse_statistic(j.value("statistic", std::string("W1")));
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.write_ensembles = j.value("write_ensembles", c.write_ensembles);
  c.seed = j.value("seed", c.seed);
  c.validate();
}

std::string ExperimentConfig::digest() const {
  nlohmann::json j = *this;
  return sha256_hex(j.dump());
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpec("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpec("bad config " + path.string() + ": " + e.what());
  }
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != header.size()) throw std::logic_error("row width does not match header of table " + name);
  rows.push_back(std::move(row));
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void csv_record(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  out += "\r\n";
}

}  // namespace

std::string Table::csv() const {
  std::string out;
  csv_record(out, header);
  for (const auto& row : rows) csv_record(out, row);
  return out;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

nlohmann::json StudyReport::to_json() const {
  nlohmann::json tabs = nlohmann::json::array();
  for (const auto& t : tables) tabs.push_back({{"name", t.name}, {"file", t.name + ".csv"}, {"rows", t.rows.size()}});
  return {{"study", study}, {"passed", passed}, {"summary", summary}, {"tables", tabs}, {"timings", timings}};
}

std::string describe(const std::exception& e) {
  std::string out = e.what();
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    out += ": " + describe(inner);
  } catch (...) {
    out += ": unknown error";
  }
  return out;
}

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename Fn>
auto timed_stage(const std::string& name, nlohmann::json* timings, Fn&& fn) -> decltype(fn()) {
  Stopwatch w;
  if constexpr (std::is_void_v<decltype(fn())>) {
    run_stage(name, fn);
    if (timings) (*timings)[name] = w.seconds();
  } else {
    auto out = run_stage(name, fn);
    if (timings) (*timings)[name] = w.seconds();
    return out;
  }
}

SimConfig sim_for(const ExperimentConfig& cfg, double lambda) {
  SimConfig s = cfg.sim;
  s.dim = cfg.dim;
  s.lambda = lambda;
  return s;
}

// Coordinates, and for d > 1 also fixed random unit projections, of one time
// slice of an ensemble.
std::vector<std::vector<double>> projections(const PathEnsemble& e, int step, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  for (int c = 0; c < e.dim; ++c) out.push_back(e.marginal(step, c));
  if (e.dim == 1) return out;
  const CounterRng rng(mix64(seed ^ 0x9e3779b97f4a7c15ull));
  constexpr int kDirections = 4;
  for (int k = 0; k < kDirections; ++k) {
    std::array<double, kMaxDim> dir{};
    const auto z01 = rng.normals({static_cast<std::uint32_t>(k), 0u, 0u, 0u});
    const auto z2 = rng.normals({static_cast<std::uint32_t>(k), 1u, 0u, 0u});
    const std::array<double, 3> z{z01[0], z01[1], z2[0]};
    double norm = 0.0;
    for (int c = 0; c < e.dim; ++c) norm += z[static_cast<std::size_t>(c)] * z[static_cast<std::size_t>(c)];
    norm = std::sqrt(norm);
    for (int c = 0; c < e.dim; ++c) dir[static_cast<std::size_t>(c)] = z[static_cast<std::size_t>(c)] / norm;
    std::vector<double> proj(static_cast<std::size_t>(e.paths), 0.0);
    for (int p = 0; p < e.paths; ++p)
      for (int c = 0; c < e.dim; ++c) proj[static_cast<std::size_t>(p)] += dir[static_cast<std::size_t>(c)] * e.at(p, step, c);
    out.push_back(std::move(proj));
  }
  return out;
}

std::string projection_name(int index, int dim) {
  return index < dim ? "x" + std::to_string(index) : "proj" + std::to_string(index - dim);
}

struct Comparison {
  std::vector<double> values;
  double worst = 0.0;
  std::size_t argmax = 0;
};

Comparison compare(const PathEnsemble& a, const PathEnsemble& b, int step, const TwoSampleStatistic& stat,
                   std::uint64_t seed) {
  const auto pa = projections(a, step, seed);
  const auto pb = projections(b, step, seed);
  Comparison out;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    out.values.push_back(stat(pa[i], pb[i]));
    if (out.values.back() > out.worst || i == 0) {
      out.worst = out.values.back();
      out.argmax = i;
    }
  }
  return out;
}

double ensemble_floor(const PathEnsemble& e, int step, const TwoSampleStatistic& stat, std::uint64_t seed) {
  double worst = 0.0;
  for (const auto& p : projections(e, step, seed)) worst = std::max(worst, split_floor(p, stat));
  return worst;
}

std::vector<int> quarter_steps(int steps) {
  std::vector<int> out;
  for (int k = 1; k <= 4; ++k) out.push_back(static_cast<int>(std::lround(steps * k / 4.0)));
  return out;
}

TransformContext make_transform(const TimeField& u, const ExperimentConfig& cfg) {
  return TransformContext(u, cfg.transform);
}

}  // namespace

TimeField build_drift(const ExperimentConfig& cfg, GridSpec* grid_out, TimeGrid* time_out) {
  TimeField b;
  if (!cfg.drift_file.empty()) {
    b = snapshot::read_time_field(cfg.drift_file);
  } else {
    const GridSpec grid(cfg.dim, cfg.modes, 2.0 * std::numbers::pi);
    const TimeGrid time(cfg.sim.horizon, cfg.time_steps);
    b = generate(cfg.drift, grid, time);
  }
  if (b.grid().dim() != cfg.dim) throw InvalidSpec("drift dimension does not match config dim");
  if (grid_out) *grid_out = b.grid();
  if (time_out) *time_out = b.time();
  return b;
}

Pipeline prepare(const ExperimentConfig& cfg, nlohmann::json* timings) {
  cfg.validate();
  Pipeline pipe;
  pipe.b = timed_stage("drift", timings, [&] { return build_drift(cfg, &pipe.grid, &pipe.time); });
  pipe.assumptions = timed_stage("assumptions", timings, [&] { return assumption_check(pipe.b, cfg.beta, cfg.q); });
  pipe.pde = cfg.pde;
  pipe.pde.beta = cfg.beta;
  pipe.pde.kappa = timed_stage("kappa", timings, [&] {
    const KappaRegion region{cfg.beta, cfg.q, cfg.dim};
    if (!cfg.kappa) return pick_kappa(region, cfg.dim);
    if (!region.contains(*cfg.kappa))
      throw EmptyRegion("configured (delta, p) lies outside K(beta, q)");
    return *cfg.kappa;
  });
  timed_stage("pde", timings, [&] {
    if (cfg.lambda) {
      pipe.lambda = *cfg.lambda;
      pipe.solution = solve_fwd(pipe.b, pipe.lambda, pipe.pde);
    } else {
      auto cal = calibrate_lambda(pipe.b, pipe.pde, cfg.calibration_target);
      pipe.lambda = cal.lambda;
      pipe.calibration_trace = std::move(cal.trace);
      pipe.solution = std::move(cal.solution);
    }
  });
  pipe.pde.lambda = pipe.lambda;
  pipe.u = to_backward(pipe.solution.v);
  return pipe;
}

PdeSolution solve_at(const Pipeline& pipe, double lambda) { return solve_fwd(pipe.b, lambda, pipe.pde); }

namespace {

nlohmann::json pipeline_summary(const Pipeline& pipe) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [l, g] : pipe.calibration_trace) trace.push_back({l, g});
  return {{"lambda", pipe.lambda},
          {"kappa", {{"delta", pipe.pde.kappa.delta}, {"p", pipe.pde.kappa.p}}},
          {"assumptions", pipe.assumptions},
          {"solver", pipe.solution.report},
          {"calibration_trace", trace}};
}

void attach_fields(StudyReport& report, const Pipeline& pipe) {
  report.fields.emplace_back("b", pipe.b);
  report.fields.emplace_back("u", pipe.u);
}

}  // namespace

StudyReport study_mollify(const ExperimentConfig& cfg) {
  StudyReport report;
  report.study = "mollify";
  const auto pipe = prepare(cfg, &report.timings);
  const auto stat = statistic_fn(cfg.statistic);
  const auto ctx = timed_stage("transform", &report.timings, [&] { return make_transform(pipe.u, cfg); });
  const SimConfig sim = sim_for(cfg, pipe.lambda);
  PathEnsemble x;
  timed_stage("virtual", &report.timings, [&] { simulate_y(ctx, sim, &x); });
  const auto sequence =
      timed_stage("mollify", &report.timings, [&] { return mollified_sequence(pipe.b, cfg.n_list); });

  Table levels{"levels", {"n", "t", "projection", "statistic", "estimate", "ci_lo", "ci_hi"}, {}};
  std::vector<double> terminal;
  nlohmann::json per_level = nlohmann::json::array();
  const auto times = quarter_steps(sim.steps);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const int n = cfg.n_list[i];
    const std::string label = "classical-" + std::to_string(n);
    const auto xn = timed_stage(label, &report.timings, [&] { return simulate_classical(sequence[i], sim, label); });
    for (int step : times) {
      const auto cmp = compare(xn, x, step, stat, cfg.seed);
      const bool last = step == sim.steps;
      for (std::size_t k = 0; k < cmp.values.size(); ++k) {
        std::string lo, hi;
        if (last) {
          const auto pa = projections(xn, step, cfg.seed);
          const auto pb = projections(x, step, cfg.seed);
          const auto ci = paired_bootstrap(pa[k], pb[k], stat, cfg.bootstrap, cfg.seed + i);
          lo = format_number(ci.lo);
          hi = format_number(ci.hi);
          if (k == cmp.argmax) per_level.push_back({{"n", n}, {"estimate", ci.estimate}, {"ci", {ci.lo, ci.hi}}});
        }
        levels.add({std::to_string(n), format_number(step * sim.dt()), projection_name(static_cast<int>(k), sim.dim),
                    to_string(cfg.statistic), format_number(cmp.values[k]), lo, hi});
      }
      if (last) terminal.push_back(cmp.worst);
    }
    if (cfg.write_ensembles == "all") report.ensembles.emplace_back(label, xn);
  }
  const double floor = ensemble_floor(x, sim.steps, stat, cfg.seed);
  const auto trend = kendall_trend(terminal);
  bool within_ci = true;
  for (std::size_t i = 1; i < per_level.size(); ++i)
    if (per_level[i]["estimate"].get<double>() > per_level[i - 1]["ci"][1].get<double>()) within_ci = false;

  report.passed = trend.tau < 0.0 && trend.p_decreasing < 0.05;
  report.summary = pipeline_summary(pipe);
  report.summary["levels"] = per_level;
  report.summary["floor"] = floor;
  report.summary["trend"] = {{"kendall_tau", trend.tau}, {"p_value", trend.p_decreasing}, {"exact", trend.exact},
                             {"passed", report.passed}};
  report.summary["non_increasing_within_ci"] = within_ci;
  report.tables.push_back(std::move(levels));
  attach_fields(report, pipe);
  if (cfg.write_ensembles != "none") report.ensembles.emplace_back("virtual", std::move(x));
  return report;
}

StudyReport study_lambda(const ExperimentConfig& cfg) {
  StudyReport report;
  report.study = "lambda";
  const auto pipe = prepare(cfg, &report.timings);
  const auto stat = statistic_fn(cfg.statistic);
  std::vector<double> lambdas;
  for (double f : cfg.lambda_factors) lambdas.push_back(f * pipe.lambda);

  std::vector<PathEnsemble> ensembles;
  nlohmann::json solves = nlohmann::json::array();
  for (double lambda : lambdas) {
    const std::string stage = "virtual-lambda-" + format_number(lambda);
    ensembles.push_back(timed_stage(stage, &report.timings, [&] {
      const auto sol = lambda == pipe.lambda ? pipe.solution : solve_at(pipe, lambda);
      const auto ctx = make_transform(to_backward(sol.v), cfg);
      solves.push_back({{"lambda", lambda}, {"gradient_sup", ctx.gradient_certificate()}, {"solver", sol.report}});
      PathEnsemble x;
      simulate_y(ctx, sim_for(cfg, lambda), &x);
      x.label = "virtual-lambda-" + format_number(lambda);
      return x;
    }));
  }
  const int last = cfg.sim.steps;
  const double floor = ensemble_floor(ensembles.front(), last, stat, cfg.seed);
  Table pairs{"pairs", {"lambda_i", "lambda_j", "statistic", "distance", "floor", "ratio_to_floor"}, {}};
  double worst = 0.0;
  for (std::size_t i = 0; i < ensembles.size(); ++i)
    for (std::size_t j = i + 1; j < ensembles.size(); ++j) {
      const double dist = compare(ensembles[i], ensembles[j], last, stat, cfg.seed).worst;
      worst = std::max(worst, dist);
      pairs.add({format_number(lambdas[i]), format_number(lambdas[j]), to_string(cfg.statistic), format_number(dist),
                 format_number(floor), format_number(floor > 0.0 ? dist / floor : 0.0)});
    }
  report.passed = worst <= 3.0 * floor;
  report.summary = pipeline_summary(pipe);
  report.summary["lambdas"] = lambdas;
  report.summary["solves"] = solves;
  report.summary["floor"] = floor;
  report.summary["max_pairwise"] = worst;
  report.tables.push_back(std::move(pairs));
  attach_fields(report, pipe);
  if (cfg.write_ensembles != "none")
    for (std::size_t i = 0; i < ensembles.size(); ++i)
      if (i == 0 || cfg.write_ensembles == "all") report.ensembles.emplace_back(ensembles[i].label, std::move(ensembles[i]));
  return report;
}

StudyReport study_smooth_consistency(const ExperimentConfig& cfg) {
  if (cfg.drift_file.empty() && cfg.drift.family != DriftFamily::SmoothTest)
    throw InvalidSpec("smooth consistency requires the smooth-test drift family");
  StudyReport report;
  report.study = "consistency";
  const auto pipe = prepare(cfg, &report.timings);
  const auto stat = statistic_fn(cfg.statistic);
  const auto ctx = timed_stage("transform", &report.timings, [&] { return make_transform(pipe.u, cfg); });
  int noise = 1;
  for (int s : cfg.step_list) noise = std::lcm(noise, s);

  Table rows{"refinement",
             {"steps", "max_path_deviation", "mean_path_deviation", "terminal_statistic", "floor", "virtual_residual"},
             {}};
  std::vector<double> max_dev, mean_dev;
  double terminal = 0.0, floor = 0.0;
  for (int steps : cfg.step_list) {
    SimConfig sim = sim_for(cfg, pipe.lambda);
    sim.steps = steps;
    sim.noise_steps = noise;
    const std::string suffix = std::to_string(steps);
    const auto direct = timed_stage("direct-" + suffix, &report.timings, [&] { return simulate_classical(pipe.b, sim, "direct"); });
    PathEnsemble x;
    timed_stage("virtual-" + suffix, &report.timings, [&] { simulate_y(ctx, sim, &x); });
    std::vector<double> dev(static_cast<std::size_t>(sim.paths), 0.0);
    for (int p = 0; p < sim.paths; ++p)
      for (int m = 0; m <= steps; ++m)
        dev[static_cast<std::size_t>(p)] = std::max(dev[static_cast<std::size_t>(p)], distance(direct.state(p, m), x.state(p, m), sim.dim));
    max_dev.push_back(*std::max_element(dev.begin(), dev.end()));
    mean_dev.push_back(mean(dev));
    terminal = compare(direct, x, steps, stat, cfg.seed).worst;
    floor = ensemble_floor(x, steps, stat, cfg.seed);
    const double residual = virtual_residual(ctx, x, sim);
    rows.add({suffix, format_number(max_dev.back()), format_number(mean_dev.back()), format_number(terminal),
              format_number(floor), format_number(residual)});
    if (cfg.write_ensembles == "all") {
      report.ensembles.emplace_back("direct-" + suffix, direct);
      report.ensembles.emplace_back("virtual-" + suffix, std::move(x));
    }
  }
  std::vector<double> ratios;
  bool ratios_ok = true;
  for (std::size_t i = 1; i < max_dev.size(); ++i) {
    ratios.push_back(max_dev[i - 1] > 0.0 ? max_dev[i] / max_dev[i - 1] : 0.0);
    ratios_ok = ratios_ok && ratios.back() >= 0.5 && ratios.back() <= 0.9;
  }
  std::vector<double> mean_ratios;
  for (std::size_t i = 1; i < mean_dev.size(); ++i)
    mean_ratios.push_back(mean_dev[i - 1] > 0.0 ? mean_dev[i] / mean_dev[i - 1] : 0.0);
  const bool law_ok = terminal <= 3.0 * floor;
  report.passed = ratios_ok && law_ok;
  report.summary = pipeline_summary(pipe);
  report.summary["max_deviation"] = max_dev;
  report.summary["mean_deviation"] = mean_dev;
  report.summary["deviation_ratios"] = ratios;
  report.summary["mean_deviation_ratios"] = mean_ratios;
  report.summary["terminal_statistic"] = terminal;
  report.summary["floor"] = floor;
  report.summary["ratios_in_band"] = ratios_ok;
  report.summary["terminal_below_3_floor"] = law_ok;
  report.tables.push_back(std::move(rows));
  attach_fields(report, pipe);
  return report;
}

StudyReport diagnostics(const ExperimentConfig& cfg) {
  StudyReport report;
  report.study = "diagnostics";
  const auto pipe = prepare(cfg, &report.timings);
  const double beta = cfg.beta;
  const auto kappa = pipe.pde.kappa;
  report.summary = pipeline_summary(pipe);
  report.summary["calibration_slope"] =
      pipe.calibration_trace.size() >= 2 ? nlohmann::json(calibration_slope(pipe.calibration_trace)) : nlohmann::json(nullptr);
  report.summary["predicted_slope"] = 0.5 * (kappa.delta + beta - 1.0);
  report.summary["value_sup"] = value_sup(pipe.u);
  const double gamma = 0.5 * (1.0 - kappa.delta - beta);
  report.summary["holder"] = timed_stage("holder", &report.timings, [&] {
    return nlohmann::json{{"gamma", gamma}, {"value", holder_diagnostic(pipe.u, gamma, pipe.pde.solution_index())}};
  });

  timed_stage("transform", &report.timings, [&] {
    const auto ctx = make_transform(pipe.u, cfg);
    const auto rt = round_trip_residuals(ctx, 1000, cfg.seed);
    report.summary["transform"] = {{"gradient_sup", ctx.gradient_certificate()},
                                   {"round_trip_psi_phi", rt.psi_of_phi},
                                   {"round_trip_phi_psi", rt.phi_of_psi},
                                   {"lipschitz_probe", lipschitz_probe(ctx, 1000, cfg.seed)},
                                   {"time_continuity", time_continuity_probe(ctx, gamma, 1000, cfg.seed)}};
  });

  timed_stage("uniqueness", &report.timings, [&] {
    const KappaRegion region{beta, cfg.q, cfg.dim};
    Kappa other{0.5 * (kappa.delta + 1.0 - beta), 0.0};
    other.p = 0.5 * (cfg.dim / other.delta + cfg.q);
    if (!region.contains(other)) {
      report.summary["uniqueness"] = nullptr;
      return;
    }
    report.summary["uniqueness"] = {{"kappa", {{"delta", other.delta}, {"p", other.p}}},
                                    {"sup_distance", uniqueness_crosscheck(pipe.b, pipe.lambda, kappa, other, pipe.pde)}};
  });

  Table gamma_table{"gamma_bound", {"theta", "rho", "s", "t", "integral", "bound", "holds"}, {}};
  bool gamma_ok = true;
  for (double theta : {0.0, 0.25, 0.5, 0.75})
    for (double rho : {1.0, 2.0, 4.0, 8.0})
      for (auto [s, t] : {std::pair{0.0, 1.0}, std::pair{0.0, std::numeric_limits<double>::infinity()}, std::pair{0.5, 2.0}}) {
        const double integral = gamma_integral(rho, theta, s, t);
        const bool holds = gamma_bound_check(rho, theta, s, t);
        gamma_ok = gamma_ok && holds;
        gamma_table.add({format_number(theta), format_number(rho), format_number(s), format_number(t), format_number(integral),
                         format_number(std::tgamma(1.0 - theta) * std::pow(rho, theta - 1.0)), holds ? "true" : "false"});
      }
  report.summary["gamma_bound_holds"] = gamma_ok;

  Table trace{"calibration", {"lambda", "gradient_sup"}, {}};
  for (const auto& [l, g] : pipe.calibration_trace) trace.add({format_number(l), format_number(g)});
  Table increments{"picard", {"iteration", "weighted_increment", "unweighted_increment"}, {}};
  const auto& rep = pipe.solution.report;
  for (std::size_t k = 0; k < rep.increments.size(); ++k)
    increments.add({std::to_string(k + 1), format_number(rep.increments[k]), format_number(rep.unweighted_increments[k])});
  report.tables.push_back(std::move(gamma_table));
  report.tables.push_back(std::move(trace));
  report.tables.push_back(std::move(increments));
  report.passed = gamma_ok && pipe.solution.report.residual <= 2.0 * pipe.pde.tol;
  attach_fields(report, pipe);
  return report;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

nlohmann::json environment_fingerprint() {
  return {{"compiler", __VERSION__},
          {"cxx_standard", __cplusplus},
          {"workers", worker_count()},
          {"fftw", std::string(fftw_version)},
          {"boost", BOOST_LIB_VERSION},
          {"openssl", OPENSSL_VERSION_TEXT},
          {"rng", std::string(CounterRng::kDescription)}};
}

std::filesystem::path write_results(const StudyReport& report, const ExperimentConfig& cfg,
                                    const std::filesystem::path& root, const std::vector<std::filesystem::path>& inputs) {
  const std::string digest = cfg.digest();
  // Studies sharing a config must not overwrite each other.
  const std::string run_digest = sha256_hex(nlohmann::json{{"study", report.study}, {"config", digest}}.dump());
  const auto dir = root / run_digest.substr(0, 16);
  std::filesystem::create_directories(dir);
  nlohmann::json outputs = nlohmann::json::array();
  auto record = [&](const std::filesystem::path& file) {
    outputs.push_back({{"file", file.filename().string()}, {"sha256", file_sha256(file)}});
  };
  auto write_text = [&](const std::string& name, const std::string& text) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
    out.close();
    record(path);
  };

  for (const auto& t : report.tables) write_text(t.name + ".csv", t.csv());
  for (const auto& [name, field] : report.fields) {
    const auto path = dir / (name + ".bin");
    snapshot::write_time_field(path, field, name + " (" + report.study + ")");
    record(path);
    record(snapshot::sidecar_path(path));
  }
  const nlohmann::json cfg_json = cfg;
  for (const auto& [name, ensemble] : report.ensembles) {
    const auto path = dir / (name + ".ens");
    write_ensemble(path, ensemble, cfg_json);
    record(path);
  }
  nlohmann::json body = report.to_json();
  body["config_digest"] = digest;
  body["run_digest"] = run_digest;
  write_text("report.json", body.dump(2) + "\n");

  nlohmann::json input_digests = nlohmann::json::array();
  for (const auto& in : inputs) input_digests.push_back({{"file", in.string()}, {"sha256", file_sha256(in)}});
  if (!cfg.drift_file.empty())
    input_digests.push_back({{"file", cfg.drift_file}, {"sha256", file_sha256(cfg.drift_file)}});
  const nlohmann::json manifest = {{"study", report.study},
                                   {"config_digest", digest},
                                   {"run_digest", run_digest},
                                   {"config", cfg_json},
                                   {"seeds", {{"master", cfg.seed}, {"sim", cfg.sim.seed}, {"drift", cfg.drift.seed}}},
                                   {"inputs", input_digests},
                                   {"outputs", outputs},
                                   {"environment", environment_fingerprint()}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  return dir;
}

}  // namespace singular_drift::lab
