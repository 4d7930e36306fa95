#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "singular_drift/errors.hpp"
#include "singular_drift/lab.hpp"
#include "singular_drift/snapshot.hpp"

using namespace singular_drift;
namespace fs = std::filesystem;

namespace {

lab::ExperimentConfig tiny_config() {
  lab::ExperimentConfig c;
  c.drift.seed = 4;
  c.drift.amplitude = 0.2;
  c.drift.decay = critical_decay(c.beta);
  c.modes = 32;
  c.time_steps = 16;
  c.sim.steps = 16;
  c.sim.paths = 400;
  c.bootstrap = 50;
  c.n_list = {2, 4, 8};
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string manifest_digest(const fs::path& dir) {
  return nlohmann::json::parse(slurp(dir / "manifest.json"))["config_digest"].get<std::string>();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sd_lab_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config JSON round trip and digest") {
  auto c = tiny_config();
  c.lambda = 3.0;
  c.kappa = Kappa{0.5, 2.5};
  c.statistic = lab::Statistic::KS;
  const nlohmann::json j = c;
  const auto back = j.get<lab::ExperimentConfig>();
  CHECK(back.lambda.value() == 3.0);
  CHECK(back.kappa->p == 2.5);
  CHECK(back.statistic == lab::Statistic::KS);
  CHECK(back.modes == 32);
  CHECK(back.digest() == c.digest());
  CHECK(c.digest().size() == 64);
  auto other = c;
  other.seed = 2;
  CHECK(other.digest() != c.digest());

  const auto autod = nlohmann::json{{"lambda", "auto"}}.get<lab::ExperimentConfig>();
  CHECK_FALSE(autod.lambda.has_value());
  CHECK_THROWS_AS((nlohmann::json{{"n_list", {4, 2}}}.get<lab::ExperimentConfig>()), InvalidSpec);
  CHECK_THROWS_AS((nlohmann::json{{"lambda_factors", {0.5, 1.0}}}.get<lab::ExperimentConfig>()), InvalidSpec);
  CHECK_THROWS_AS((nlohmann::json{{"statistic", "energy"}}.get<lab::ExperimentConfig>()), InvalidSpec);
  CHECK_THROWS_AS((nlohmann::json{{"drift_file", "/nonexistent/b.bin"}}.get<lab::ExperimentConfig>()), InvalidSpec);
}

TEST_CASE("sha256 known answers") {
  CHECK(lab::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(lab::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("CSV follows RFC 4180") {
  lab::Table t{"t", {"a", "b"}, {}};
  t.add({"1", "x,y"});
  t.add({"say \"hi\"", "line\nbreak"});
  CHECK(t.csv() == "a,b\r\n1,\"x,y\"\r\n\"say \"\"hi\"\"\",\"line\nbreak\"\r\n");
  CHECK_THROWS_AS(t.add({"only one"}), std::logic_error);
  CHECK(std::stod(lab::format_number(0.1)) == 0.1);
}

TEST_CASE("stage failures keep the cause") {
  try {
    lab::run_stage("pde", []() -> int { throw MaxIterExceeded("no convergence"); });
    FAIL("expected StageFailed");
  } catch (const StageFailed& e) {
    CHECK(lab::describe(e) == "stage 'pde' failed: no convergence");
  }
  auto bad = tiny_config();
  bad.kappa = Kappa{0.1, 2.5};
  CHECK_THROWS_AS(lab::prepare(bad), StageFailed);
}

TEST_CASE("prepare with and without calibration") {
  auto c = tiny_config();
  nlohmann::json timings;
  const auto pipe = lab::prepare(c, &timings);
  CHECK(timings.contains("drift"));
  CHECK(timings.contains("pde"));
  CHECK(gradient_sup(pipe.u) <= 0.5);
  CHECK(!pipe.calibration_trace.empty());
  CHECK(pipe.lambda == pipe.calibration_trace.back().first);
  c.lambda = 2.0 * pipe.lambda;
  const auto fixed = lab::prepare(c);
  CHECK(fixed.lambda == 2.0 * pipe.lambda);
  CHECK(fixed.calibration_trace.empty());
}

TEST_CASE("lambda study and result layout") {
  auto c = tiny_config();
  const auto report = lab::study_lambda(c);
  CHECK(report.study == "lambda");
  CHECK(report.summary["lambdas"].size() == 2);
  CHECK(report.summary["floor"].get<double>() > 0.0);
  REQUIRE(report.tables.size() == 1);
  CHECK(report.tables[0].rows.size() == 1);

  const auto root = scratch_dir("lambda");
  const auto dir = lab::write_results(report, c, root);
  CHECK(dir.parent_path() == root);
  CHECK(dir.filename().string().size() == 16);
  CHECK(manifest_digest(dir) == c.digest());
  for (const char* f : {"report.json", "manifest.json", "pairs.csv", "b.bin", "u.bin"}) CHECK(fs::exists(dir / f));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["seeds"]["master"].get<std::uint64_t>() == c.seed);
  bool checked = false;
  for (const auto& out : manifest["outputs"]) {
    const auto file = dir / out["file"].get<std::string>();
    CHECK(lab::file_sha256(file) == out["sha256"].get<std::string>());
    checked = true;
  }
  CHECK(checked);
  const auto b = snapshot::read_time_field(dir / "b.bin");
  CHECK(b.grid().modes() == 32);
  fs::remove_all(root);
}

TEST_CASE("mollify study runs on a small problem") {
  auto c = tiny_config();
  c.write_ensembles = "none";
  const auto report = lab::study_mollify(c);
  CHECK(report.summary["levels"].size() == 3);
  CHECK(report.summary["trend"].contains("kendall_tau"));
  CHECK(report.ensembles.empty());
  // 3 levels x 4 quarter times x 1 projection.
  CHECK(report.tables[0].rows.size() == 12);
}

TEST_CASE("smooth consistency requires the smooth drift") {
  auto c = tiny_config();
  CHECK_THROWS_AS(lab::study_smooth_consistency(c), InvalidSpec);
  c.drift.family = DriftFamily::SmoothTest;
  c.step_list = {8, 16};
  const auto report = lab::study_smooth_consistency(c);
  CHECK(report.summary["deviation_ratios"].size() == 1);
  CHECK(report.tables[0].rows.size() == 2);
  CHECK(report.summary["terminal_statistic"].is_number());
}

TEST_CASE("diagnostics") {
  auto c = tiny_config();
  const auto report = lab::diagnostics(c);
  CHECK(report.summary["gamma_bound_holds"].get<bool>());
  CHECK(report.summary["transform"]["gradient_sup"].get<double>() <= 0.5);
  CHECK(report.summary["predicted_slope"].get<double>() == doctest::Approx(-0.125));
  CHECK(report.passed);
}
