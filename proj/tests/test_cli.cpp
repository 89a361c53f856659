#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lstd_lab/cli.hpp"
#include "lstd_lab/io.hpp"

using namespace lstd_lab;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::execute(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("lstd_lab_cli_" + name);
}

std::filesystem::path write_config(const std::string& name, const json& j) {
  const auto path = scratch(name);
  write_json_file(j, path);
  return path;
}

std::size_t count_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("cli prop1 closed forms", "[cli]") {
  const Outcome o = invoke({"prop1", "--lambda", "0", "--gamma", "0.9", "--T", "10", "--mu", "1",
                            "--sigma", "1", "--runs", "0"});
  REQUIRE(o.code == 0);
  const json doc = json::parse(o.out);
  CHECK(std::abs(doc["closed_form"]["A_boy_T"].get<double>() - 1.0) <= 1e-12);
  CHECK(std::abs(doc["closed_form"]["A_unc_T"].get<double>() - 1.9) <= 1e-12);
  CHECK(std::abs(doc["closed_form"]["var_ratio_exact"].get<double>() - 3.61) <= 1e-12);
  CHECK(doc["monte_carlo"].is_null());
}

TEST_CASE("cli prop1 with Monte Carlo", "[cli]") {
  const Outcome o = invoke({"prop1", "--lambda", "0.5", "--gamma", "0.9", "--T", "20", "--mu",
                            "1", "--sigma", "0", "--runs", "1000", "--seed", "4"});
  REQUIRE(o.code == 0);
  const json doc = json::parse(o.out);
  CHECK(doc["monte_carlo"]["var_b"].get<double>() == 0.0);
  CHECK(invoke({"prop1", "--lambda", "0.5", "--gamma", "0.9", "--T", "20", "--mu", "1",
                "--sigma", "1", "--runs", "10"})
            .code == 2);
}

TEST_CASE("cli gen-mrp", "[cli]") {
  const Outcome o = invoke({"gen-mrp", "--n", "1", "--branch", "1", "--sigma", "0", "--seed", "7"});
  REQUIRE(o.code == 0);
  const json doc = json::parse(o.out);
  CHECK(doc["P"] == json::parse("[[1.0]]"));
  CHECK(doc["seed"] == 7);

  const auto path = scratch("mrp.json");
  REQUIRE(invoke({"gen-mrp", "--n", "10", "--branch", "3", "--sigma", "0.1", "--seed", "42",
                  "--features", "binary", "--out", path.string()})
              .code == 0);
  const json saved = read_json_file(path);
  const MrpModel m = mrp_from_json(saved);
  const MrpModel fresh = generate_random_mrp(10, 3, 0.1, 42);
  CHECK(m.P == fresh.P);
  CHECK(m.R == fresh.R);
  CHECK(features_from_json(saved).d == 4);

  const Outcome fp = invoke({"fixed-point", "--mrp", path.string(), "--lambda", "0.5", "--gamma",
                             "0.9"});
  REQUIRE(fp.code == 0);
  const json fdoc = json::parse(fp.out);
  CHECK(fdoc["fixed_point"]["theta_bar"].size() == 4);
  std::filesystem::remove(path);

  CHECK(invoke({"gen-mrp", "--n", "3", "--branch", "4", "--sigma", "0", "--seed", "1"}).code == 2);
}

TEST_CASE("cli fixed-point with tabular features recovers values", "[cli]") {
  const auto path = scratch("tab.json");
  REQUIRE(invoke({"gen-mrp", "--n", "5", "--branch", "2", "--sigma", "0.1", "--seed", "3", "--out",
                  path.string()})
              .code == 0);
  const Outcome o = invoke({"fixed-point", "--mrp", path.string(), "--features", "tabular",
                            "--lambda", "0.3", "--gamma", "0.8"});
  REQUIRE(o.code == 0);
  const Vector theta = vector_from_json(json::parse(o.out)["fixed_point"]["theta_bar"]);
  const Vector v = true_values(mrp_from_json(read_json_file(path)), 0.8);
  for (std::size_t s = 0; s < 5; ++s) CHECK(theta[s] == Catch::Approx(v[s]).epsilon(1e-10));
  std::filesystem::remove(path);
}

TEST_CASE("cli usage errors exit with 2", "[cli]") {
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"bogus"}).code == 2);
  CHECK(invoke({"prop1", "--nope"}).code == 2);
  CHECK(invoke({"sweep", "--config", "x.json"}).code == 2);  // --out missing
  const auto bad = write_config("bad.json", json{{"T", 5}, {"unknown", 1}});
  CHECK(invoke({"sweep", "--config", bad.string(), "--out", scratch("bad.csv").string()}).code == 2);
  std::filesystem::remove(bad);
  const Outcome missing = invoke({"sweep", "--config", scratch("absent.json").string(), "--out",
                                  scratch("absent.csv").string()});
  CHECK(missing.code == 3);
  CHECK_FALSE(missing.err.empty());
}

TEST_CASE("cli sweep writes one row per cell", "[cli]") {
  const auto cfg = write_config(
      "sweep.json", json{{"lambda_grid", {0.0, 0.5, 1.0}}, {"alpha_grid", {0.5, 2.0}}, {"T", 50},
                         {"runs", 2}, {"gamma", 0.9}});
  const auto csv = scratch("sweep.csv");
  const Outcome o = invoke({"sweep", "--config", cfg.string(), "--out", csv.string()});
  REQUIRE(o.code == 0);
  CHECK(count_lines(csv) == 1 + 3 * 2 * 2 * 3);
  const auto records = read_records(csv);
  CHECK(records.size() == 36);
  const json doc = json::parse(o.out);
  CHECK(doc["records"] == 36);
  CHECK(doc["best_over_alpha"].size() == 9);

  // the single-cell verb reproduces the sweep's numbers
  const Outcome one = invoke({"run", "--config", cfg.string(), "--algo", "mixed", "--lambda", "0.5",
                              "--alpha", "2", "--run", "1"});
  REQUIRE(one.code == 0);
  const double mse = json::parse(one.out)["record"]["mse"].get<double>();
  bool matched = false;
  for (const auto& r : records)
    if (r.algo == Algorithm::mixed && r.lambda == 0.5 && r.alpha == 2.0 && r.run == 1)
      matched = r.mse == mse;
  CHECK(matched);
  CHECK(invoke({"run", "--config", cfg.string(), "--algo", "mixed", "--lambda", "0.25", "--alpha",
                "2", "--run", "1"})
            .code == 2);
  std::filesystem::remove(cfg);
  std::filesystem::remove(csv);
}

TEST_CASE("cli sweep with failing cells exits with 1", "[cli]") {
  const auto cfg = write_config(
      "fail.json", json{{"lambda_grid", {0.0}}, {"alpha_grid", {0.0}}, {"T", 3}, {"runs", 1},
                        {"gamma", 0.9}, {"algorithms", {"uncorrected"}}});
  const auto csv = scratch("fail.csv");
  const Outcome o = invoke({"sweep", "--config", cfg.string(), "--out", csv.string()});
  CHECK(o.code == 1);
  CHECK(count_lines(csv) == 2);
  std::filesystem::remove(cfg);
  std::filesystem::remove(csv);
}

TEST_CASE("cli timing", "[cli]") {
  const auto cfg = write_config("timing.json", json{{"lambda_grid", {0.5}}, {"alpha_grid", {1.0}},
                                                    {"T", 20}, {"runs", 1}, {"gamma", 0.9}});
  const Outcome o = invoke({"timing", "--config", cfg.string(), "--repetitions", "2"});
  REQUIRE(o.code == 0);
  const json doc = json::parse(o.out);
  CHECK(doc["timing"].size() == 3);
  CHECK(doc["timing"][0]["samples"].size() == 2);
  std::filesystem::remove(cfg);
}
