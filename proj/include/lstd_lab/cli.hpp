// Command-line front end.  JSON goes to `out`, human-readable summaries to `err`.
//
// Exit codes: 0 success, 1 one or more sweep cells failed, 2 usage or input
// error, 3 runtime failure (I/O and the like).
#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "analysis.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "mrp.hpp"
#include "parallel.hpp"

namespace lstd_lab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCellFailures = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) {
    ExperimentConfig c;
    c.validate();
    return c;
  }
  return config_from_json(read_json_file(path));
}

inline std::size_t find_in_grid(const std::vector<double>& grid, double value, const char* what) {
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (std::abs(grid[i] - value) <= 1e-12 * std::max(1.0, std::abs(value))) return i;
  throw UsageError(std::string(what) + " " + format_double(value) + " is not in the configured grid");
}

inline json prop1_document(double lambda, double gamma, std::size_t T, double mu, double sigma,
                           std::size_t runs, std::uint64_t seed, std::size_t threads) {
  json doc;
  doc["command"] = "prop1";
  doc["config"] = {{"lambda", lambda}, {"gamma", gamma}, {"T", T},       {"mu", mu},
                   {"sigma", sigma},   {"runs", runs},   {"seed", seed}, {"run_seed_rule", "derive_seed(seed, run)"}};
  const Prop1Report closed = prop1_closed_forms(lambda, gamma, T, mu, sigma * sigma);
  doc["closed_form"] = to_json(closed);
  if (runs == 0) {
    doc["monte_carlo"] = nullptr;
    return doc;
  }
  const Prop1Empirical emp = prop1_monte_carlo(lambda, gamma, T, mu, sigma, runs, seed, threads);
  doc["monte_carlo"] = to_json(emp);
  const double rn = static_cast<double>(runs);
  const double se_b = std::sqrt(closed.Var_b_T / rn);
  const double se_theta_boy = std::sqrt(closed.Var_b_T / rn) / closed.A_boy_T;
  const double truth = mu / (1.0 - gamma);
  json cmp;
  cmp["true_value"] = truth;
  cmp["mean_b_z"] = se_b > 0.0 ? json((emp.mean_b - closed.E_b_T) / se_b) : json(nullptr);
  cmp["mean_theta_boy_z"] =
      se_theta_boy > 0.0 ? json((emp.mean_theta_boy - truth) / se_theta_boy) : json(nullptr);
  cmp["bias_unc_empirical"] = emp.mean_theta_unc - truth;
  cmp["var_ratio_empirical"] =
      emp.var_theta_unc > 0.0 ? json(emp.var_theta_boy / emp.var_theta_unc) : json(nullptr);
  doc["comparison"] = cmp;
  return doc;
}

inline json best_table(const std::vector<ResultRecord>& records) {
  json rows = json::array();
  for (const auto& b : best_over_alpha(records)) {
    rows.push_back({{"mrp", b.mrp},
                    {"features", to_string(b.features)},
                    {"algo", to_string(b.algo)},
                    {"lambda", b.lambda},
                    {"best_alpha", b.best_alpha},
                    {"best_mse_mean", b.best_mse_mean},
                    {"std", b.std},
                    {"runs", b.runs}});
  }
  return rows;
}

}  // namespace detail

/// Runs one command line (without the program name).
inline int execute(std::vector<std::string> args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"LSTD(lambda) experiment toolkit", "lstd_lab"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // gen-mrp
  std::size_t n = 10, branch = 3;
  double sigma = 0.1;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string feature_kind;
  std::uint64_t feature_seed = 0;
  auto* gen = app.add_subcommand("gen-mrp", "Generate a random MRP and write it as JSON");
  gen->add_option("--n", n, "Number of states")->required();
  gen->add_option("--branch", branch, "Successors per state")->required();
  gen->add_option("--sigma", sigma, "Reward noise standard deviation")->required();
  gen->add_option("--seed", seed, "Generator seed")->required();
  gen->add_option("--out", out_path, "Output JSON path (stdout when omitted)");
  gen->add_option("--features", feature_kind, "Also embed features: tabular|binary|nonbinary");
  gen->add_option("--feature-seed", feature_seed, "Seed for the feature draw");

  // run
  std::string config_path;
  std::string algo_name = "boyan";
  double lambda = 0.0, alpha = 1.0;
  std::size_t run_index = 0;
  auto* run = app.add_subcommand("run", "Run a single sweep cell");
  run->add_option("--config", config_path, "Experiment config JSON (defaults when omitted)");
  run->add_option("--algo", algo_name, "uncorrected|boyan|mixed|td_baseline");
  run->add_option("--lambda", lambda, "Lambda value from the config grid")->required();
  run->add_option("--alpha", alpha, "Alpha (or TD step size) value from the config grid")->required();
  run->add_option("--run", run_index, "Run index");

  // sweep
  std::size_t threads = default_thread_count();
  auto* sweep = app.add_subcommand("sweep", "Run the full lambda x alpha x runs sweep");
  sweep->add_option("--config", config_path, "Experiment config JSON (defaults when omitted)");
  sweep->add_option("--out", out_path, "Output CSV path")->required();
  sweep->add_option("--threads", threads, "Worker threads (default LSTD_LAB_THREADS or CPU count)");

  // prop1
  std::size_t horizon = 10, runs = 0;
  double gamma = 0.9, mu = 1.0;
  auto* prop1 = app.add_subcommand("prop1", "Single-state bias/variance closed forms and Monte Carlo");
  prop1->add_option("--lambda", lambda)->required();
  prop1->add_option("--gamma", gamma)->required();
  prop1->add_option("--T", horizon)->required();
  prop1->add_option("--mu", mu)->required();
  prop1->add_option("--sigma", sigma)->required();
  prop1->add_option("--runs", runs, "Monte-Carlo runs (0 skips, otherwise >= 1000)");
  prop1->add_option("--seed", seed);
  prop1->add_option("--threads", threads);

  // fixed-point
  std::string mrp_path;
  auto* fixed = app.add_subcommand("fixed-point", "Asymptotic A, b and theta for an MRP");
  fixed->add_option("--mrp", mrp_path, "MRP JSON from gen-mrp")->required();
  fixed->add_option("--features", feature_kind, "tabular|binary|nonbinary (default: embedded Phi)");
  fixed->add_option("--feature-seed", feature_seed);
  fixed->add_option("--lambda", lambda)->required();
  fixed->add_option("--gamma", gamma)->required();

  // timing
  std::size_t repetitions = 5;
  auto* timing = app.add_subcommand("timing", "Per-algorithm wall time of one full run");
  timing->add_option("--config", config_path, "Experiment config JSON (defaults when omitted)");
  timing->add_option("--repetitions", repetitions, "Repetitions (>= 5 recommended)");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const MrpModel model = generate_random_mrp(n, branch, sigma, seed);
      std::optional<FeatureMap> fm;
      if (!feature_kind.empty())
        fm = build_features(model, parse_feature_kind(feature_kind), feature_seed);
      json doc = mrp_to_json(model, fm ? &*fm : nullptr);
      doc["seed"] = seed;
      if (fm) doc["feature_seed"] = feature_seed;
      if (out_path.empty()) {
        out << doc.dump(2) << '\n';
      } else {
        write_json_file(doc, out_path);
        err << "wrote MRP (n=" << n << ", branch=" << branch << ") to " << out_path << '\n';
      }
      return kExitOk;
    }

    if (run->parsed()) {
      const ExperimentConfig config = detail::load_config(config_path);
      const Algorithm algo = parse_algorithm(algo_name);
      const std::size_t li = detail::find_in_grid(config.lambda_grid, lambda, "lambda");
      const std::size_t ai = detail::find_in_grid(config.second_grid(algo), alpha, "alpha");
      if (run_index >= config.runs) throw UsageError("--run must be below config runs");
      const Environment env = make_environment(config, run_index);
      const ResultRecord rec = run_cell(config, env, algo, li, ai, run_index);
      json doc;
      doc["command"] = "run";
      doc["config"] = to_json(config);
      doc["cell"] = {{"lambda_index", li}, {"alpha_index", ai}, {"run", run_index},
                     {"mrp_seed", env.mrp_seed}, {"feature_seed", env.feature_seed},
                     {"trajectory_seed", env.trajectory_seed}};
      doc["record"] = to_json(rec);
      out << doc.dump(2) << '\n';
      err << to_string(algo) << " lambda=" << rec.lambda << " alpha=" << rec.alpha
          << " run=" << run_index << (rec.failed ? " FAILED" : " mse=" + format_double(rec.mse))
          << '\n';
      return rec.failed ? kExitCellFailures : kExitOk;
    }

    if (sweep->parsed()) {
      const ExperimentConfig config = detail::load_config(config_path);
      const auto records = run_sweep(config, threads);
      write_records(records, out_path);
      const std::size_t failed = count_failed(records);
      json doc;
      doc["command"] = "sweep";
      doc["config"] = to_json(config);
      doc["records"] = records.size();
      doc["failed"] = failed;
      doc["out"] = out_path;
      doc["best_over_alpha"] = detail::best_table(records);
      out << doc.dump(2) << '\n';
      err << "sweep: " << records.size() << " cells, " << failed << " failed, written to "
          << out_path << '\n';
      return failed == 0 ? kExitOk : kExitCellFailures;
    }

    if (prop1->parsed()) {
      if (runs != 0 && runs < 1000) throw UsageError("--runs must be 0 or >= 1000");
      out << detail::prop1_document(lambda, gamma, horizon, mu, sigma, runs, seed, threads).dump(2)
          << '\n';
      return kExitOk;
    }

    if (fixed->parsed()) {
      const json doc_in = read_json_file(mrp_path);
      const MrpModel model = mrp_from_json(doc_in);
      FeatureMap fm;
      if (!feature_kind.empty()) {
        fm = build_features(model, parse_feature_kind(feature_kind), feature_seed);
      } else if (doc_in.contains("Phi")) {
        fm = features_from_json(doc_in);
      } else {
        throw UsageError("--features is required when the MRP file has no embedded Phi");
      }
      const FixedPoint fp = fixed_point(model, fm, lambda, gamma);
      json doc;
      doc["command"] = "fixed-point";
      doc["config"] = {{"mrp", mrp_path},
                       {"features", to_string(fm.kind)},
                       {"feature_seed", feature_kind.empty() ? json(nullptr) : json(feature_seed)},
                       {"lambda", lambda},
                       {"gamma", gamma}};
      doc["fixed_point"] = to_json(fp);
      out << doc.dump(2) << '\n';
      return kExitOk;
    }

    if (timing->parsed()) {
      const ExperimentConfig config = detail::load_config(config_path);
      const auto rows = timing_run(config, repetitions);
      json doc;
      doc["command"] = "timing";
      doc["config"] = to_json(config);
      doc["repetitions"] = repetitions;
      json table = json::array();
      err << std::left << std::setw(14) << "algorithm" << "seconds per run\n";
      for (const auto& r : rows) {
        table.push_back({{"algo", to_string(r.algo)},
                         {"mean_seconds", r.mean_seconds},
                         {"std_seconds", r.std_seconds},
                         {"scale", r.scale},
                         {"samples", r.samples}});
        err << std::left << std::setw(14) << to_string(r.algo) << std::fixed
            << std::setprecision(3) << r.mean_seconds << " +- " << r.std_seconds << '\n';
      }
      doc["timing"] = table;
      out << doc.dump(2) << '\n';
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace lstd_lab::cli
