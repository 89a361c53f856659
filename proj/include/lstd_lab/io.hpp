// JSON documents: MRP snapshots, experiment configs and analysis reports.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "analysis.hpp"
#include "harness.hpp"
#include "mrp.hpp"

namespace lstd_lab {

using json = nlohmann::ordered_json;

inline json to_json(const Vector& v) { return json(v.values()); }

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(json(std::vector<double>(r.begin(), r.end())));
  }
  return rows;
}

inline Vector vector_from_json(const json& j) { return Vector(j.get<std::vector<double>>()); }

inline Matrix matrix_from_json(const json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = j.at(i).get<std::vector<double>>();
    if (row.size() != cols) throw std::invalid_argument("matrix JSON: ragged rows");
    std::copy(row.begin(), row.end(), m.row(i).begin());
  }
  return m;
}

/// {n, branch, sigma, P, R[, kind, Phi]}
inline json mrp_to_json(const MrpModel& model, const FeatureMap* features = nullptr) {
  json j;
  j["n"] = model.n;
  j["branch"] = model.branch;
  j["sigma"] = model.sigma;
  j["P"] = to_json(model.P);
  j["R"] = to_json(model.R);
  if (features != nullptr) {
    j["kind"] = to_string(features->kind);
    j["Phi"] = to_json(features->Phi);
  }
  return j;
}

inline MrpModel mrp_from_json(const json& j) {
  MrpModel m;
  m.n = j.at("n").get<std::size_t>();
  m.branch = j.at("branch").get<std::size_t>();
  m.sigma = j.at("sigma").get<double>();
  m.P = matrix_from_json(j.at("P"));
  m.R = vector_from_json(j.at("R"));
  if (m.P.rows() != m.n || m.P.cols() != m.n || m.R.size() != m.n)
    throw std::invalid_argument("MRP JSON: P must be n x n and R of length n");
  for (std::size_t s = 0; s < m.n; ++s) {
    double total = 0.0;
    for (double p : m.P.row(s)) {
      if (!(p >= 0.0)) throw std::invalid_argument("MRP JSON: negative transition probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("MRP JSON: row does not sum to 1");
  }
  return m;
}

inline FeatureMap features_from_json(const json& j) {
  FeatureMap fm;
  fm.kind = parse_feature_kind(j.at("kind").get<std::string>());
  fm.Phi = matrix_from_json(j.at("Phi"));
  fm.d = fm.Phi.cols();
  return fm;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["label"] = c.mrp_label();
  j["mrp_triple"] = json::array({c.mrp_triple.n, c.mrp_triple.branch, c.mrp_triple.sigma});
  j["feature_kind"] = to_string(c.feature_kind);
  json algos = json::array();
  for (auto a : c.algorithms) algos.push_back(to_string(a));
  j["algorithms"] = algos;
  j["lambda_grid"] = c.lambda_grid;
  j["alpha_grid"] = c.alpha_grid;
  j["step_size_grid"] = c.step_size_grid;
  j["T"] = c.T;
  j["runs"] = c.runs;
  j["base_seed"] = c.base_seed;
  j["gamma"] = c.gamma;
  j["start_state"] = c.start_state;
  j["solve"] = to_string(c.solve);
  j["solve_stride"] = c.solve_stride;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const json& j) {
  static const std::set<std::string> known{
      "label", "mrp_triple", "feature_kind", "algorithms", "lambda_grid", "alpha_grid",
      "step_size_grid", "T", "runs", "base_seed", "gamma", "start_state", "solve",
      "solve_stride"};
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");

  ExperimentConfig c;
  if (j.contains("label")) c.label = j["label"].get<std::string>();
  if (j.contains("mrp_triple")) {
    const auto& t = j["mrp_triple"];
    if (!t.is_array() || t.size() != 3)
      throw std::invalid_argument("config: mrp_triple must be [n, branch, sigma]");
    c.mrp_triple = {t[0].get<std::size_t>(), t[1].get<std::size_t>(), t[2].get<double>()};
  }
  if (j.contains("feature_kind"))
    c.feature_kind = parse_feature_kind(j["feature_kind"].get<std::string>());
  if (j.contains("algorithms")) {
    c.algorithms.clear();
    for (const auto& a : j["algorithms"]) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
  }
  if (j.contains("lambda_grid")) c.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
  if (j.contains("alpha_grid")) c.alpha_grid = j["alpha_grid"].get<std::vector<double>>();
  if (j.contains("step_size_grid"))
    c.step_size_grid = j["step_size_grid"].get<std::vector<double>>();
  if (j.contains("T")) c.T = j["T"].get<std::size_t>();
  if (j.contains("runs")) c.runs = j["runs"].get<std::size_t>();
  if (j.contains("base_seed")) c.base_seed = j["base_seed"].get<std::uint64_t>();
  if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
  if (j.contains("start_state")) c.start_state = j["start_state"].get<std::size_t>();
  if (j.contains("solve")) c.solve = parse_solve_mode(j["solve"].get<std::string>());
  if (j.contains("solve_stride")) c.solve_stride = j["solve_stride"].get<std::size_t>();
  if (c.mrp_label() == default_label(c.mrp_triple)) c.label.clear();
  c.validate();
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline json to_json(const Prop1Report& r) {
  return json{{"A_boy_T", r.A_boy_T},
              {"A_unc_T", r.A_unc_T},
              {"Delta_T", r.Delta_T},
              {"E_b_T", r.E_b_T},
              {"Var_b_T", r.Var_b_T},
              {"bias_unc_exact", r.bias_unc_exact},
              {"bias_unc_leading", r.bias_unc_leading},
              {"var_ratio_exact", r.var_ratio_exact},
              {"var_ratio_leading", r.var_ratio_leading}};
}

inline json to_json(const Prop1Empirical& e) {
  return json{{"mean_b", e.mean_b},
              {"var_b", e.var_b},
              {"mean_theta_unc", e.mean_theta_unc},
              {"mean_theta_boy", e.mean_theta_boy},
              {"var_theta_unc", e.var_theta_unc},
              {"var_theta_boy", e.var_theta_boy}};
}

inline json to_json(const FixedPoint& fp) {
  return json{{"A_bar", to_json(fp.A_bar)}, {"b_bar", to_json(fp.b_bar)},
              {"theta_bar", to_json(fp.theta_bar)}};
}

inline json to_json(const ResultRecord& r) {
  return json{{"mrp", r.mrp},         {"features", to_string(r.features)},
              {"algo", to_string(r.algo)}, {"lambda", r.lambda},
              {"alpha", r.alpha},     {"run", r.run},
              {"seed", r.seed},       {"mse", std::isfinite(r.mse) ? json(r.mse) : json(nullptr)},
              {"wall_ms", r.wall_ms}, {"failed", r.failed}};
}

}  // namespace lstd_lab
