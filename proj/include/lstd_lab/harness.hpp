// Experiment orchestration: lambda x alpha sweeps over random MRPs, MSE
// against true values, aggregation over runs, timing and CSV persistence.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "dense.hpp"
#include "lstd.hpp"
#include "mrp.hpp"
#include "parallel.hpp"
#include "seeding.hpp"

namespace lstd_lab {

enum class Algorithm { uncorrected, boyan, mixed, td_baseline };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::uncorrected: return "uncorrected";
    case Algorithm::boyan: return "boyan";
    case Algorithm::mixed: return "mixed";
    case Algorithm::td_baseline: return "td_baseline";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "uncorrected") return Algorithm::uncorrected;
  if (s == "boyan") return Algorithm::boyan;
  if (s == "mixed") return Algorithm::mixed;
  if (s == "td_baseline" || s == "td") return Algorithm::td_baseline;
  throw std::invalid_argument("unknown algorithm: " + std::string(s));
}

inline Strategy strategy_of(Algorithm a) {
  switch (a) {
    case Algorithm::uncorrected: return Strategy::uncorrected;
    case Algorithm::boyan: return Strategy::boyan;
    case Algorithm::mixed: return Strategy::mixed;
    case Algorithm::td_baseline: break;
  }
  throw std::invalid_argument("td_baseline has no LSTD strategy");
}

/// {i/100 | i = 0,10,...,90,91,...,100}
inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 90; i += 10) grid.push_back(i / 100.0);
  for (int i = 90; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

/// {2^i | i = -8,...,8}
inline std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = -8; i <= 8; ++i) grid.push_back(std::ldexp(1.0, i));
  return grid;
}

/// 30 step sizes spaced evenly in log2 over [2^-16, 2].
inline std::vector<double> default_step_size_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 30; ++i) grid.push_back(std::exp2(-16.0 + 17.0 * i / 29.0));
  return grid;
}

struct MrpTriple {
  std::size_t n = 10;
  std::size_t branch = 3;
  double sigma = 0.1;
  friend bool operator==(const MrpTriple&, const MrpTriple&) = default;
};

inline std::string default_label(const MrpTriple& t) {
  if (t == MrpTriple{10, 3, 0.1}) return "small";
  if (t == MrpTriple{100, 10, 0.1}) return "large";
  if (t == MrpTriple{100, 3, 0.0}) return "deterministic";
  std::ostringstream os;
  os << "n" << t.n << "_b" << t.branch << "_s" << t.sigma;
  return os.str();
}

struct ExperimentConfig {
  std::string label;  // empty: derived from mrp_triple
  MrpTriple mrp_triple;
  FeatureKind feature_kind = FeatureKind::tabular;
  std::vector<Algorithm> algorithms{Algorithm::uncorrected, Algorithm::boyan, Algorithm::mixed};
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<double> alpha_grid = default_alpha_grid();
  std::vector<double> step_size_grid = default_step_size_grid();
  std::size_t T = 10000;
  std::size_t runs = 50;
  std::uint64_t base_seed = 20200207;
  double gamma = 0.99;
  std::size_t start_state = 0;
  SolveMode solve = SolveMode::direct;
  std::size_t solve_stride = 1;

  [[nodiscard]] std::string mrp_label() const {
    return label.empty() ? default_label(mrp_triple) : label;
  }

  /// Second grid axis for an algorithm: regularization for LSTD, step size for TD.
  [[nodiscard]] const std::vector<double>& second_grid(Algorithm a) const {
    return a == Algorithm::td_baseline ? step_size_grid : alpha_grid;
  }

  void validate() const {
    if (lambda_grid.empty() || alpha_grid.empty() || step_size_grid.empty())
      throw std::invalid_argument("config: grids must be nonempty");
    if (algorithms.empty()) throw std::invalid_argument("config: no algorithms");
    if (lambda_grid.size() >= (1U << 15) || alpha_grid.size() >= (1U << 16) ||
        step_size_grid.size() >= (1U << 16) || runs >= (std::uint64_t{1} << 32))
      throw std::invalid_argument("config: grid too large for seed packing");
    for (double l : lambda_grid)
      if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("config: lambda outside [0,1]");
    for (double a : alpha_grid)
      if (!(a >= 0.0)) throw std::invalid_argument("config: alpha must be >= 0");
    for (double a : step_size_grid)
      if (!(a > 0.0)) throw std::invalid_argument("config: step size must be > 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("config: gamma in [0,1)");
    if (mrp_triple.branch < 1 || mrp_triple.branch > mrp_triple.n)
      throw std::invalid_argument("config: need 1 <= branch <= n");
    if (start_state >= mrp_triple.n) throw std::invalid_argument("config: start_state >= n");
    if (solve_stride < 1) throw std::invalid_argument("config: solve_stride must be >= 1");
    if (mrp_label().find_first_of(",\n\"") != std::string::npos)
      throw std::invalid_argument("config: label may not contain commas, quotes or newlines");
  }
};

// ---------------------------------------------------------------------------
// Seeds.  Every random object in a cell descends from base_seed through
// derive_seed.  Environment streams (MRP, features, trajectory) depend on the
// run index only, so all lambda/alpha cells and all algorithms of one run see
// the same MRP and the same sample path.

enum class Stream : std::uint64_t { mrp = 1, features = 2, trajectory = 3 };

inline std::uint64_t environment_seed(std::uint64_t base, Stream stream, std::size_t run) {
  const std::uint64_t word = (std::uint64_t{1} << 63) |
                             (static_cast<std::uint64_t>(stream) << 56) |
                             static_cast<std::uint64_t>(run);
  return derive_seed(base, word);
}

/// Identifier of one (lambda, alpha, run) cell.  Pairwise distinct across the
/// grid because the packed word is injective and derive_seed is a bijection.
inline std::uint64_t cell_seed(std::uint64_t base, std::size_t lambda_index,
                               std::size_t alpha_index, std::size_t run) {
  const std::uint64_t word = (static_cast<std::uint64_t>(lambda_index) << 48) |
                             (static_cast<std::uint64_t>(alpha_index) << 32) |
                             static_cast<std::uint64_t>(run);
  return derive_seed(base, word);
}

struct Environment {
  MrpModel model;
  FeatureMap features;
  Vector pi;
  Vector values;
  double value_scale = 1.0;  // sum_s pi(s) v(s)^2
  std::uint64_t mrp_seed = 0;
  std::uint64_t feature_seed = 0;
  std::uint64_t trajectory_seed = 0;
};

inline Environment make_environment(const ExperimentConfig& config, std::size_t run) {
  Environment env;
  env.mrp_seed = environment_seed(config.base_seed, Stream::mrp, run);
  env.feature_seed = environment_seed(config.base_seed, Stream::features, run);
  env.trajectory_seed = environment_seed(config.base_seed, Stream::trajectory, run);
  const auto& t = config.mrp_triple;
  env.model = generate_random_mrp(t.n, t.branch, t.sigma, env.mrp_seed);
  env.features = build_features(env.model, config.feature_kind, env.feature_seed);
  env.pi = stationary_distribution(env.model);
  env.values = true_values(env.model, config.gamma);
  double scale = 0.0;
  for (std::size_t s = 0; s < env.model.n; ++s) scale += env.pi[s] * env.values[s] * env.values[s];
  env.value_scale = scale;
  return env;
}

/// Normalized pi-weighted squared value error of a weight vector.
inline double value_error(const Environment& env, std::span<const double> theta) {
  double acc = 0.0;
  for (std::size_t s = 0; s < env.model.n; ++s) {
    const double diff = dot(env.features.phi(s), theta) - env.values[s];
    acc += env.pi[s] * diff * diff;
  }
  return acc / env.value_scale;
}

struct ResultRecord {
  std::string mrp;
  FeatureKind features = FeatureKind::tabular;
  Algorithm algo = Algorithm::boyan;
  double lambda = 0.0;
  double alpha = 0.0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double wall_ms = 0.0;
  bool failed = false;
};

namespace detail {

/// Runs one estimator over T transitions and returns the step-averaged error.
/// Returns +inf as soon as the weights stop being finite.
template <typename Learner>
double run_learner(const ExperimentConfig& config, const Environment& env, Learner&& learner) {
  MrpSampler sampler(env.model, config.start_state, env.trajectory_seed);
  const std::size_t T = config.T;
  double total = 0.0;
  double current = 0.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const std::size_t s = sampler.state();
    const double reward = sampler.step();
    const std::size_t s_next = sampler.state();
    learner.observe(env.features.phi(s), env.features.phi(s_next), reward);
    if ((t - 1) % config.solve_stride == 0) {
      const auto& theta = learner.weights();
      current = value_error(env, theta);
      if (!std::isfinite(current)) return std::numeric_limits<double>::infinity();
    }
    total += current;
  }
  return T == 0 ? 0.0 : total / static_cast<double>(T);
}

class TdLearner {
 public:
  TdLearner(std::size_t d, double step_size, double lambda, double gamma)
      : state_(make_td_baseline(d, step_size, lambda, gamma)) {}
  void observe(std::span<const double> phi, std::span<const double> phi_next, double reward) {
    td_baseline_step(state_, phi, phi_next, reward);
  }
  const Vector& weights() const { return state_.theta; }

 private:
  TdBaselineState state_;
};

}  // namespace detail

/// One cell against a prebuilt environment for `run_index`.
inline ResultRecord run_cell(const ExperimentConfig& config, const Environment& env,
                             Algorithm algo, std::size_t lambda_index, std::size_t alpha_index,
                             std::size_t run_index) {
  const auto& grid = config.second_grid(algo);
  if (lambda_index >= config.lambda_grid.size() || alpha_index >= grid.size())
    throw std::out_of_range("run_cell: grid index out of range");
  ResultRecord rec;
  rec.mrp = config.mrp_label();
  rec.features = config.feature_kind;
  rec.algo = algo;
  rec.lambda = config.lambda_grid[lambda_index];
  rec.alpha = grid[alpha_index];
  rec.run = run_index;
  rec.seed = cell_seed(config.base_seed, lambda_index, alpha_index, run_index);

  const auto start = std::chrono::steady_clock::now();
  try {
    if (algo == Algorithm::td_baseline) {
      rec.mse = detail::run_learner(
          config, env, detail::TdLearner(env.features.d, rec.alpha, rec.lambda, config.gamma));
    } else {
      rec.mse = detail::run_learner(config, env,
                                    LstdLearner(strategy_of(algo), env.features.d, rec.lambda,
                                                config.gamma, rec.alpha, config.solve));
    }
  } catch (const SingularSystem&) {
    rec.failed = true;
    rec.mse = std::numeric_limits<double>::quiet_NaN();
  }
  rec.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

inline ResultRecord run_cell(const ExperimentConfig& config, Algorithm algo,
                             std::size_t lambda_index, std::size_t alpha_index,
                             std::size_t run_index) {
  config.validate();
  return run_cell(config, make_environment(config, run_index), algo, lambda_index, alpha_index,
                  run_index);
}

struct CellKey {
  Algorithm algo;
  std::size_t lambda_index;
  std::size_t alpha_index;
  std::size_t run;
};

inline std::vector<CellKey> enumerate_cells(const ExperimentConfig& config) {
  std::vector<CellKey> cells;
  for (Algorithm algo : config.algorithms)
    for (std::size_t li = 0; li < config.lambda_grid.size(); ++li)
      for (std::size_t ai = 0; ai < config.second_grid(algo).size(); ++ai)
        for (std::size_t run = 0; run < config.runs; ++run) cells.push_back({algo, li, ai, run});
  return cells;
}

/// Full lambda x alpha x runs cross product for every configured algorithm.
/// Records come back in enumeration order whatever the thread count.
inline std::vector<ResultRecord> run_sweep(const ExperimentConfig& config,
                                           std::size_t threads = default_thread_count()) {
  config.validate();
  std::vector<Environment> envs(config.runs);
  parallel_for(config.runs, threads,
               [&](std::size_t run) { envs[run] = make_environment(config, run); });
  const auto cells = enumerate_cells(config);
  std::vector<ResultRecord> records(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    const CellKey& c = cells[i];
    records[i] = run_cell(config, envs[c.run], c.algo, c.lambda_index, c.alpha_index, c.run);
  });
  return records;
}

inline std::size_t count_failed(const std::vector<ResultRecord>& records) {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.failed; }));
}

// ---------------------------------------------------------------------------
// Aggregation.

struct BestAlpha {
  std::string mrp;
  FeatureKind features = FeatureKind::tabular;
  Algorithm algo = Algorithm::boyan;
  double lambda = 0.0;
  double best_alpha = 0.0;
  double best_mse_mean = 0.0;
  double std = 0.0;  // sample standard deviation over runs at best_alpha
  std::size_t runs = 0;
};

/// For each (mrp, features, algorithm, lambda): the alpha with the smallest
/// run-averaged MSE (ties to the smaller alpha) and the spread over runs there.
/// An alpha with any failed run is not eligible.
inline std::vector<BestAlpha> best_over_alpha(const std::vector<ResultRecord>& records) {
  using GroupKey = std::tuple<std::string, int, int, double>;
  std::map<GroupKey, std::map<double, std::vector<const ResultRecord*>>> groups;
  for (const auto& r : records)
    groups[{r.mrp, static_cast<int>(r.features), static_cast<int>(r.algo), r.lambda}][r.alpha]
        .push_back(&r);

  std::vector<BestAlpha> out;
  for (const auto& [key, by_alpha] : groups) {
    BestAlpha best;
    best.mrp = std::get<0>(key);
    best.features = static_cast<FeatureKind>(std::get<1>(key));
    best.algo = static_cast<Algorithm>(std::get<2>(key));
    best.lambda = std::get<3>(key);
    best.best_mse_mean = std::numeric_limits<double>::quiet_NaN();
    bool found = false;
    for (const auto& [alpha, recs] : by_alpha) {  // ascending alpha
      if (std::any_of(recs.begin(), recs.end(), [](const auto* r) { return r->failed; })) continue;
      std::vector<double> mses;
      mses.reserve(recs.size());
      for (const auto* r : recs) mses.push_back(r->mse);
      std::sort(mses.begin(), mses.end());  // order-independent aggregation
      const double mean = pairwise_sum(mses) / static_cast<double>(mses.size());
      if (found && !(mean < best.best_mse_mean)) continue;
      double var = 0.0;
      if (mses.size() > 1) {
        std::vector<double> sq(mses.size());
        for (std::size_t i = 0; i < mses.size(); ++i) sq[i] = (mses[i] - mean) * (mses[i] - mean);
        var = pairwise_sum(sq) / static_cast<double>(mses.size() - 1);
      }
      found = true;
      best.best_alpha = alpha;
      best.best_mse_mean = mean;
      best.std = std::sqrt(var);
      best.runs = mses.size();
    }
    out.push_back(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Timing.

struct TimingRow {
  Algorithm algo = Algorithm::boyan;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  double scale = 1.0;  // applied to TD so it is comparable per lambda x alpha cell
  std::vector<double> samples;
};

/// Wall-clock seconds for one full run (every lambda x alpha cell of run 0)
/// per algorithm, repeated `repetitions` times with algorithms interleaved.
/// The TD baseline is rescaled by |alpha grid| / |step-size grid|.
inline std::vector<TimingRow> timing_run(const ExperimentConfig& config, std::size_t repetitions = 5) {
  config.validate();
  if (repetitions < 1) throw std::invalid_argument("timing_run: repetitions must be >= 1");
  const Environment env = make_environment(config, 0);
  std::vector<TimingRow> rows;
  for (Algorithm algo : config.algorithms) {
    TimingRow row;
    row.algo = algo;
    if (algo == Algorithm::td_baseline)
      row.scale = static_cast<double>(config.alpha_grid.size()) /
                  static_cast<double>(config.step_size_grid.size());
    rows.push_back(row);
  }
  volatile double sink = 0.0;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    for (auto& row : rows) {
      const auto& grid = config.second_grid(row.algo);
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t li = 0; li < config.lambda_grid.size(); ++li)
        for (std::size_t ai = 0; ai < grid.size(); ++ai)
          sink = sink + run_cell(config, env, row.algo, li, ai, 0).mse;
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      row.samples.push_back(secs * row.scale);
    }
  }
  for (auto& row : rows) {
    const double n = static_cast<double>(row.samples.size());
    double mean = 0.0;
    for (double s : row.samples) mean += s;
    mean /= n;
    double var = 0.0;
    for (double s : row.samples) var += (s - mean) * (s - mean);
    row.mean_seconds = mean;
    row.std_seconds = row.samples.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV.

inline constexpr std::string_view kCsvHeader =
    "mrp,features,algo,lambda,alpha,run,seed,mse,wall_ms,failed";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void sort_records(std::vector<ResultRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tuple(to_string(a.algo), a.lambda, a.alpha, a.run) <
           std::tuple(to_string(b.algo), b.lambda, b.alpha, b.run);
  });
}

inline void write_records(std::vector<ResultRecord> records, const std::filesystem::path& path) {
  sort_records(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_records: cannot open " + path.string());
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.mrp << ',' << to_string(r.features) << ',' << to_string(r.algo) << ','
        << format_double(r.lambda) << ',' << format_double(r.alpha) << ',' << r.run << ','
        << r.seed << ',' << format_double(r.mse) << ',' << format_double(r.wall_ms) << ','
        << (r.failed ? 1 : 0) << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("write_records: write failed for " + path.string());
}

inline std::vector<ResultRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_records: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw std::runtime_error("read_records: bad header in " + path.string());
  std::vector<ResultRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 10)
      throw std::runtime_error("read_records: " + path.string() + ":" + std::to_string(line_no) +
                               ": expected 10 fields");
    ResultRecord r;
    r.mrp = f[0];
    r.features = parse_feature_kind(f[1]);
    r.algo = parse_algorithm(f[2]);
    r.lambda = std::stod(f[3]);
    r.alpha = std::stod(f[4]);
    r.run = std::stoull(f[5]);
    r.seed = std::stoull(f[6]);
    r.mse = std::stod(f[7]);
    r.wall_ms = std::stod(f[8]);
    r.failed = f[9] == "1";
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace lstd_lab
