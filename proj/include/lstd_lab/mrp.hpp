// Random Markov reward processes, state representations, simulation and
// analytic ground truth (stationary distribution, discounted values).
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dense.hpp"
#include "seeding.hpp"

namespace lstd_lab {

class NotErgodic : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-stochastic chain with an expected reward earned on leaving each state.
struct MrpModel {
  std::size_t n = 0;
  std::size_t branch = 0;
  double sigma = 0.0;
  Matrix P;
  Vector R;
};

enum class FeatureKind { tabular, binary, nonbinary };

inline std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::tabular: return "tabular";
    case FeatureKind::binary: return "binary";
    case FeatureKind::nonbinary: return "nonbinary";
  }
  return "?";
}

inline FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "tabular") return FeatureKind::tabular;
  if (s == "binary") return FeatureKind::binary;
  if (s == "nonbinary" || s == "non-binary") return FeatureKind::nonbinary;
  throw std::invalid_argument("unknown feature kind: " + std::string(s));
}

struct FeatureMap {
  FeatureKind kind = FeatureKind::tabular;
  std::size_t d = 0;
  Matrix Phi;  // n x d, row s is phi(s)

  [[nodiscard]] std::span<const double> phi(std::size_t state) const { return Phi.row(state); }
};

struct Trajectory {
  std::vector<std::size_t> states;  // s_0 .. s_T
  std::vector<double> rewards;      // r_1 .. r_T (rewards[t] is r_{t+1})
  std::vector<Vector> features;     // phi_0 .. phi_T

  [[nodiscard]] std::size_t length() const noexcept { return rewards.size(); }
};

/// Compact dimension used by the binary and non-binary representations.
inline std::size_t compact_dimension(std::size_t n) {
  std::size_t d = 0;
  while ((std::size_t{1} << (d + 1)) <= n) ++d;
  return d + 1;  // floor(log2 n) + 1
}

namespace detail {

inline bool strongly_connected(const Matrix& P) {
  const std::size_t n = P.rows();
  if (n == 0) return false;
  auto reach_all = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t s = stack.back();
      stack.pop_back();
      for (std::size_t t = 0; t < n; ++t) {
        const double p = forward ? P(s, t) : P(t, s);
        if (p > 0.0 && !seen[t]) {
          seen[t] = 1;
          ++count;
          stack.push_back(t);
        }
      }
    }
    return count == n;
  };
  return reach_all(true) && reach_all(false);
}

}  // namespace detail

/// Whether every state communicates with every other state.
inline bool is_ergodic(const MrpModel& model) { return detail::strongly_connected(model.P); }

/// Draws a random MRP.  Each state gets `branch` distinct successors with
/// normalized uniform(0,1] weights and a standard-normal expected reward.
/// One successor of every state is its successor on a random Hamiltonian
/// cycle, which makes the chain irreducible for any branch >= 1; the other
/// branch - 1 successors are drawn uniformly without replacement.
inline MrpModel generate_random_mrp(std::size_t n, std::size_t branch, double sigma,
                                    std::uint64_t seed) {
  if (n == 0 || branch == 0 || branch > n)
    throw std::invalid_argument("generate_random_mrp: need 1 <= branch <= n");
  if (!(sigma >= 0.0)) throw std::invalid_argument("generate_random_mrp: sigma must be >= 0");

  Engine rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_index = [&](std::size_t bound) {  // uniform in [0, bound)
    return std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(bound)), bound - 1);
  };
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> cycle_next(n);
  std::vector<std::size_t> pool;
  std::vector<double> weights(branch);

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[draw_index(k)]);
    for (std::size_t k = 0; k < n; ++k) cycle_next[order[k]] = order[(k + 1) % n];

    MrpModel model{n, branch, sigma, Matrix(n, n), Vector(n)};
    for (std::size_t s = 0; s < n; ++s) {
      pool.clear();
      for (std::size_t t = 0; t < n; ++t)
        if (t != cycle_next[s]) pool.push_back(t);
      // partial Fisher-Yates: pool[0 .. branch-2] join the cycle successor
      for (std::size_t k = 0; k + 1 < branch; ++k)
        std::swap(pool[k], pool[k + draw_index(pool.size() - k)]);
      double total = 0.0;
      for (auto& w : weights) {
        w = 1.0 - uniform01(rng);  // (0, 1]
        total += w;
      }
      model.P(s, cycle_next[s]) = weights[0] / total;
      for (std::size_t k = 1; k < branch; ++k) model.P(s, pool[k - 1]) = weights[k] / total;
    }
    for (std::size_t s = 0; s < n; ++s) model.R[s] = normal(rng);
    if (is_ergodic(model)) return model;
  }
  throw NotErgodic("generate_random_mrp: no irreducible chain after 100 draws (n=" +
                   std::to_string(n) + ", branch=" + std::to_string(branch) + ")");
}

inline FeatureMap build_features(const MrpModel& model, FeatureKind kind, std::uint64_t seed) {
  const std::size_t n = model.n;
  FeatureMap fm;
  fm.kind = kind;
  if (kind == FeatureKind::tabular) {
    fm.d = n;
    fm.Phi = Matrix::identity(n);
    return fm;
  }
  fm.d = compact_dimension(n);
  fm.Phi = Matrix(n, fm.d);
  Engine rng(seed);
  if (kind == FeatureKind::binary) {
    const std::uint64_t patterns = (std::uint64_t{1} << fm.d) - 1;  // nonzero patterns
    std::uniform_int_distribution<std::uint64_t> pick(1, patterns);
    for (std::size_t s = 0; s < n; ++s) {
      const std::uint64_t bits = pick(rng);
      const auto ones = static_cast<double>(std::popcount(bits));
      const double scale = 1.0 / std::sqrt(ones);
      for (std::size_t j = 0; j < fm.d; ++j)
        fm.Phi(s, j) = ((bits >> j) & 1U) != 0 ? scale : 0.0;
    }
    return fm;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t s = 0; s < n; ++s) {
    auto row = fm.Phi.row(s);
    double norm = 0.0;
    do {
      for (double& v : row) v = normal(rng);
      norm = std::sqrt(dot(row, row));
    } while (norm < 1e-8);
    for (double& v : row) v /= norm;
  }
  return fm;
}

/// Solves pi' P = pi', sum(pi) = 1 with the normalization replacing the last
/// balance equation.
inline Vector stationary_distribution(const MrpModel& model) {
  const std::size_t n = model.n;
  Matrix system(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) system(i, j) = model.P(j, i) - (i == j ? 1.0 : 0.0);
  Vector rhs(n);
  for (std::size_t j = 0; j < n; ++j) system(n - 1, j) = 1.0;
  rhs[n - 1] = 1.0;
  Vector pi = solve_regularized(system, rhs, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    if (!(pi[s] > 1e-14))
      throw SingularSystem("stationary_distribution: state " + std::to_string(s) +
                           " has no stationary mass (reducible chain)");
  }
  return pi;
}

/// v = (I - gamma P)^{-1} R, the expected discounted return from each state.
inline Vector true_values(const MrpModel& model, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("true_values: gamma in [0,1)");
  Matrix system = scaled(model.P, -gamma);
  for (std::size_t i = 0; i < model.n; ++i) system(i, i) += 1.0;
  return solve_regularized(system, model.R, 0.0);
}

/// Streaming sampler over an MRP.  Transitions and reward noise use separate
/// engines so the state sequence does not depend on sigma.
class MrpSampler {
 public:
  MrpSampler(const MrpModel& model, std::size_t start, std::uint64_t seed)
      : model_(&model),
        state_(start),
        transitions_(derive_seed(seed, 1)),
        noise_(derive_seed(seed, 2)) {
    if (start >= model.n) throw std::out_of_range("MrpSampler: start state out of range");
    successors_.resize(model.n);
    cumulative_.resize(model.n);
    for (std::size_t s = 0; s < model.n; ++s) {
      double acc = 0.0;
      for (std::size_t t = 0; t < model.n; ++t) {
        if (model.P(s, t) > 0.0) {
          acc += model.P(s, t);
          successors_[s].push_back(t);
          cumulative_[s].push_back(acc);
        }
      }
    }
  }

  [[nodiscard]] std::size_t state() const noexcept { return state_; }

  /// Leaves the current state; returns the reward r_{t+1} and moves to s_{t+1}.
  double step() {
    double reward = model_->R[state_];
    if (model_->sigma > 0.0) reward += model_->sigma * normal_(noise_);
    const auto& cum = cumulative_[state_];
    const double u = uniform01(transitions_) * cum.back();
    std::size_t k = 0;
    while (k + 1 < cum.size() && u >= cum[k]) ++k;
    state_ = successors_[state_][k];
    return reward;
  }

 private:
  const MrpModel* model_;
  std::size_t state_;
  Engine transitions_;
  Engine noise_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::vector<std::vector<std::size_t>> successors_;
  std::vector<std::vector<double>> cumulative_;
};

inline Trajectory simulate(const MrpModel& model, const FeatureMap& features, std::size_t T,
                           std::size_t start, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("simulate: T must be >= 1");
  MrpSampler sampler(model, start, seed);
  Trajectory traj;
  traj.states.reserve(T + 1);
  traj.rewards.reserve(T);
  traj.features.reserve(T + 1);
  traj.states.push_back(sampler.state());
  for (std::size_t t = 0; t < T; ++t) {
    traj.rewards.push_back(sampler.step());
    traj.states.push_back(sampler.state());
  }
  for (std::size_t s : traj.states) {
    auto row = features.phi(s);
    traj.features.emplace_back(std::vector<double>(row.begin(), row.end()));
  }
  return traj;
}

/// c with |R(s)| <= c and |phi_j(s)| <= c for every state and feature.
inline double reward_feature_bound(const MrpModel& model, const FeatureMap& features) {
  return std::max(norm_inf(model.R), max_abs(features.Phi));
}

}  // namespace lstd_lab
