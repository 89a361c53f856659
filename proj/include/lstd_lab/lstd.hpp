// Online LSTD(lambda) estimators.
//
// Three ways of accumulating the coefficient matrix A from an eligibility
// trace z_T = lambda*gamma*z_{T-1} + phi_T:
//
//   uncorrected  A += (z_T - gamma z_{T-1}) phi_T'         (one rank-one term)
//   boyan        A += z_k (phi_k - gamma phi_{k+1})'       (one rank-one term)
//   mixed        A += z_k phi_k', then A -= gamma z_k phi_{k+1}'
//
// All three share b += z_T r_{T+1}.  After T steps the uncorrected and Boyan
// matrices differ by exactly gamma z_{T-1} phi_T'.  The mixed scheme passes
// through the uncorrected matrix between its two half-updates and lands on
// Boyan's matrix after the second.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dense.hpp"
#include "mrp.hpp"

namespace lstd_lab {

enum class Strategy { uncorrected, boyan, mixed };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::uncorrected: return "uncorrected";
    case Strategy::boyan: return "boyan";
    case Strategy::mixed: return "mixed";
  }
  return "?";
}

struct TraceState {
  Vector z;       // z_T
  Vector z_prev;  // z_{T-1}; zero before the first update
  double lambda = 0.0;
  double gamma = 0.0;
};

inline TraceState make_trace(std::size_t d, double lambda, double gamma) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("trace: lambda in [0,1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("trace: gamma in [0,1)");
  return {Vector(d), Vector(d), lambda, gamma};
}

/// z_prev <- z; z <- lambda*gamma*z + phi.
inline void trace_update(TraceState& trace, std::span<const double> phi) {
  detail::require(phi.size() == trace.z.size(), "trace_update: dimension mismatch");
  const double decay = trace.lambda * trace.gamma;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    trace.z_prev[i] = trace.z[i];
    trace.z[i] = decay * trace.z[i] + phi[i];
  }
}

struct EstimatorState {
  Strategy strategy = Strategy::uncorrected;
  Matrix A;
  Vector b;
  TraceState trace;
  std::size_t step = 0;
  Vector last_feature;
  Vector work;  // scratch for the rank-one direction
};

inline EstimatorState make_estimator(Strategy strategy, std::size_t d, double lambda, double gamma) {
  return {strategy, Matrix(d, d), Vector(d), make_trace(d, lambda, gamma), 0, Vector(d), Vector(d)};
}

namespace detail {

inline void require_strategy(const EstimatorState& s, Strategy expected, const char* op) {
  if (s.strategy != expected)
    throw std::logic_error(std::string(op) + ": estimator strategy is " +
                           std::string(to_string(s.strategy)));
}

inline void accumulate_reward(EstimatorState& s, double reward) {
  const auto& z = s.trace.z;
  for (std::size_t i = 0; i < z.size(); ++i) s.b[i] += z[i] * reward;
}

inline void remember_feature(EstimatorState& s, std::span<const double> phi) {
  std::copy(phi.begin(), phi.end(), s.last_feature.begin());
}

}  // namespace detail

/// Consumes phi_T and r_{T+1}: A^Unc_{T+1} = A^Unc_T + (z_T - gamma z_{T-1}) phi_T'.
inline void step_uncorrected(EstimatorState& s, std::span<const double> phi, double reward) {
  detail::require_strategy(s, Strategy::uncorrected, "step_uncorrected");
  trace_update(s.trace, phi);
  const double gamma = s.trace.gamma;
  for (std::size_t i = 0; i < phi.size(); ++i) s.work[i] = s.trace.z[i] - gamma * s.trace.z_prev[i];
  rank_one_update_inplace(s.A, s.work, phi);
  detail::accumulate_reward(s, reward);
  detail::remember_feature(s, phi);
  ++s.step;
}

/// Consumes the transition (phi_k, r_{k+1}, phi_{k+1}): A += z_k (phi_k - gamma phi_{k+1})'.
inline void step_boyan(EstimatorState& s, std::span<const double> phi, std::span<const double> phi_next,
                       double reward) {
  detail::require_strategy(s, Strategy::boyan, "step_boyan");
  detail::require(phi_next.size() == phi.size(), "step_boyan: dimension mismatch");
  trace_update(s.trace, phi);
  const double gamma = s.trace.gamma;
  for (std::size_t i = 0; i < phi.size(); ++i) s.work[i] = phi[i] - gamma * phi_next[i];
  rank_one_update_inplace(s.A, s.trace.z, s.work);
  detail::accumulate_reward(s, reward);
  detail::remember_feature(s, phi_next);
  ++s.step;
}

/// First mixed half-update, on observing phi_k and r_{k+1}: A += z_k phi_k'.
/// Afterwards A equals the uncorrected matrix at step k+1.
inline void mixed_observe(EstimatorState& s, std::span<const double> phi, double reward) {
  detail::require_strategy(s, Strategy::mixed, "mixed_observe");
  trace_update(s.trace, phi);
  rank_one_update_inplace(s.A, s.trace.z, phi);
  detail::accumulate_reward(s, reward);
  detail::remember_feature(s, phi);
}

/// Second mixed half-update, on observing phi_{k+1}: A -= gamma z_k phi_{k+1}'.
inline void mixed_bootstrap(EstimatorState& s, std::span<const double> phi_next) {
  detail::require_strategy(s, Strategy::mixed, "mixed_bootstrap");
  rank_one_update_inplace(s.A, s.trace.z, phi_next, -s.trace.gamma);
  detail::remember_feature(s, phi_next);
  ++s.step;
}

inline void step_mixed(EstimatorState& s, std::span<const double> phi, std::span<const double> phi_next,
                       double reward) {
  mixed_observe(s, phi, reward);
  mixed_bootstrap(s, phi_next);
}

/// theta solving (A + alpha I) theta = b.
inline Vector solve_weights(const EstimatorState& s, double alpha) {
  if (s.step < 1) throw std::logic_error("solve_weights: no transitions observed");
  return solve_regularized(s.A, s.b, alpha);
}

// ---------------------------------------------------------------------------
// Forward views.  Literal O(T^2) double sums over a stored trajectory; these
// are what the recursions above must reproduce.

namespace detail {

inline void require_length(const Trajectory& traj, std::size_t T, bool needs_phi_T) {
  if (traj.length() < T || (needs_phi_T && traj.features.size() < T + 1))
    throw std::invalid_argument("forward_view: trajectory shorter than T");
}

/// sum_{t<T} phi_t (phi_t - (1-lambda) gamma sum_{m=1}^{T-t-1} (lambda gamma)^{m-1} phi_{t+m}
///                  - boot * gamma (lambda gamma)^{T-t-1} phi_T)'
inline Matrix forward_view_matrix(const Trajectory& traj, double lambda, double gamma,
                                  std::size_t T, bool boyan) {
  require_length(traj, T, boyan);
  const std::size_t d = traj.features.empty() ? 0 : traj.features.front().size();
  const double lg = lambda * gamma;
  Matrix A(d, d);
  Vector direction(d);
  for (std::size_t t = 0; t < T; ++t) {
    const Vector& phi_t = traj.features[t];
    for (std::size_t j = 0; j < d; ++j) direction[j] = phi_t[j];
    double weight = (1.0 - lambda) * gamma;  // (1-lambda) gamma (lambda gamma)^{m-1}, m = 1
    for (std::size_t m = 1; m + t < T; ++m) {
      const Vector& phi_tm = traj.features[t + m];
      for (std::size_t j = 0; j < d; ++j) direction[j] -= weight * phi_tm[j];
      weight *= lg;
    }
    if (boyan) {
      const double tail = gamma * std::pow(lg, static_cast<double>(T - t - 1));
      const Vector& phi_T = traj.features[T];
      for (std::size_t j = 0; j < d; ++j) direction[j] -= tail * phi_T[j];
    }
    rank_one_update_inplace(A, phi_t, direction);
  }
  return A;
}

}  // namespace detail

inline Matrix forward_view_a_unc(const Trajectory& traj, double lambda, double gamma, std::size_t T) {
  return detail::forward_view_matrix(traj, lambda, gamma, T, false);
}

inline Matrix forward_view_a_boy(const Trajectory& traj, double lambda, double gamma, std::size_t T) {
  return detail::forward_view_matrix(traj, lambda, gamma, T, true);
}

/// sum_{t<T} phi_t sum_{m=0}^{T-t-1} (lambda gamma)^m r_{t+1+m}
inline Vector forward_view_b(const Trajectory& traj, double lambda, double gamma, std::size_t T) {
  detail::require_length(traj, T, false);
  const std::size_t d = traj.features.empty() ? 0 : traj.features.front().size();
  const double lg = lambda * gamma;
  Vector b(d);
  for (std::size_t t = 0; t < T; ++t) {
    double ret = 0.0;
    double weight = 1.0;
    for (std::size_t m = 0; t + m < T; ++m) {
      ret += weight * traj.rewards[t + m];
      weight *= lg;
    }
    for (std::size_t j = 0; j < d; ++j) b[j] += traj.features[t][j] * ret;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Learner used by the experiment harness: one estimator plus the machinery to
// produce theta_t after every transition.

enum class SolveMode {
  direct,            // solve (A + alpha I) theta = b from scratch at each evaluation
  sherman_morrison,  // maintain (A + alpha I)^{-1} with rank-one inverse updates
};

inline std::string_view to_string(SolveMode m) {
  return m == SolveMode::direct ? "direct" : "sherman_morrison";
}

inline SolveMode parse_solve_mode(std::string_view s) {
  if (s == "direct") return SolveMode::direct;
  if (s == "sherman_morrison") return SolveMode::sherman_morrison;
  throw std::invalid_argument("unknown solve mode: " + std::string(s));
}

class LstdLearner {
 public:
  LstdLearner(Strategy strategy, std::size_t d, double lambda, double gamma, double alpha,
              SolveMode mode)
      : est_(make_estimator(strategy, d, lambda, gamma)),
        alpha_(alpha),
        mode_(mode),
        solver_(d),
        theta_(d),
        direction_(d) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("LstdLearner: alpha must be >= 0");
    if (mode_ == SolveMode::sherman_morrison && alpha_ > 0.0) {
      inverse_ = Matrix::identity(d);
      for (double& v : inverse_.data()) v /= alpha_;
      inverse_valid_ = true;
    }
  }

  /// Feeds one transition phi_t --r_{t+1}--> phi_{t+1}.
  void observe(std::span<const double> phi, std::span<const double> phi_next, double reward) {
    switch (est_.strategy) {
      case Strategy::uncorrected:
        step_uncorrected(est_, phi, reward);
        if (tracking_inverse()) inverse_update(est_.work, phi);
        break;
      case Strategy::boyan:
        step_boyan(est_, phi, phi_next, reward);
        if (tracking_inverse()) inverse_update(est_.trace.z, est_.work);
        break;
      case Strategy::mixed:
        mixed_observe(est_, phi, reward);
        if (tracking_inverse()) inverse_update(est_.trace.z, phi);
        mixed_bootstrap(est_, phi_next);
        if (tracking_inverse()) {
          const double gamma = est_.trace.gamma;
          for (std::size_t i = 0; i < direction_.size(); ++i) direction_[i] = -gamma * est_.trace.z[i];
          inverse_update(direction_, phi_next);
        }
        break;
    }
  }

  /// theta for the data seen so far.  Throws SingularSystem when
  /// A + alpha I cannot be solved.
  const Vector& weights() {
    if (mode_ == SolveMode::direct) {
      solver_.solve(est_.A, est_.b, alpha_, theta_.span());
      return theta_;
    }
    if (!inverse_valid_) {
      Matrix shifted = est_.A;
      for (std::size_t i = 0; i < shifted.rows(); ++i) shifted(i, i) += alpha_;
      inverse_ = linear_system_inverse(shifted);
      inverse_valid_ = true;
    }
    for (std::size_t i = 0; i < theta_.size(); ++i) theta_[i] = dot(inverse_.row(i), est_.b);
    return theta_;
  }

  [[nodiscard]] const EstimatorState& state() const noexcept { return est_; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] SolveMode mode() const noexcept { return mode_; }

 private:
  [[nodiscard]] bool tracking_inverse() const noexcept {
    return mode_ == SolveMode::sherman_morrison && inverse_valid_;
  }

  void inverse_update(std::span<const double> u, std::span<const double> v) {
    try {
      sherman_morrison_inplace(inverse_, u, v, sm_scratch_);
    } catch (const DenominatorNearZero&) {
      // rank-one update crosses a singular matrix; rebuild from A on next solve
      inverse_valid_ = false;
    }
  }

  EstimatorState est_;
  double alpha_;
  SolveMode mode_;
  RegularizedSolver solver_;
  Matrix inverse_;
  bool inverse_valid_ = false;
  ShermanMorrisonScratch sm_scratch_;
  Vector theta_;
  Vector direction_;
};

// ---------------------------------------------------------------------------
// True online TD(lambda) baseline (dutch traces).

struct TdBaselineState {
  Vector theta;
  Vector z;
  double v_old = 0.0;
  double step_size = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
};

inline TdBaselineState make_td_baseline(std::size_t d, double step_size, double lambda, double gamma) {
  if (!(step_size >= 0.0)) throw std::invalid_argument("td baseline: step size must be >= 0");
  return {Vector(d), Vector(d), 0.0, step_size, lambda, gamma};
}

inline void td_baseline_step(TdBaselineState& s, std::span<const double> phi,
                             std::span<const double> phi_next, double reward) {
  const double v = dot(s.theta, phi);
  const double v_next = dot(s.theta, phi_next);
  const double delta = reward + s.gamma * v_next - v;
  const double gl = s.gamma * s.lambda;
  const double step = s.step_size;
  const double z_phi = dot(s.z, phi);
  for (std::size_t i = 0; i < phi.size(); ++i)
    s.z[i] = gl * s.z[i] + (1.0 - step * gl * z_phi) * phi[i];
  const double trace_gain = step * (delta + v - s.v_old);
  const double feature_gain = step * (v - s.v_old);
  for (std::size_t i = 0; i < phi.size(); ++i)
    s.theta[i] += trace_gain * s.z[i] - feature_gain * phi[i];
  s.v_old = v_next;
}

}  // namespace lstd_lab
