#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lstd_lab/analysis.hpp"
#include "lstd_lab/lstd.hpp"
#include "oracles.hpp"

using namespace lstd_lab;

namespace {

EstimatorState feed(Strategy strategy, const Trajectory& traj, double lambda, double gamma,
                    std::size_t T) {
  EstimatorState s = make_estimator(strategy, traj.features[0].size(), lambda, gamma);
  for (std::size_t t = 0; t < T; ++t) {
    switch (strategy) {
      case Strategy::uncorrected: step_uncorrected(s, traj.features[t], traj.rewards[t]); break;
      case Strategy::boyan:
        step_boyan(s, traj.features[t], traj.features[t + 1], traj.rewards[t]);
        break;
      case Strategy::mixed: step_mixed(s, traj.features[t], traj.features[t + 1], traj.rewards[t]); break;
    }
  }
  return s;
}

Trajectory constant_trajectory(std::size_t T, double reward) {
  Trajectory traj;
  for (std::size_t t = 0; t <= T; ++t) {
    traj.states.push_back(0);
    traj.features.push_back(Vector{1.0});
    if (t < T) traj.rewards.push_back(reward);
  }
  return traj;
}

std::vector<std::vector<double>> as_rows(const Trajectory& traj) {
  std::vector<std::vector<double>> rows;
  for (const auto& f : traj.features) rows.push_back(f.values());
  return rows;
}

// outer product written out by hand
Matrix outer(std::span<const double> u, std::span<const double> v, double scale) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = scale * u[i] * v[j];
  return m;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
  return c;
}

}  // namespace

TEST_CASE("trace_update examples", "[lstd]") {
  TraceState tr = make_trace(2, 0.0, 0.9);
  tr.z = Vector{5.0, -3.0};
  trace_update(tr, Vector{0.25, 1.0});
  CHECK(tr.z == Vector{0.25, 1.0});

  TraceState acc = make_trace(2, 1.0, 0.9);
  trace_update(acc, Vector{1.0, 0.0});
  trace_update(acc, Vector{1.0, 0.0});
  CHECK(acc.z[0] == Catch::Approx(1.9).epsilon(1e-15));
  CHECK(acc.z[1] == 0.0);
  CHECK(acc.z_prev == Vector{1.0, 0.0});

  CHECK_THROWS_AS(make_trace(2, 1.5, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(make_trace(2, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("trace_update equals the explicit discounted sum", "[lstd]") {
  std::mt19937_64 rng(21);
  const Trajectory traj = oracle::random_trajectory(5, 19, rng);
  TraceState tr = make_trace(5, 0.5, 0.9);
  for (std::size_t t = 0; t < 20; ++t) trace_update(tr, traj.features[t]);
  const auto expected = oracle::explicit_trace(as_rows(traj), 19, 0.45);
  CHECK(oracle::max_abs_diff(tr.z, expected) <= 1e-12);
}

TEST_CASE("step_uncorrected scalar examples", "[lstd]") {
  EstimatorState s = make_estimator(Strategy::uncorrected, 1, 0.0, 0.9);
  step_uncorrected(s, Vector{1.0}, 2.5);
  CHECK(s.A(0, 0) == 1.0);
  CHECK(s.b[0] == 2.5);
  for (std::size_t T : {2u, 10u, 100u}) {
    const EstimatorState e = feed(Strategy::uncorrected, constant_trajectory(T, 1.0), 0.0, 0.9, T);
    CHECK(e.A(0, 0) == Catch::Approx(1.0 + 0.1 * static_cast<double>(T - 1)).epsilon(1e-12));
  }
}

TEST_CASE("step_boyan scalar examples", "[lstd]") {
  EstimatorState s = make_estimator(Strategy::boyan, 1, 0.0, 0.9);
  step_boyan(s, Vector{1.0}, Vector{1.0}, 3.0);
  CHECK(s.A(0, 0) == Catch::Approx(0.1).epsilon(1e-15));
  CHECK(s.b[0] == 3.0);
  for (double lambda : {0.0, 0.3, 0.8, 1.0}) {
    const std::size_t T = 40;
    const EstimatorState e = feed(Strategy::boyan, constant_trajectory(T, 1.0), lambda, 0.9, T);
    // (1 - gamma) sum_n (1 - (lambda gamma)^n) / (1 - lambda gamma), summed term by term
    const double lg = lambda * 0.9;
    double expected = 0.0;
    for (std::size_t n = 1; n <= T; ++n) {
      double w = 0.0;
      for (std::size_t k = 0; k < n; ++k) w += std::pow(lg, static_cast<double>(k));
      expected += 0.1 * w;
    }
    CHECK(std::abs(e.A(0, 0) - expected) <= 1e-12 * expected);
  }
}

TEST_CASE("step_mixed scalar example and strategy guard", "[lstd]") {
  EstimatorState s = make_estimator(Strategy::mixed, 1, 0.0, 0.9);
  step_mixed(s, Vector{1.0}, Vector{1.0}, 1.0);
  CHECK(s.A(0, 0) == Catch::Approx(0.1).epsilon(1e-15));
  CHECK(s.step == 1);
  CHECK_THROWS_AS(step_boyan(s, Vector{1.0}, Vector{1.0}, 1.0), std::logic_error);
  CHECK_THROWS_AS(step_uncorrected(s, Vector{1.0}, 1.0), std::logic_error);
}

TEST_CASE("recursions match the forward views on a sampled MRP trajectory", "[lstd]") {
  const MrpModel m = generate_random_mrp(3, 2, 0.1, 5);
  const FeatureMap fm = build_features(m, FeatureKind::tabular, 0);
  const Trajectory traj = simulate(m, fm, 16, 0, 77);
  const EstimatorState unc = feed(Strategy::uncorrected, traj, 0.7, 0.9, 15);
  const EstimatorState boy = feed(Strategy::boyan, traj, 0.7, 0.9, 15);
  CHECK(oracle::max_abs_diff(unc.A, forward_view_a_unc(traj, 0.7, 0.9, 15)) <= 1e-10);
  CHECK(oracle::max_abs_diff(unc.b, forward_view_b(traj, 0.7, 0.9, 15)) <= 1e-10);
  CHECK(oracle::max_abs_diff(boy.A, forward_view_a_boy(traj, 0.7, 0.9, 15)) <= 1e-10);
}

TEST_CASE("recursion and forward view agree on random trajectories", "[lstd][property]") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t d = 1 + trial % 8;
    const std::size_t T = 1 + (trial * 7) % 50;
    const double lambda = trial % 10 == 0 ? 1.0 : (trial % 10 == 1 ? 0.0 : unif(rng));
    const double gamma = 0.99 * unif(rng);
    const Trajectory traj = oracle::random_trajectory(d, T, rng);
    const EstimatorState unc = feed(Strategy::uncorrected, traj, lambda, gamma, T);
    const EstimatorState boy = feed(Strategy::boyan, traj, lambda, gamma, T);
    INFO("trial " << trial << " d=" << d << " T=" << T);
    CHECK(oracle::relative_diff(unc.A, forward_view_a_unc(traj, lambda, gamma, T)) <= 1e-9);
    CHECK(oracle::relative_diff(boy.A, forward_view_a_boy(traj, lambda, gamma, T)) <= 1e-9);
    CHECK(oracle::relative_diff(unc.b, forward_view_b(traj, lambda, gamma, T)) <= 1e-9);
  }
}

TEST_CASE("forward view boundary cases", "[lstd]") {
  std::mt19937_64 rng(23);
  const Trajectory traj = oracle::random_trajectory(3, 12, rng);
  const auto& p0 = traj.features[0];
  const auto& p1 = traj.features[1];
  // T = 1: single terms phi0 phi0' and phi0 (phi0 - gamma phi1)'
  CHECK(oracle::max_abs_diff(forward_view_a_unc(traj, 0.4, 0.8, 1), outer(p0, p0, 1.0)) <= 1e-15);
  CHECK(oracle::max_abs_diff(forward_view_a_boy(traj, 0.4, 0.8, 1),
                             add(outer(p0, p0, 1.0), outer(p0, p1, -0.8))) <= 1e-15);

  // lambda = 1: the (1 - lambda) inner sum vanishes
  Matrix gram(3, 3);
  for (std::size_t t = 0; t < 12; ++t) gram = add(gram, outer(traj.features[t], traj.features[t], 1.0));
  CHECK(oracle::max_abs_diff(forward_view_a_unc(traj, 1.0, 0.8, 12), gram) <= 1e-12);

  // lambda = 0: one-step TD matrix
  Matrix td(3, 3);
  for (std::size_t t = 0; t < 12; ++t) {
    td = add(td, outer(traj.features[t], traj.features[t], 1.0));
    if (t + 1 < 12) td = add(td, outer(traj.features[t], traj.features[t + 1], -0.8));
  }
  CHECK(oracle::max_abs_diff(forward_view_a_unc(traj, 0.0, 0.8, 12), td) <= 1e-12);

  // T = 12: A_boy = A_unc - gamma z_{T-1} phi_T'
  const auto z11 = oracle::explicit_trace(as_rows(traj), 11, 0.4 * 0.8);
  const Matrix corrected =
      add(forward_view_a_unc(traj, 0.4, 0.8, 12), outer(z11, traj.features[12], -0.8));
  CHECK(oracle::max_abs_diff(forward_view_a_boy(traj, 0.4, 0.8, 12), corrected) <= 1e-10);

  CHECK_THROWS_AS(forward_view_a_boy(traj, 0.4, 0.8, 13), std::invalid_argument);
}

TEST_CASE("cross-strategy identities hold at every step", "[lstd][property]") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + trial % 6;
    const std::size_t T = 30;
    const double lambda = std::fmod(0.07 * trial, 1.0);
    const double gamma = 0.5 + 0.015 * trial;
    const Trajectory traj = oracle::random_trajectory(d, T, rng);
    EstimatorState unc = make_estimator(Strategy::uncorrected, d, lambda, gamma);
    EstimatorState boy = make_estimator(Strategy::boyan, d, lambda, gamma);
    EstimatorState mix = make_estimator(Strategy::mixed, d, lambda, gamma);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& phi = traj.features[t];
      const auto& next = traj.features[t + 1];
      // both hold t transitions; Boyan's trace is z_{t-1}
      if (t > 0) {
        const Matrix boy_plus = add(boy.A, outer(boy.trace.z, phi, gamma));
        CHECK(oracle::max_abs_diff(boy_plus, unc.A) <= 1e-10);
      }
      step_uncorrected(unc, phi, traj.rewards[t]);
      // A^Unc_{t+1} = A^Boy_t + z_t phi_t'
      const auto z_t = oracle::explicit_trace(as_rows(traj), t, lambda * gamma);
      CHECK(oracle::max_abs_diff(add(boy.A, outer(z_t, phi, 1.0)), unc.A) <= 1e-10);
      // first mixed half-update lands on the same matrix
      mixed_observe(mix, phi, traj.rewards[t]);
      CHECK(oracle::max_abs_diff(mix.A, unc.A) <= 1e-10);
      mixed_bootstrap(mix, next);
      step_boyan(boy, phi, next, traj.rewards[t]);
      CHECK(oracle::max_abs_diff(mix.A, boy.A) <= 1e-10);
      CHECK(unc.b == boy.b);
      CHECK(mix.b == boy.b);
    }
  }
}

TEST_CASE("solve_weights examples", "[lstd]") {
  EstimatorState s = make_estimator(Strategy::boyan, 1, 0.0, 0.9);
  CHECK_THROWS_AS(solve_weights(s, 0.0), std::logic_error);
  s.step = 1;
  s.A(0, 0) = 2.0;
  s.b[0] = 4.0;
  CHECK(solve_weights(s, 0.0) == Vector{2.0});
  s.A(0, 0) = 1.0;
  s.b[0] = 1.0;
  CHECK(solve_weights(s, 1.0) == Vector{0.5});
  s.A(0, 0) = 0.0;
  CHECK_THROWS_AS(solve_weights(s, 0.0), SingularSystem);
}

TEST_CASE("Boyan on a single deterministic state is exact after any T", "[lstd]") {
  for (std::size_t T : {1u, 2u, 7u, 100u, 1000u}) {
    const EstimatorState e = feed(Strategy::boyan, constant_trajectory(T, 2.0), 0.0, 0.9, T);
    CHECK(solve_weights(e, 0.0)[0] == Catch::Approx(20.0).epsilon(1e-12));
  }
}

TEST_CASE("single-state runs reproduce the closed-form scalars", "[lstd]") {
  for (double lambda : {0.0, 0.5, 0.9}) {
    for (std::size_t T : {1u, 10u, 250u}) {
      const Prop1Report r = prop1_closed_forms(lambda, 0.9, T, 1.0, 1.0);
      const Trajectory traj = constant_trajectory(T, 1.0);
      CHECK(std::abs(feed(Strategy::boyan, traj, lambda, 0.9, T).A(0, 0) - r.A_boy_T) <= 1e-10);
      CHECK(std::abs(feed(Strategy::uncorrected, traj, lambda, 0.9, T).A(0, 0) - r.A_unc_T) <= 1e-10);
      CHECK(std::abs(feed(Strategy::mixed, traj, lambda, 0.9, T).A(0, 0) - r.A_boy_T) <= 1e-10);
    }
  }
}

TEST_CASE("LstdLearner: Sherman-Morrison agrees with direct solves", "[lstd]") {
  std::mt19937_64 rng(25);
  for (Strategy strategy : {Strategy::uncorrected, Strategy::boyan, Strategy::mixed}) {
    for (double alpha : {0.25, 1.0, 8.0}) {
      const Trajectory traj = oracle::random_trajectory(4, 60, rng);
      LstdLearner direct(strategy, 4, 0.6, 0.9, alpha, SolveMode::direct);
      LstdLearner sm(strategy, 4, 0.6, 0.9, alpha, SolveMode::sherman_morrison);
      for (std::size_t t = 0; t < 60; ++t) {
        direct.observe(traj.features[t], traj.features[t + 1], traj.rewards[t]);
        sm.observe(traj.features[t], traj.features[t + 1], traj.rewards[t]);
        const Vector a = direct.weights();
        const Vector b = sm.weights();
        CHECK(oracle::relative_diff(b, a) <= 1e-7);
      }
      CHECK(direct.state().A == sm.state().A);
    }
  }
  CHECK_THROWS_AS(LstdLearner(Strategy::boyan, 2, 0.5, 0.9, -1.0, SolveMode::direct),
                  std::invalid_argument);
}

TEST_CASE("LstdLearner rebuilds its inverse after a singular crossing", "[lstd]") {
  LstdLearner sm(Strategy::boyan, 1, 0.0, 0.5, 1.0, SolveMode::sherman_morrison);
  LstdLearner direct(Strategy::boyan, 1, 0.0, 0.5, 1.0, SolveMode::direct);
  // first step: A = 1 - 0.5 * 4 = -1, so A + I = 0; the second brings it back to 1
  sm.observe(Vector{1.0}, Vector{4.0}, 1.0);
  direct.observe(Vector{1.0}, Vector{4.0}, 1.0);
  CHECK_THROWS_AS(sm.weights(), SingularSystem);
  sm.observe(Vector{1.0}, Vector{0.0}, 1.0);
  direct.observe(Vector{1.0}, Vector{0.0}, 1.0);
  CHECK(sm.weights()[0] == Catch::Approx(direct.weights()[0]).epsilon(1e-12));
}

TEST_CASE("(1/T) A converges toward the fixed point on an ergodic chain", "[lstd]") {
  const MrpModel m = generate_random_mrp(10, 3, 0.1, 31);
  const FeatureMap fm = build_features(m, FeatureKind::tabular, 0);
  const FixedPoint fp = fixed_point(m, fm, 0.5, 0.9);
  const Trajectory traj = simulate(m, fm, 50000, 0, 32);
  EstimatorState unc = make_estimator(Strategy::uncorrected, 10, 0.5, 0.9);
  double early = 0.0;
  for (std::size_t t = 0; t < 50000; ++t) {
    step_uncorrected(unc, traj.features[t], traj.rewards[t]);
    if (t + 1 == 1000) early = norm_inf(subtract(scaled(unc.A, 1.0 / 1000.0), fp.A_bar));
  }
  const double late = norm_inf(subtract(scaled(unc.A, 1.0 / 50000.0), fp.A_bar));
  CHECK(late < early);
  CHECK(late < 0.05);
}

TEST_CASE("td_baseline examples", "[lstd]") {
  std::mt19937_64 rng(26);
  // lambda = 0 with v_old = theta'phi reduces to TD(0)
  for (int trial = 0; trial < 20; ++trial) {
    TdBaselineState s = make_td_baseline(3, 0.1, 0.0, 0.9);
    s.theta = oracle::random_vector(3, rng);
    const Vector phi = oracle::random_vector(3, rng);
    const Vector next = oracle::random_vector(3, rng);
    s.v_old = dot(s.theta, phi);
    const double r = 0.7;
    const double delta = r + 0.9 * dot(s.theta, next) - dot(s.theta, phi);
    Vector expected = s.theta;
    for (std::size_t i = 0; i < 3; ++i) expected[i] += 0.1 * delta * phi[i];
    td_baseline_step(s, phi, next, r);
    CHECK(oracle::max_abs_diff(s.theta, expected) <= 1e-12);
  }

  TdBaselineState frozen = make_td_baseline(2, 0.0, 0.7, 0.9);
  frozen.theta = Vector{1.0, -2.0};
  for (int k = 0; k < 10; ++k) td_baseline_step(frozen, Vector{1.0, 0.5}, Vector{0.0, 1.0}, 3.0);
  CHECK(frozen.theta == Vector{1.0, -2.0});

  TdBaselineState single = make_td_baseline(1, 0.1, 0.5, 0.9);
  for (int k = 0; k < 10000; ++k) td_baseline_step(single, Vector{1.0}, Vector{1.0}, 2.0);
  CHECK(std::abs(single.theta[0] - 20.0) <= 0.01 * 20.0);
}
