// Closed-form references for LSTD(lambda): ergodic fixed points, the tail
// bound on the truncated return, and single-state bias/variance formulas with
// a Monte-Carlo check.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "dense.hpp"
#include "mrp.hpp"
#include "parallel.hpp"
#include "seeding.hpp"

namespace lstd_lab {

struct FixedPoint {
  Matrix A_bar;
  Vector b_bar;
  Vector theta_bar;
};

/// A_bar = Phi' D_pi (I - gamma P)(I - lambda gamma P)^{-1} Phi,
/// b_bar = Phi' D_pi (I - lambda gamma P)^{-1} R, theta_bar = A_bar^{-1} b_bar.
inline FixedPoint fixed_point(const MrpModel& model, const FeatureMap& features, double lambda,
                              double gamma) {
  const std::size_t n = model.n;
  const Vector pi = stationary_distribution(model);

  Matrix resolvent_arg = scaled(model.P, -lambda * gamma);
  for (std::size_t i = 0; i < n; ++i) resolvent_arg(i, i) += 1.0;
  const Matrix resolvent = linear_system_inverse(resolvent_arg);  // (I - lambda gamma P)^{-1}

  Matrix discount = scaled(model.P, -gamma);
  for (std::size_t i = 0; i < n; ++i) discount(i, i) += 1.0;  // I - gamma P

  // Phi' D_pi
  Matrix weighted = transpose(features.Phi);
  for (std::size_t j = 0; j < weighted.rows(); ++j)
    for (std::size_t s = 0; s < n; ++s) weighted(j, s) *= pi[s];

  const Matrix left = multiply(weighted, resolvent);
  FixedPoint fp;
  fp.A_bar = multiply(multiply(multiply(weighted, discount), resolvent), features.Phi);
  fp.b_bar = multiply(left, model.R);
  fp.theta_bar = solve_regularized(fp.A_bar, fp.b_bar, 0.0);
  return fp;
}

/// Elementwise bound on (1/T)|b*_T - b_T|:
/// c^2 gamma/(1-gamma) (1/T) (1 - (lambda gamma)^T)/(1 - lambda gamma).
inline double lemma1_tail_bound(double c, double lambda, double gamma, std::size_t T) {
  const double lg = lambda * gamma;
  if (!(gamma >= 0.0 && gamma < 1.0) || !(lg >= 0.0 && lg < 1.0) || T < 1)
    throw std::invalid_argument("lemma1_tail_bound: need gamma < 1, lambda*gamma < 1, T >= 1");
  const double Td = static_cast<double>(T);
  return c * c * gamma / (1.0 - gamma) / Td * (1.0 - std::pow(lg, Td)) / (1.0 - lg);
}

/// Single-state MRP (phi == 1, reward mean mu, variance sigma^2) after T steps.
struct Prop1Report {
  double A_boy_T = 0.0;
  double A_unc_T = 0.0;
  double Delta_T = 0.0;
  double E_b_T = 0.0;
  double Var_b_T = 0.0;
  double bias_unc_exact = 0.0;
  double bias_unc_leading = 0.0;
  double var_ratio_exact = 0.0;
  double var_ratio_leading = 0.0;
};

namespace detail {

/// w_n = (1 - (lambda gamma)^n) / (1 - lambda gamma) = sum_{k<n} (lambda gamma)^k
inline std::vector<double> return_weights(double lambda, double gamma, std::size_t T) {
  std::vector<double> w(T);
  const double lg = lambda * gamma;
  double partial = 0.0;
  double power = 1.0;
  for (std::size_t n = 0; n < T; ++n) {
    partial += power;
    power *= lg;
    w[n] = partial;
  }
  return w;
}

}  // namespace detail

inline Prop1Report prop1_closed_forms(double lambda, double gamma, std::size_t T, double mu,
                                      double sigma_sq) {
  const double lg = lambda * gamma;
  if (!(gamma >= 0.0 && gamma < 1.0) || !(lg >= 0.0 && lg < 1.0) || T < 1)
    throw std::invalid_argument("prop1_closed_forms: need gamma < 1, lambda*gamma < 1, T >= 1");
  const auto w = detail::return_weights(lambda, gamma, T);
  std::vector<double> w_sq(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w_sq[i] = w[i] * w[i];
  const double sum_w = pairwise_sum(w);
  const double sum_w_sq = pairwise_sum(w_sq);
  const double Td = static_cast<double>(T);

  Prop1Report r;
  r.A_boy_T = (1.0 - gamma) * sum_w;
  r.Delta_T = gamma * (1.0 - std::pow(lg, Td)) / (1.0 - lg);
  r.A_unc_T = r.A_boy_T + r.Delta_T;
  r.E_b_T = mu * sum_w;
  r.Var_b_T = sigma_sq * sum_w_sq;
  r.bias_unc_exact = -(r.Delta_T / (r.A_boy_T + r.Delta_T)) * mu / (1.0 - gamma);
  r.bias_unc_leading = -gamma * mu / ((1.0 - gamma) * (1.0 - gamma) * Td);
  const double ratio = (r.A_boy_T + r.Delta_T) / r.A_boy_T;
  r.var_ratio_exact = ratio * ratio;
  r.var_ratio_leading = 1.0 + 2.0 * gamma / ((1.0 - gamma) * Td);
  return r;
}

struct Prop1Empirical {
  double mean_b = 0.0;
  double var_b = 0.0;
  double mean_theta_unc = 0.0;
  double mean_theta_boy = 0.0;
  double var_theta_unc = 0.0;
  double var_theta_boy = 0.0;
};

/// Simulates b_T = sum_n w_n R_n with i.i.d. Gaussian rewards, once per run.
/// Run r draws from its own engine seeded by derive_seed(seed, r), and the
/// aggregates use pairwise sums over run index, so the result does not depend
/// on how runs are spread over threads.
inline Prop1Empirical prop1_monte_carlo(double lambda, double gamma, std::size_t T, double mu,
                                        double sigma, std::size_t runs, std::uint64_t seed,
                                        std::size_t threads = 1) {
  if (runs < 1000) throw std::invalid_argument("prop1_monte_carlo: runs must be >= 1000");
  const Prop1Report closed = prop1_closed_forms(lambda, gamma, T, mu, sigma * sigma);
  const auto w = detail::return_weights(lambda, gamma, T);

  std::vector<double> samples(runs);
  parallel_for(runs, threads, [&](std::size_t run) {
    Engine rng(derive_seed(seed, run));
    std::normal_distribution<double> noise(0.0, 1.0);
    double b = 0.0;
    for (double wn : w) b += wn * (mu + sigma * noise(rng));
    samples[run] = b;
  });

  // shifted two-pass moments: identical samples give exactly zero variance
  auto mean_and_var = [](std::span<const double> xs) {
    const double pivot = xs.front();
    std::vector<double> dev(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) dev[i] = xs[i] - pivot;
    const double n = static_cast<double>(xs.size());
    const double mean_dev = pairwise_sum(dev) / n;
    for (double& x : dev) x = (x - mean_dev) * (x - mean_dev);
    return std::pair{pivot + mean_dev, pairwise_sum(dev) / (n - 1.0)};
  };

  const auto [mean_b, var_b] = mean_and_var(samples);
  std::vector<double> theta(runs);
  Prop1Empirical out;
  out.mean_b = mean_b;
  out.var_b = var_b;
  for (std::size_t i = 0; i < runs; ++i) theta[i] = samples[i] / closed.A_unc_T;
  std::tie(out.mean_theta_unc, out.var_theta_unc) = mean_and_var(theta);
  for (std::size_t i = 0; i < runs; ++i) theta[i] = samples[i] / closed.A_boy_T;
  std::tie(out.mean_theta_boy, out.var_theta_boy) = mean_and_var(theta);
  return out;
}

}  // namespace lstd_lab
