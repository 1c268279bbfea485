// MAP-EM computation of the representer weights: midpoint initializer,
// erf-ratio conditional means, and the regularized solves
//   c^{j+1} = (K + gamma_tilde I)^{-1} ztilde^{j},
// sharing one Cholesky factorization across all iterations.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "lebid/hyper_em.hpp"
#include "lebid/sampler.hpp"
#include "lebid/trunc_gauss.hpp"

namespace lebid {

/// Weight iterate.
struct WeightState {
  Vector c;
  int iteration = 0;
  bool converged = false;
};

struct WeightSolveConfig {
  int m_iter = 40;
  double eps = 1e-4;
};

/// Final weights plus the per-iteration posterior objective values. The
/// step trace holds the relative weight change of each accepted step.
struct WeightResult {
  Vector c;
  std::vector<double> objective_trace;
  std::vector<double> step_trace;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::LLT<Matrix> factor_regularized(const Matrix& K, double gamma_tilde) {
  const Eigen::Index N = K.rows();
  Matrix A = K + gamma_tilde * Matrix::Identity(N, N);
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() == Eigen::Success) return llt;
  const double scale = A.trace() / static_cast<double>(N);
  for (double j : {1e-12, 1e-8}) {
    llt.compute(A + j * scale * Matrix::Identity(N, N));
    if (llt.info() == Eigen::Success) return llt;
  }
  throw std::runtime_error("factor_regularized: (K + gamma_tilde I) not factorizable");
}

// log integral_band exp(-(z - pred)^2 / (2 sigma^2)) dz, tail-safe
inline double log_band_integral(double eta, double h, double pred, double sigma) {
  const double u = (eta - pred) / (std::numbers::sqrt2 * sigma);
  const double v = u + h / (std::numbers::sqrt2 * sigma);
  // integral = sigma sqrt(pi/2) (erf(v) - erf(u))
  const double lead = std::log(sigma) + 0.5 * std::log(M_PI / 2.0);
  if (u >= 6.0) {
    const double d = v * v - u * u;
    const double e = (d > 745.0) ? 0.0 : std::exp(-d);
    return lead - u * u + std::log(erfcx(u) - e * erfcx(v));
  }
  if (v <= -6.0) {
    const double d = u * u - v * v;
    const double e = (d > 745.0) ? 0.0 : std::exp(-d);
    return lead - v * v + std::log(erfcx(-v) - e * erfcx(-u));
  }
  return lead + std::log(erf_diff(u, v));
}

}  // namespace detail

/// Best worst-case initializer: solve (K + gamma_tilde I) c = band midpoints.
inline Vector init_midpoint(const Matrix& K, double gamma_tilde, const LebesgueDataset& ds) {
  if (K.rows() != ds.n()) throw std::invalid_argument("init_midpoint: size mismatch");
  const std::vector<double> mid = midpoints(ds);
  const Vector rhs = Eigen::Map<const Vector>(mid.data(), ds.n());
  return detail::factor_regularized(K, gamma_tilde).solve(rhs);
}

/// Conditional mean of the unquantized output over its band given the
/// current prediction: the truncated-normal mean of Normal(pred, sigma^2)
/// restricted to [eta, eta + h). Always strictly inside the band.
inline double conditional_mean(double eta_i, double h, double pred_i, double sigma) {
  if (!(h > 0.0)) throw std::invalid_argument("conditional_mean: h must be positive");
  return trunc_normal_mean(pred_i, sigma, eta_i, eta_i + h);
}

/// Posterior objective of the weight vector (to be maximized):
///   sum_i log integral_band exp(-(z - K_i^T c)^2 / (2 sigma^2)) dz
///   - gamma_tilde / sigma^2 * c^T K c / 2.
inline double posterior_objective(const Vector& c, const Matrix& K, double gamma_tilde,
                                  double sigma, const LebesgueDataset& ds) {
  const Vector pred = K * c;
  double acc = 0.0;
  for (int i = 0; i < ds.n(); ++i)
    acc += detail::log_band_integral(ds.eta[static_cast<std::size_t>(i)], ds.h, pred(i), sigma);
  const double gamma = gamma_tilde / (sigma * sigma);
  return acc - 0.5 * gamma * c.dot(K * c);
}

/// One MAP-EM step from the given state (factors the system itself; use
/// solve_weights for the full loop with a cached factorization).
inline WeightState map_em_step(const WeightState& state, const Matrix& K, double gamma_tilde,
                               double sigma, const LebesgueDataset& ds) {
  const auto llt = detail::factor_regularized(K, gamma_tilde);
  const Vector pred = K * state.c;
  Vector ztilde(ds.n());
  for (int i = 0; i < ds.n(); ++i)
    ztilde(i) = conditional_mean(ds.eta[static_cast<std::size_t>(i)], ds.h, pred(i), sigma);
  WeightState next;
  next.c = llt.solve(ztilde);
  next.iteration = state.iteration + 1;
  return next;
}

/// Full MAP-EM loop: midpoint init, then iterate until the relative weight
/// change drops below eps or m_iter is reached. The returned trace holds the
/// posterior objective at the initializer and after every accepted step.
inline WeightResult solve_weights(const Matrix& K, const HyperParams& rho,
                                  const LebesgueDataset& ds, const WeightSolveConfig& cfg = {}) {
  const int N = ds.n();
  if (K.rows() != N || K.cols() != N) throw std::invalid_argument("solve_weights: size mismatch");
  const double sigma = std::sqrt(rho.sigma2);
  const auto llt = detail::factor_regularized(K, rho.gamma_tilde);

  const std::vector<double> mid = midpoints(ds);
  Vector c = llt.solve(Eigen::Map<const Vector>(mid.data(), N));

  WeightResult res;
  res.objective_trace.push_back(posterior_objective(c, K, rho.gamma_tilde, sigma, ds));
  Vector ztilde(N);
  for (int j = 0; j < cfg.m_iter; ++j) {
    const Vector pred = K * c;
    for (int i = 0; i < N; ++i)
      ztilde(i) = conditional_mean(ds.eta[static_cast<std::size_t>(i)], ds.h, pred(i), sigma);
    const Vector c_next = llt.solve(ztilde);
    const double rel = (c_next - c).norm() / std::max(c.norm(), 1e-300);
    c = c_next;
    ++res.iterations;
    res.objective_trace.push_back(posterior_objective(c, K, rho.gamma_tilde, sigma, ds));
    res.step_trace.push_back(rel);
    if (rel < cfg.eps) {
      res.converged = true;
      break;
    }
  }
  res.c = std::move(c);
  return res;
}

}  // namespace lebid
