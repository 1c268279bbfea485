// Empirical-Bayes hyperparameter estimation for (gamma_tilde, beta, sigma^2)
// via EM. Each step draws the conditional second moment of the unquantized
// output over the band box, then minimizes the concentrated marginal
// likelihood through Cholesky and stacked-QR factorizations:
//
//   [ Phi L   C ]          [ R1  R2 ]
//   [  I      0 ] = Q_qr * [  0  R3 ],   O_beta/gamma_tilde = L L^T,  Qbar = C C^T,
//
//   objective(gt, beta) = N log(|C|_F^2 - |R2|_F^2) + 2 log det R1,
//   sigma^2 = (|C|_F^2 - |R2|_F^2) / N.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "lebid/kernel.hpp"
#include "lebid/nelder_mead.hpp"
#include "lebid/sampler.hpp"
#include "lebid/trunc_gauss.hpp"

namespace lebid {

/// Empirical-Bayes decision variables. gamma_tilde is the reparameterized
/// regularization weight gamma * sigma^2.
struct HyperParams {
  double gamma_tilde = 1.0;
  double beta = 1.0;
  double sigma2 = 1.0;
};

/// Admissible hyperparameter box; proposals outside are clamped.
struct HyperBox {
  double gamma_tilde_min = 1e-8, gamma_tilde_max = 1e6;
  double beta_min = 1e-3, beta_max = 1e3;
  double sigma2_min = 1e-10, sigma2_max = 1e6;
};

/// R1 (upper triangular, positive diagonal) and R2 blocks of the stacked QR.
struct QrBlocks {
  Matrix R1;
  Matrix R2;
};

/// EM loop configuration.
struct EmConfig {
  int m_iter = 40;
  double eps = 1e-3;
  int gibbs_samples = 1000;
  int gibbs_burn_in = 100;
  std::uint64_t seed = 0;
  std::optional<HyperParams> init;  // default: gamma_tilde 1, beta 1, sigma2 = (h/2)^2/3
  HyperBox box;
  int nm_max_evals = 60;
};

namespace detail {

// Cholesky with escalating relative-trace jitter.
inline Matrix chol_lower_jittered(const Matrix& M) {
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double scale = M.trace() / static_cast<double>(M.rows());
  for (double j : {1e-12, 1e-8}) {
    Eigen::LLT<Matrix> retry(M + j * scale * Matrix::Identity(M.rows(), M.cols()));
    if (retry.info() == Eigen::Success) return retry.matrixL();
  }
  throw std::runtime_error("cholesky failed after jitter escalation");
}

}  // namespace detail

/// Householder QR of the 2N x (N+m) stack [[phiL, C], [I, 0]]. R1 comes back
/// with a positive diagonal; R1^T R1 = phiL^T phiL + I and R1^T R2 = phiL^T C.
inline QrBlocks stacked_qr(const Matrix& phiL, const Matrix& C) {
  const Eigen::Index N = phiL.rows();
  if (phiL.cols() != N || C.rows() != N)
    throw std::invalid_argument("stacked_qr: dimension mismatch");
  const Eigen::Index m = C.cols();
  Matrix S = Matrix::Zero(2 * N, N + m);
  S.topLeftCorner(N, N) = phiL;
  S.topRightCorner(N, m) = C;
  S.bottomLeftCorner(N, N) = Matrix::Identity(N, N);
  Eigen::HouseholderQR<Matrix> qr(S);
  Matrix R = qr.matrixQR().topRows(N + m).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < N; ++i)
    if (R(i, i) < 0.0) R.row(i) = -R.row(i);
  return {R.topLeftCorner(N, N), R.topRightCorner(N, m)};
}

namespace detail {

// shared objective plumbing: builds L from O_beta/gamma_tilde, runs the QR,
// and returns the objective value plus the residual |C|^2 - |R2|^2
struct ObjectiveParts {
  double value = std::numeric_limits<double>::infinity();
  double residual = 0.0;
};

inline ObjectiveParts em_objective_parts(double gamma_tilde, double beta, const Matrix& C,
                                         const Matrix& phi, int q, double delta) {
  const Eigen::Index N = phi.rows();
  const KernelSpec spec{q, beta};
  const Matrix O = integrated_kernel_matrix(spec, delta, static_cast<int>(N));
  Matrix L;
  try {
    L = chol_lower_jittered(O / gamma_tilde);
  } catch (const std::runtime_error&) {
    return {};
  }
  const QrBlocks blocks = stacked_qr(phi * L, C);
  const double residual = C.squaredNorm() - blocks.R2.squaredNorm();
  if (!(residual > 0.0)) return {};
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) logdet += std::log(blocks.R1(i, i));
  return {static_cast<double>(N) * std::log(residual) + 2.0 * logdet, residual};
}

}  // namespace detail

/// Concentrated EM objective in (gamma_tilde, beta); +inf signals a
/// numerically inconsistent Qbar (non-positive residual).
inline double em_objective(const HyperParams& rho, const Matrix& C, const Matrix& phi,
                           int q, double delta) {
  return detail::em_objective_parts(rho.gamma_tilde, rho.beta, C, phi, q, delta).value;
}

/// Closed-form noise-variance update at the freshly accepted (gamma_tilde, beta).
inline double sigma2_update(const HyperParams& rho_next, const Matrix& C, const Matrix& phi,
                            int q, double delta) {
  const auto parts =
      detail::em_objective_parts(rho_next.gamma_tilde, rho_next.beta, C, phi, q, delta);
  if (!(parts.residual > 0.0))
    throw std::runtime_error("sigma2_update: non-positive residual; Qbar inconsistent");
  return parts.residual / static_cast<double>(phi.rows());
}

/// M-step: minimize the concentrated objective over (gamma_tilde, beta) in
/// log coordinates, then apply the sigma^2 update. With grid_seed set, a
/// coarse 8x8 log grid seeds the simplex (used on the first EM iteration).
/// Never returns a point worse than the incoming iterate.
inline HyperParams hyper_m_step(const Matrix& C, const Matrix& phi, int q, double delta,
                                const HyperParams& current, bool grid_seed,
                                const HyperBox& box, int nm_max_evals = 60,
                                double* objective_out = nullptr) {
  auto objective = [&](const Eigen::Vector2d& x) {
    return detail::em_objective_parts(std::exp(x(0)), std::exp(x(1)), C, phi, q, delta).value;
  };

  Eigen::Vector2d seed(std::log(current.gamma_tilde), std::log(current.beta));
  double seed_val = objective(seed);
  if (grid_seed) {
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        const double lg = std::log(1e-6) + a * (std::log(1e3) - std::log(1e-6)) / 7.0;
        const double lb = std::log(1e-2) + b * (std::log(1e2) - std::log(1e-2)) / 7.0;
        const double v = objective(Eigen::Vector2d(lg, lb));
        if (v < seed_val) {
          seed = {lg, lb};
          seed_val = v;
        }
      }
    }
  }

  NelderMeadOptions opt;
  opt.max_evals = nm_max_evals;
  opt.lower = {std::log(box.gamma_tilde_min), std::log(box.beta_min)};
  opt.upper = {std::log(box.gamma_tilde_max), std::log(box.beta_max)};
  const NelderMeadResult nm = nelder_mead_2d(objective, seed, opt);
  const bool nm_better = nm.f <= seed_val;
  const Eigen::Vector2d best = nm_better ? nm.x : seed;
  if (objective_out) *objective_out = nm_better ? nm.f : seed_val;

  HyperParams next;
  next.gamma_tilde = std::exp(best(0));
  next.beta = std::exp(best(1));
  next.sigma2 = sigma2_update(next, C, phi, q, delta);
  next.sigma2 = std::min(std::max(next.sigma2, box.sigma2_min), box.sigma2_max);
  return next;
}

/// One full EM step: conditional second moment over the band box at the
/// current iterate, Cholesky of Qbar, then the M-step above.
inline HyperParams hyper_em_step(const HyperParams& rho, const LebesgueDataset& ds,
                                 const Matrix& phi, int q, const EmConfig& cfg,
                                 bool grid_seed = false, std::uint64_t step_seed = 0,
                                 double* objective_out = nullptr) {
  const Eigen::Index N = phi.rows();
  if (N != ds.n()) throw std::invalid_argument("hyper_em_step: phi/dataset size mismatch");
  const KernelSpec spec{q, rho.beta};
  const Matrix O = integrated_kernel_matrix(spec, ds.delta, static_cast<int>(N));
  // z | rho ~ N(0, S),  S = sigma^2 (Phi (O/gt) Phi^T + I)
  Matrix S = rho.sigma2 * (phi * (O / rho.gamma_tilde) * phi.transpose() +
                           Matrix::Identity(N, N));
  S = 0.5 * (S + S.transpose()).eval();

  BoxRegion box;
  box.lower = Eigen::Map<const Vector>(ds.eta.data(), N);
  box.upper = box.lower.array() + ds.h;
  const Matrix draws = gibbs_sample_box(S, box, cfg.gibbs_samples, cfg.gibbs_burn_in, step_seed);
  Matrix Qbar = (draws.transpose() * draws) / static_cast<double>(cfg.gibbs_samples);
  Qbar = 0.5 * (Qbar + Qbar.transpose()).eval();

  Matrix C;
  {
    Eigen::LLT<Matrix> llt(Qbar);
    if (llt.info() == Eigen::Success) {
      C = llt.matrixL();
    } else {
      const double j = 1e-10 * Qbar.trace() / static_cast<double>(N);
      Eigen::LLT<Matrix> retry(Qbar + j * Matrix::Identity(N, N));
      if (retry.info() != Eigen::Success)
        throw std::runtime_error("hyper_em_step: Qbar not factorizable after jitter");
      C = retry.matrixL();
    }
  }
  return hyper_m_step(C, phi, q, ds.delta, rho, grid_seed, cfg.box, cfg.nm_max_evals,
                      objective_out);
}

/// EM trace and final iterate.
struct HyperResult {
  HyperParams rho;
  std::vector<double> objective_trace;   // accepted concentrated objective per step
  std::vector<HyperParams> iterate_trace;  // accepted (gt, beta, sigma2) per step
  int iterations = 0;
  bool converged = false;
};

/// Run hyper_em_step until the relative iterate change drops below eps or
/// m_iter is reached. Fully deterministic for a fixed cfg.seed.
inline HyperResult optimize_hyperparams(const LebesgueDataset& ds, const Matrix& phi, int q,
                                        const EmConfig& cfg) {
  HyperResult res;
  HyperParams rho = cfg.init.value_or(
      HyperParams{1.0, 1.0, (ds.h / 2.0) * (ds.h / 2.0) / 3.0});
  for (int j = 0; j < cfg.m_iter; ++j) {
    const std::uint64_t step_seed =
        cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(j + 1);
    HyperParams next;
    double objective = 0.0;
    try {
      next = hyper_em_step(rho, ds, phi, q, cfg, /*grid_seed=*/j == 0, step_seed, &objective);
    } catch (const std::runtime_error&) {
      break;  // keep the last valid iterate
    }
    res.objective_trace.push_back(objective);
    res.iterate_trace.push_back(next);
    const Eigen::Vector3d prev(rho.gamma_tilde, rho.beta, rho.sigma2);
    const Eigen::Vector3d cur(next.gamma_tilde, next.beta, next.sigma2);
    const double rel = (cur - prev).norm() / std::max(prev.norm(), 1e-300);
    rho = next;
    ++res.iterations;
    if (rel < cfg.eps) {
      res.converged = true;
      break;
    }
  }
  res.rho = rho;
  return res;
}

/// One-shot Empirical Bayes for point-valued data d (no truncation): the
/// second moment collapses to d d^T, C is the data column itself, the QR is
/// thin, and a single M-step yields the estimate.
inline HyperParams eb_point_estimate(const Vector& d, const Matrix& phi, int q, double delta,
                                     const HyperBox& box = {}, int nm_max_evals = 60) {
  const Matrix C = d;
  const HyperParams start{1.0, 1.0, 1.0};
  return hyper_m_step(C, phi, q, delta, start, /*grid_seed=*/true, box, nm_max_evals);
}

}  // namespace lebid
