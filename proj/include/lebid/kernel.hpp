// Stable-spline kernel machinery: pointwise evaluation, closed-form cell
// integrals, the integrated kernel matrix O_beta, the input Toeplitz matrix,
// the Gram matrix K = Phi O Phi^T, and the Laplace-domain kernel vector.
//
// The order-q stable spline kernel is
//   k(t,tau) = sum_{r=0}^{q-1} g_{q,r} exp(-mu_r max(t,tau)) exp(-nu_r min(t,tau))
// with mu_r = beta(2q-r-1), nu_r = beta r and g_{q,r} = (-1)^{q+r-1}/(r!(2q-r-1)!).
// All cell integrals below are exact antiderivatives of that sum; exponents
// are kept non-positive throughout so long records cannot overflow.
#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lebid/lti.hpp"

namespace lebid {

/// Stable-spline kernel of order q with decay rate beta.
struct KernelSpec {
  int q = 1;
  double beta = 1.0;
};

/// Spline coefficient g_{q,r} = (-1)^{q+r-1} / (r! (2q-r-1)!).
inline double gamma_coeff(int q, int r) {
  if (q < 1) throw std::invalid_argument("gamma_coeff: order must be >= 1");
  if (r < 0 || r > q - 1) throw std::invalid_argument("gamma_coeff: index out of range");
  double fact_r = 1.0, fact_s = 1.0;
  for (int k = 2; k <= r; ++k) fact_r *= k;
  for (int k = 2; k <= 2 * q - r - 1; ++k) fact_s *= k;
  const double sign = ((q + r - 1) % 2 == 0) ? 1.0 : -1.0;
  return sign / (fact_r * fact_s);
}

inline void validate(const KernelSpec& spec) {
  if (spec.q < 1) throw std::invalid_argument("KernelSpec: order must be >= 1");
  if (!(spec.beta > 0.0)) throw std::invalid_argument("KernelSpec: beta must be positive");
}

/// k(t, tau); symmetric in its arguments.
inline double eval_kernel(const KernelSpec& spec, double t, double tau) {
  validate(spec);
  const double hi = std::max(t, tau), lo = std::min(t, tau);
  double acc = 0.0;
  for (int r = 0; r < spec.q; ++r) {
    const double mu = spec.beta * (2 * spec.q - r - 1);
    const double nu = spec.beta * r;
    acc += gamma_coeff(spec.q, r) * std::exp(-mu * hi - nu * lo);
  }
  return acc;
}

namespace detail {

// integral over cell m (tau in [delta(m-1), delta m]) of exp(-lam tau), lam >= 0
inline double cell_exp_integral(double lam, int m, double delta) {
  if (lam == 0.0) return delta;
  return std::exp(-lam * delta * (m - 1)) * (-std::expm1(-lam * delta)) / lam;
}

// integral over cell m of (tau - delta(m-1)) exp(-mu tau), mu > 0
inline double cell_ramp_integral(double mu, int m, double delta) {
  const double x = mu * delta;
  double core;  // (1 - e^{-x}(1+x)) / mu^2
  if (x < 1e-4) {
    core = delta * delta * (0.5 - x / 3.0 + x * x / 8.0);
  } else {
    core = (1.0 - std::exp(-x) * (1.0 + x)) / (mu * mu);
  }
  return std::exp(-mu * delta * (m - 1)) * core;
}

// complex variant of cell_exp_integral; Re(c) may be any sign but callers
// keep Re(c) >= 0 so the exponentials decay
inline Complex cell_exp_integral(Complex c, int m, double delta) {
  if (std::abs(c) * delta < 1e-8) {
    const Complex x = c * delta;
    return std::exp(-c * delta * static_cast<double>(m - 1)) * delta *
           (1.0 - x / 2.0 + x * x / 6.0);
  }
  return (std::exp(-c * delta * static_cast<double>(m - 1)) -
          std::exp(-c * delta * static_cast<double>(m))) / c;
}

}  // namespace detail

/// Integral of k(t, .) over cell m: int_{delta(m-1)}^{delta m} k(t,tau) dtau.
/// These are the building blocks of both O_beta and the time-domain
/// impulse-response evaluation.
inline double kernel_cell_integral(const KernelSpec& spec, double t, int m, double delta) {
  validate(spec);
  if (m < 1 || !(delta > 0.0)) throw std::invalid_argument("kernel_cell_integral: bad cell");
  const double a = delta * (m - 1), b = delta * m;
  double acc = 0.0;
  for (int r = 0; r < spec.q; ++r) {
    const double g = gamma_coeff(spec.q, r);
    const double mu = spec.beta * (2 * spec.q - r - 1);
    const double nu = spec.beta * r;
    if (t >= b) {
      // whole cell below t: max = t
      acc += g * std::exp(-mu * t) * detail::cell_exp_integral(nu, m, delta);
    } else if (t <= a) {
      // whole cell above t: max = tau
      acc += g * std::exp(-nu * t) * detail::cell_exp_integral(mu, m, delta);
    } else {
      // split at tau = t
      double below;  // int_a^t exp(-nu tau) dtau
      if (nu == 0.0) {
        below = t - a;
      } else {
        below = std::exp(-nu * a) * (-std::expm1(-nu * (t - a))) / nu;
      }
      const double above = std::exp(-mu * t) * (-std::expm1(-mu * (b - t))) / mu;
      acc += g * (std::exp(-mu * t) * below + std::exp(-nu * t) * above);
    }
  }
  return acc;
}

/// O_beta: n x n matrix of double cell integrals of the kernel,
/// O_ij = int_{cell i} int_{cell j} k(xi, tau) dtau dxi, in closed form.
inline Matrix integrated_kernel_matrix(const KernelSpec& spec, double delta, int n) {
  validate(spec);
  if (n < 1) throw std::invalid_argument("integrated_kernel_matrix: n must be >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("integrated_kernel_matrix: delta must be positive");
  Matrix O = Matrix::Zero(n, n);
  std::vector<double> cmu(static_cast<std::size_t>(n)), cnu(static_cast<std::size_t>(n));
  for (int r = 0; r < spec.q; ++r) {
    const double g = gamma_coeff(spec.q, r);
    const double mu = spec.beta * (2 * spec.q - r - 1);
    const double nu = spec.beta * r;
    for (int m = 1; m <= n; ++m) {
      cmu[static_cast<std::size_t>(m - 1)] = detail::cell_exp_integral(mu, m, delta);
      cnu[static_cast<std::size_t>(m - 1)] = detail::cell_exp_integral(nu, m, delta);
    }
    for (int i = 1; i <= n; ++i) {
      // diagonal: twice the lower triangle of the square cell
      double diag;
      if (r == 0) {
        diag = 2.0 * detail::cell_ramp_integral(mu, i, delta);
      } else {
        diag = 2.0 *
               (std::exp(-nu * delta * (i - 1)) * cmu[static_cast<std::size_t>(i - 1)] -
                detail::cell_exp_integral(mu + nu, i, delta)) / nu;
      }
      O(i - 1, i - 1) += g * diag;
      for (int j = 1; j < i; ++j) {
        const double v = g * cmu[static_cast<std::size_t>(i - 1)] * cnu[static_cast<std::size_t>(j - 1)];
        O(i - 1, j - 1) += v;
        O(j - 1, i - 1) += v;
      }
    }
  }
  return O;
}

/// Lower-triangular Toeplitz matrix of input samples, first column
/// u(0), u(delta), ..., u((n-1) delta).
inline Matrix input_toeplitz(std::span<const double> u, int n) {
  if (static_cast<int>(u.size()) < n)
    throw std::invalid_argument("input_toeplitz: need at least n input samples");
  Matrix phi = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) phi(i, j) = u[static_cast<std::size_t>(i - j)];
  return phi;
}

/// Input matrix plus integrated kernel matrix; K factors through these.
struct GramFactors {
  Matrix phi;
  Matrix O;
};

/// Gram matrix K = Phi O Phi^T (symmetrized against round-off).
inline Matrix gram_matrix(const GramFactors& f) {
  if (f.phi.rows() != f.O.rows() || f.O.rows() != f.O.cols() || f.phi.rows() != f.phi.cols())
    throw std::invalid_argument("gram_matrix: dimension mismatch");
  Matrix K = f.phi * f.O * f.phi.transpose();
  K = 0.5 * (K + K.transpose()).eval();
  return K;
}

/// Laplace transform of the integrated kernel for cell l:
///   K_l(s) = int_0^inf ( int_{cell l} k(t,tau) dtau ) e^{-st} dt.
/// Closed form; s must stay away from the apparent poles s = -k beta,
/// k = 0..2q-1 (the guard below rejects a relative neighborhood).
inline Complex laplace_kernel_entry(const KernelSpec& spec, double delta, int l, Complex s) {
  validate(spec);
  if (l < 1 || !(delta > 0.0)) throw std::invalid_argument("laplace_kernel_entry: bad cell");
  const double guard = 1e-8 * std::max(1.0, spec.beta);
  for (int k = 0; k <= 2 * spec.q - 1; ++k) {
    if (std::abs(s + static_cast<double>(k) * spec.beta) < guard)
      throw std::invalid_argument("laplace_kernel_entry: s too close to pole at -" +
                                  std::to_string(k) + "*beta");
  }
  Complex acc = 0.0;
  for (int r = 0; r < spec.q; ++r) {
    const double mu = spec.beta * (2 * spec.q - r - 1);
    acc += gamma_coeff(spec.q, r) * detail::cell_exp_integral(mu, l, delta) /
           (s + spec.beta * static_cast<double>(r));
  }
  const double mu0 = spec.beta * (2 * spec.q - 1);
  Complex poles = 1.0;
  for (int k = 0; k <= 2 * spec.q - 1; ++k) poles *= s + static_cast<double>(k) * spec.beta;
  const double sign = (spec.q % 2 == 0) ? 1.0 : -1.0;
  acc += sign * std::pow(spec.beta, 2 * spec.q - 1) *
         detail::cell_exp_integral(s + mu0, l, delta) / poles;
  return acc;
}

/// Vector [K_1(s), ..., K_n(s)].
inline Eigen::VectorXcd laplace_kernel_vector(const KernelSpec& spec, double delta, int n,
                                              Complex s) {
  Eigen::VectorXcd v(n);
  for (int l = 1; l <= n; ++l) v(l - 1) = laplace_kernel_entry(spec, delta, l, s);
  return v;
}

}  // namespace lebid
