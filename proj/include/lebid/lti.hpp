// Continuous-time LTI plumbing: rational transfer functions, state-space
// realizations, exact ZOH discretization and simulation, frequency response.
#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace lebid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

/// Rational transfer function G(s) = num(s)/den(s), coefficients in
/// descending powers of s. Must be strictly proper: deg(num) < deg(den).
struct RationalTF {
  std::vector<double> num;
  std::vector<double> den;
};

/// Strictly proper SISO state-space realization (D = 0).
struct StateSpace {
  Matrix A;
  Vector B;
  Eigen::RowVectorXd C;

  int order() const { return static_cast<int>(A.rows()); }
};

/// Piecewise-constant signal: values[k] holds on [k*period, (k+1)*period).
/// Zero before t = 0.
struct ZohSignal {
  std::vector<double> values;
  double period = 1.0;
};

namespace detail {

// Drop leading zero coefficients (exactly zero only).
inline std::vector<double> trim_leading_zeros(const std::vector<double>& p) {
  std::size_t k = 0;
  while (k + 1 < p.size() && p[k] == 0.0) ++k;
  return {p.begin() + static_cast<std::ptrdiff_t>(k), p.end()};
}

inline Complex polyval(const std::vector<double>& coeffs, Complex s) {
  Complex acc = 0.0;
  for (double c : coeffs) acc = acc * s + c;
  return acc;
}

}  // namespace detail

/// Controllable canonical realization of a strictly proper transfer function.
inline StateSpace tf_to_ss(const RationalTF& tf) {
  const std::vector<double>& den = tf.den;
  if (den.empty() || den[0] == 0.0)
    throw std::invalid_argument("tf_to_ss: denominator has zero leading coefficient");
  std::vector<double> num = detail::trim_leading_zeros(tf.num);
  if (num.size() == 1 && num[0] == 0.0) num.clear();
  if (num.size() >= den.size())
    throw std::invalid_argument("tf_to_ss: transfer function must be strictly proper");

  const int n = static_cast<int>(den.size()) - 1;
  if (n == 0) throw std::invalid_argument("tf_to_ss: constant denominator");

  StateSpace ss;
  ss.A = Matrix::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) ss.A(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) ss.A(n - 1, j) = -den[static_cast<std::size_t>(n - j)] / den[0];
  ss.B = Vector::Zero(n);
  ss.B(n - 1) = 1.0;
  ss.C = Eigen::RowVectorXd::Zero(n);
  // num padded to length n, ascending powers along the state vector
  for (std::size_t k = 0; k < num.size(); ++k) {
    const std::size_t pow = num.size() - 1 - k;  // power of s for num[k]
    ss.C(static_cast<int>(pow)) = num[k] / den[0];
  }
  return ss;
}

/// Exact ZOH discretization: Ad = exp(A dt), Bd = int_0^dt exp(A tau) dtau B,
/// both from one augmented matrix exponential.
inline std::pair<Matrix, Vector> zoh_discretize(const StateSpace& ss, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("zoh_discretize: dt must be positive");
  const int n = ss.order();
  Matrix M = Matrix::Zero(n + 1, n + 1);
  M.topLeftCorner(n, n) = ss.A * dt;
  M.topRightCorner(n, 1) = ss.B * dt;
  const Matrix E = M.exp();
  return {E.topLeftCorner(n, n), E.topRightCorner(n, 1)};
}

/// Noiseless output x(i*dt), i = 1..n_steps, from zero initial state.
/// dt must divide u.period by an integer ratio (the fine simulation grid).
inline std::vector<double> simulate_zoh(const StateSpace& ss, const ZohSignal& u,
                                        double dt, int n_steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_zoh: dt must be positive");
  const double ratio_f = u.period / dt;
  const long ratio = std::lround(ratio_f);
  if (ratio < 1 || std::abs(ratio_f - static_cast<double>(ratio)) > 1e-9 * ratio_f)
    throw std::invalid_argument("simulate_zoh: u.period must be an integer multiple of dt");
  if (n_steps < 0) throw std::invalid_argument("simulate_zoh: negative n_steps");
  if (n_steps > 0 &&
      static_cast<std::size_t>((n_steps - 1) / ratio) >= u.values.size())
    throw std::invalid_argument("simulate_zoh: input signal too short for requested horizon");

  auto [Ad, Bd] = zoh_discretize(ss, dt);
  Vector x = Vector::Zero(ss.order());
  std::vector<double> out(static_cast<std::size_t>(n_steps));
  for (int i = 0; i < n_steps; ++i) {
    const double uk = u.values[static_cast<std::size_t>(i / ratio)];
    x = Ad * x + Bd * uk;
    out[static_cast<std::size_t>(i)] = ss.C * x;
  }
  return out;
}

/// G(i*omega) for each requested frequency.
inline std::vector<Complex> freq_response(const RationalTF& tf, std::span<const double> omegas) {
  std::vector<Complex> out;
  out.reserve(omegas.size());
  for (double w : omegas) {
    const Complex s(0.0, w);
    out.push_back(detail::polyval(tf.num, s) / detail::polyval(tf.den, s));
  }
  return out;
}

}  // namespace lebid
