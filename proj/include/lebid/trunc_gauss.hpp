// Box-truncated multivariate Gaussians: univariate truncated-normal moments
// and draws, a coordinate-wise Gibbs sampler, and the Monte Carlo second
// moment used by the hyperparameter EM.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "lebid/lti.hpp"

namespace lebid {

namespace detail {

/// Scaled complementary error function exp(x^2) erfc(x).
inline double erfcx(double x) {
  if (x < 0.0) {
    // reflection; overflows to inf for x << -26, which callers avoid
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x <= 25.0) return std::exp(x * x) * std::erfc(x);
  // asymptotic series, term ratio ~ k/(2x^2)
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 12; ++k) {
    term *= -(2 * k - 1) * inv2x2;
    sum += term;
    if (std::abs(term) < 1e-18) break;
  }
  return sum / (x * std::sqrt(M_PI));
}

/// Inverse standard normal CDF (Wichura's AS241, double precision).
inline double norm_ppf(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("norm_ppf: p must be in (0,1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return (q < 0.0) ? -val : val;
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double norm_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// erf(v) - erf(u) for u < v at full relative precision: split by sign so
/// no saturated value is ever subtracted, and integrate the density directly
/// when the interval is too narrow for the difference to resolve.
inline double erf_diff(double u, double v) {
  const double width = v - u;
  if (width < 1e-5 * (1.0 + std::abs(u) + std::abs(v))) {
    const double m = 0.5 * (u + v);
    return (2.0 / std::sqrt(M_PI)) * (width / 6.0) *
           (std::exp(-u * u) + 4.0 * std::exp(-m * m) + std::exp(-v * v));
  }
  if (u >= 0.0) return std::erfc(u) - std::erfc(v);
  if (v <= 0.0) return std::erfc(-v) - std::erfc(-u);
  return std::erf(v) - std::erf(u);  // straddles zero: both terms add
}

/// sqrt(2/pi) (e^{-u^2} - e^{-v^2}) / (erf(v) - erf(u)) for u < v, computed
/// so that a shared far tail cancels the underflowing scale factor and a
/// narrow interval avoids subtractive cancellation in both numerator and
/// denominator (limit (u+v)/sqrt(2), the band midpoint).
inline double gauss_ratio(double u, double v) {
  if (u >= 6.0) {
    const double d = v * v - u * u;
    const double e = (d > 745.0) ? 0.0 : std::exp(-d);
    return std::sqrt(2.0 / M_PI) * (1.0 - e) / (erfcx(u) - e * erfcx(v));
  }
  if (v <= -6.0) return -gauss_ratio(-v, -u);
  const double den = erf_diff(u, v);
  if (den < 1e-300) return std::numeric_limits<double>::quiet_NaN();
  const double num = -std::exp(-u * u) * std::expm1(u * u - v * v);
  return std::sqrt(2.0 / M_PI) * num / den;
}

}  // namespace detail

/// Deterministic uniform/normal generator; identical streams on every
/// platform for a fixed seed (no library-defined distributions involved).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// uniform draw strictly inside (0, 1)
  double uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return mean + stddev * detail::norm_ppf(uniform());
  }

 private:
  std::mt19937_64 gen_;
};

/// E[Z | a <= Z < b] for Z ~ Normal(mu, sigma^2), clamped strictly inside
/// the band. Bands with essentially no mass fall back to the edge nearest mu.
inline double trunc_normal_mean(double mu, double sigma, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("trunc_normal_mean: requires a < b");
  if (!(sigma > 0.0)) throw std::invalid_argument("trunc_normal_mean: sigma must be positive");
  const double u = (a - mu) / (std::numbers::sqrt2 * sigma);
  const double v = (b - mu) / (std::numbers::sqrt2 * sigma);
  const double ratio = detail::gauss_ratio(u, v);
  double z;
  if (std::isnan(ratio)) {
    z = (mu <= a) ? a : ((mu >= b) ? b : mu);
  } else {
    z = mu + sigma * ratio;
  }
  const double inset = 1e-12 * (b - a);
  return std::min(std::max(z, a + inset), b - inset);
}

/// Axis-aligned truncation box lower[i] <= z_i < upper[i].
struct BoxRegion {
  Vector lower;
  Vector upper;
};

inline void validate(const BoxRegion& box) {
  if (box.lower.size() != box.upper.size())
    throw std::invalid_argument("BoxRegion: dimension mismatch");
  for (Eigen::Index i = 0; i < box.lower.size(); ++i)
    if (!(box.lower(i) < box.upper(i)))
      throw std::invalid_argument("BoxRegion: requires lower < upper elementwise");
}

namespace detail {

/// One draw from Normal(mu, sigma^2) truncated to [a, b]. Inverse-CDF on the
/// band; bands holding less than ~1e-12 probability switch to a truncated
/// exponential proposal anchored at the boundary nearest the mode.
inline double trunc_normal_draw(Rng& rng, double mu, double sigma, double a, double b) {
  double alpha = (a - mu) / sigma;
  double beta = (b - mu) / sigma;
  bool flipped = false;
  if (beta <= 0.0) {  // mirror a left-tail band into the right tail
    std::swap(alpha, beta);
    alpha = -alpha;
    beta = -beta;
    flipped = true;
  }
  double x;
  if (alpha >= 0.0) {
    // complementary-CDF coordinates stay accurate deep into the tail
    const double p_hi = norm_sf(alpha);
    const double p_lo = norm_sf(beta);
    const double mass = p_hi - p_lo;
    if (mass > 1e-12) {
      const double p = p_lo + rng.uniform() * mass;
      x = -norm_ppf(p);
    } else {
      const double lam = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
      const double span = beta - alpha;
      const double peak = std::min(std::max(lam, alpha), beta);
      x = alpha;
      for (int it = 0; it < 1000; ++it) {
        const double t = -std::log1p(rng.uniform() * std::expm1(-lam * span)) / lam;
        const double cand = alpha + t;
        const double logacc = -0.5 * (cand - lam) * (cand - lam) + 0.5 * (peak - lam) * (peak - lam);
        if (std::log(rng.uniform()) <= logacc) {
          x = cand;
          break;
        }
      }
    }
  } else {
    const double p_lo = norm_cdf(alpha);
    const double p_hi = norm_cdf(beta);
    x = norm_ppf(p_lo + rng.uniform() * (p_hi - p_lo));
  }
  if (flipped) x = -x;
  double z = mu + sigma * x;
  const double inset = 1e-12 * (b - a);
  return std::min(std::max(z, a + inset), b - inset);
}

}  // namespace detail

/// Gibbs sweep sampler for Normal(0, cov) truncated to the box. Returns one
/// row per retained sweep (n_samples x N); every entry respects its box.
inline Matrix gibbs_sample_box(const Matrix& cov, const BoxRegion& box, int n_samples,
                               int burn_in, std::uint64_t seed) {
  validate(box);
  const Eigen::Index N = cov.rows();
  if (cov.cols() != N || box.lower.size() != N)
    throw std::invalid_argument("gibbs_sample_box: dimension mismatch");
  if (n_samples < 1) throw std::invalid_argument("gibbs_sample_box: n_samples must be >= 1");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gibbs_sample_box: covariance is not positive definite");
  const Matrix P = llt.solve(Matrix::Identity(N, N));  // precision matrix

  Rng rng(seed);
  Vector z = 0.5 * (box.lower + box.upper);
  Vector w = P * z;
  Vector cond_sigma(N);
  for (Eigen::Index i = 0; i < N; ++i) cond_sigma(i) = 1.0 / std::sqrt(P(i, i));

  Matrix samples(n_samples, N);
  int kept = 0;
  for (int sweep = 0; sweep < burn_in + n_samples; ++sweep) {
    for (Eigen::Index i = 0; i < N; ++i) {
      const double mu_i = z(i) - w(i) / P(i, i);
      const double zi = detail::trunc_normal_draw(rng, mu_i, cond_sigma(i),
                                                  box.lower(i), box.upper(i));
      const double dz = zi - z(i);
      if (dz != 0.0) {
        w.noalias() += P.col(i) * dz;
        z(i) = zi;
      }
    }
    if ((sweep & 63) == 63) w.noalias() = P * z;  // shed incremental round-off
    if (sweep >= burn_in) samples.row(kept++) = z.transpose();
  }
  return samples;
}

/// Monte Carlo second moment of the box-truncated Gaussian.
struct SecondMoment {
  Matrix Q;
  int n_samples = 0;
};

inline SecondMoment second_moment(const Matrix& cov, const BoxRegion& box, int n_samples,
                                  std::uint64_t seed) {
  constexpr int kBurnIn = 100;
  const Matrix samples = gibbs_sample_box(cov, box, n_samples, kBurnIn, seed);
  Matrix Q = (samples.transpose() * samples) / static_cast<double>(n_samples);
  Q = 0.5 * (Q + Q.transpose()).eval();
  return {std::move(Q), n_samples};
}

}  // namespace lebid
