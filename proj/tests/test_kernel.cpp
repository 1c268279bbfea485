#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "lebid/kernel.hpp"
#include "lebid/trunc_gauss.hpp"
#include "support/quadrature.hpp"

using namespace lebid;

namespace {

// Independent spline-kernel oracle: s_q(x, y) = int_0^1 (x-u)_+^{q-1} (y-u)_+^{q-1}
// / ((q-1)!)^2 du, evaluated at x = exp(-beta t), y = exp(-beta tau).
double spline_kernel_oracle(int q, double beta, double t, double tau) {
  const double x = std::exp(-beta * t), y = std::exp(-beta * tau);
  const double m = std::min(x, y);
  if (q == 1) return m;
  if (q == 2) return x * y * m - (x + y) * m * m / 2.0 + m * m * m / 3.0;
  throw std::invalid_argument("oracle only covers q in {1,2}");
}

double quad_O_entry(const KernelSpec& spec, double delta, int i, int j) {
  return lebid::test::integrate2d(
      [&](double xi, double tau) { return eval_kernel(spec, xi, tau); }, delta * (i - 1),
      delta * i, delta * (j - 1), delta * j, 1e-300, /*split_at_x=*/true);
}

}  // namespace

TEST_CASE("gamma_coeff exact values") {
  CHECK(gamma_coeff(1, 0) == 1.0);
  CHECK(gamma_coeff(2, 0) == Catch::Approx(-1.0 / 6.0).epsilon(1e-15));
  CHECK(gamma_coeff(2, 1) == Catch::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(gamma_coeff(2, 2), std::invalid_argument);
  CHECK_THROWS_AS(gamma_coeff(1, -1), std::invalid_argument);
}

TEST_CASE("eval_kernel closed values") {
  CHECK(eval_kernel({1, 1.0}, 0.0, 0.0) == Catch::Approx(1.0));
  CHECK(eval_kernel({1, 2.0}, 1.0, 3.0) == Catch::Approx(std::exp(-6.0)).epsilon(1e-14));
  // q = 2 against the generic spline-integral form
  CHECK(eval_kernel({2, 1.0}, 2.0, 1.0) ==
        Catch::Approx(spline_kernel_oracle(2, 1.0, 2.0, 1.0)).epsilon(1e-13));
}

TEST_CASE("eval_kernel is symmetric and matches the spline oracle") {
  Rng rng(3);
  for (int q : {1, 2}) {
    for (int it = 0; it < 200; ++it) {
      const double beta = 0.2 + 2.5 * rng.uniform();
      const double t = 4.0 * rng.uniform(), tau = 4.0 * rng.uniform();
      const KernelSpec spec{q, beta};
      const double a = eval_kernel(spec, t, tau);
      CHECK(a == eval_kernel(spec, tau, t));
      CHECK(a == Catch::Approx(spline_kernel_oracle(q, beta, t, tau)).margin(1e-14));
    }
  }
}

TEST_CASE("integrated_kernel_matrix analytic corner entry") {
  // int over [0,1]^2 of exp(-max(xi,tau)) = 2 - 4/e
  const Matrix O = integrated_kernel_matrix({1, 1.0}, 1.0, 1);
  CHECK(O(0, 0) == Catch::Approx(2.0 - 4.0 / std::exp(1.0)).epsilon(1e-14));
}

TEST_CASE("integrated_kernel_matrix is symmetric and matches quadrature") {
  for (int q : {1, 2}) {
    const KernelSpec spec{q, q == 1 ? 1.0 : 0.5};
    const double delta = 0.1;
    const Matrix O = integrated_kernel_matrix(spec, delta, 6);
    CHECK((O - O.transpose()).norm() == 0.0);
    for (int i = 1; i <= 6; ++i) {
      for (int j = i; j <= 6; ++j) {
        const double ref = quad_O_entry(spec, delta, i, j);
        CHECK(O(i - 1, j - 1) == Catch::Approx(ref).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("kernel_cell_integral matches 1D quadrature across branch splits") {
  Rng rng(17);
  for (int q : {1, 2}) {
    for (int it = 0; it < 40; ++it) {
      const KernelSpec spec{q, 0.3 + 2.0 * rng.uniform()};
      const double delta = 0.2 + rng.uniform();
      const int m = 1 + static_cast<int>(3.0 * rng.uniform());
      const double t = 4.0 * delta * rng.uniform();
      const double ref = lebid::test::integrate(
          [&](double tau) { return eval_kernel(spec, t, tau); }, delta * (m - 1), delta * m);
      CHECK(kernel_cell_integral(spec, t, m, delta) ==
            Catch::Approx(ref).margin(1e-12).epsilon(1e-10));
    }
  }
}

TEST_CASE("gram_matrix degenerate inputs") {
  const Matrix O = integrated_kernel_matrix({1, 1.0}, 0.5, 4);
  CHECK((gram_matrix({Matrix::Identity(4, 4), O}) - O).norm() == 0.0);
  CHECK(gram_matrix({Matrix::Zero(4, 4), O}).norm() == 0.0);
}

TEST_CASE("gram_matrix equals the double-convolution definition for ZOH input") {
  // K_ij = int int u(i d - xi) u(j d - tau) k(xi,tau), u piecewise constant
  const KernelSpec spec{1, 1.0};
  const double delta = 0.5;
  const int n = 5;
  Rng rng(29);
  std::vector<double> u(static_cast<std::size_t>(n));
  for (auto& v : u) v = rng.normal();
  auto u_of = [&](double t) {
    if (t < 0.0) return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(t / delta + 1e-12));
    return (k < u.size()) ? u[k] : 0.0;
  };
  const Matrix K = gram_matrix({input_toeplitz(u, n), integrated_kernel_matrix(spec, delta, n)});
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      // split the Eq-domain at the input discontinuities so each quadrature
      // patch is smooth; u is exactly constant on every patch
      double ref = 0.0;
      for (int k = 0; k < i; ++k) {
        for (int l = 0; l < j; ++l) {
          ref += u_of((k + 0.5) * delta) * u_of((l + 0.5) * delta) *
                 lebid::test::integrate2d(
                     [&](double xi, double tau) { return eval_kernel(spec, xi, tau); },
                     delta * (i - k - 1), delta * (i - k), delta * (j - l - 1),
                     delta * (j - l), 1e-300, true);
        }
      }
      CHECK(K(i - 1, j - 1) == Catch::Approx(ref).margin(1e-10).epsilon(1e-7));
    }
  }
}

TEST_CASE("gram_matrix is numerically PSD") {
  Rng rng(31);
  std::vector<double> u(12);
  for (auto& v : u) v = rng.normal();
  const Matrix K =
      gram_matrix({input_toeplitz(u, 12), integrated_kernel_matrix({2, 0.8}, 0.3, 12)});
  const Eigen::SelfAdjointEigenSolver<Matrix> es(K);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * K.trace() / 12.0);
}

TEST_CASE("input_toeplitz layout") {
  const std::vector<double> u{1.0, 2.0, 3.0};
  const Matrix phi = input_toeplitz(u, 3);
  CHECK(phi(0, 0) == 1.0);
  CHECK(phi(2, 0) == 3.0);
  CHECK(phi(2, 2) == 1.0);
  CHECK(phi(0, 1) == 0.0);
  CHECK_THROWS_AS(input_toeplitz(std::vector<double>{1.0}, 3), std::invalid_argument);
}

TEST_CASE("laplace_kernel_entry matches the numerical Laplace transform") {
  for (int q : {1, 2}) {
    const KernelSpec spec{q, 0.7};
    const double delta = 0.5;
    const int l = 2;
    auto integrated = [&](double t) { return kernel_cell_integral(spec, t, l, delta); };
    for (Complex s : {Complex{1.0, 0.0}, Complex{0.8, 1.3}}) {
      const Complex ref = lebid::test::laplace(integrated, s, 40.0 / spec.beta);
      const Complex val = laplace_kernel_entry(spec, delta, l, s);
      CHECK(std::abs(val - ref) / std::abs(ref) < 1e-6);
    }
  }
}

TEST_CASE("laplace_kernel_entry limits and pole guard") {
  const KernelSpec spec{1, 1.0};

  SECTION("decays for large real s") {
    double prev = std::abs(laplace_kernel_entry(spec, 1.0, 1, {2.0, 0.0}));
    for (double s : {8.0, 32.0, 128.0}) {
      const double cur = std::abs(laplace_kernel_entry(spec, 1.0, 1, {s, 0.0}));
      CHECK(cur < prev);
      prev = cur;
    }
  }

  SECTION("decays geometrically in the cell index") {
    double prev = std::abs(laplace_kernel_entry(spec, 1.0, 1, {0.5, 0.0}));
    for (int l = 2; l <= 6; ++l) {
      const double cur = std::abs(laplace_kernel_entry(spec, 1.0, l, {0.5, 0.0}));
      CHECK(cur < prev);
      prev = cur;
    }
  }

  SECTION("evaluation at an apparent pole is rejected") {
    CHECK_THROWS_AS(laplace_kernel_entry(spec, 1.0, 1, {0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(laplace_kernel_entry(spec, 1.0, 1, {-1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(laplace_kernel_entry({2, 0.5}, 1.0, 1, {-1.5, 1e-12}),
                    std::invalid_argument);
  }
}

TEST_CASE("laplace_kernel_vector stacks per-cell entries") {
  const KernelSpec spec{1, 1.0};
  const auto v = laplace_kernel_vector(spec, 0.5, 4, {1.0, 0.5});
  REQUIRE(v.size() == 4);
  for (int l = 1; l <= 4; ++l)
    CHECK(v(l - 1) == laplace_kernel_entry(spec, 0.5, l, {1.0, 0.5}));
}
