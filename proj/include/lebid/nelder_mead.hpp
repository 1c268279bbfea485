// Minimal 2D Nelder-Mead simplex with box clamping, used for the inner
// hyperparameter search in log coordinates.
#pragma once

#include <algorithm>
#include <array>
#include <functional>

#include <Eigen/Dense>

namespace lebid {

struct NelderMeadOptions {
  int max_evals = 80;
  double x_tol = 1e-3;    // simplex diameter
  double f_tol = 1e-10;   // absolute spread of simplex values
  double initial_step = 0.4;
  Eigen::Vector2d lower{-1e30, -1e30};
  Eigen::Vector2d upper{1e30, 1e30};
};

struct NelderMeadResult {
  Eigen::Vector2d x;
  double f = 0.0;
  int evals = 0;
};

inline NelderMeadResult nelder_mead_2d(const std::function<double(const Eigen::Vector2d&)>& fn,
                                       const Eigen::Vector2d& x0, const NelderMeadOptions& opt = {}) {
  auto clamp = [&](Eigen::Vector2d v) {
    v = v.cwiseMax(opt.lower).cwiseMin(opt.upper);
    return v;
  };
  int evals = 0;
  auto eval = [&](const Eigen::Vector2d& v) {
    ++evals;
    return fn(v);
  };

  std::array<Eigen::Vector2d, 3> xs;
  std::array<double, 3> fs;
  xs[0] = clamp(x0);
  xs[1] = clamp(x0 + Eigen::Vector2d(opt.initial_step, 0.0));
  xs[2] = clamp(x0 + Eigen::Vector2d(0.0, opt.initial_step));
  for (int i = 0; i < 3; ++i) fs[i] = eval(xs[i]);

  auto order = [&] {
    for (int i = 0; i < 2; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (fs[j] < fs[i]) {
          std::swap(fs[i], fs[j]);
          std::swap(xs[i], xs[j]);
        }
  };
  order();

  while (evals < opt.max_evals) {
    const double diam = std::max((xs[1] - xs[0]).norm(), (xs[2] - xs[0]).norm());
    if (diam < opt.x_tol && fs[2] - fs[0] < opt.f_tol) break;

    const Eigen::Vector2d centroid = 0.5 * (xs[0] + xs[1]);
    const Eigen::Vector2d xr = clamp(centroid + (centroid - xs[2]));
    const double fr = eval(xr);
    if (fr < fs[0]) {
      const Eigen::Vector2d xe = clamp(centroid + 2.0 * (centroid - xs[2]));
      const double fe = eval(xe);
      if (fe < fr) {
        xs[2] = xe; fs[2] = fe;
      } else {
        xs[2] = xr; fs[2] = fr;
      }
    } else if (fr < fs[1]) {
      xs[2] = xr; fs[2] = fr;
    } else {
      const bool outside = fr < fs[2];
      const Eigen::Vector2d base = outside ? xr : xs[2];
      const Eigen::Vector2d xc = clamp(centroid + 0.5 * (base - centroid));
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[2])) {
        xs[2] = xc; fs[2] = fc;
      } else {
        // shrink toward best vertex
        for (int i = 1; i < 3; ++i) {
          xs[i] = clamp(xs[0] + 0.5 * (xs[i] - xs[0]));
          fs[i] = eval(xs[i]);
        }
      }
    }
    order();
  }
  return {xs[0], fs[0], evals};
}

}  // namespace lebid
