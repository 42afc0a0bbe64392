#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>

namespace rankdist {

struct NelderMeadOptions {
  std::size_t max_evaluations = 5000;
  /// Stop when max f - min f over the simplex falls below this.
  double f_tolerance = 1e-12;
  /// ... and the simplex diameter falls below this.
  double x_tolerance = 1e-10;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

template <std::size_t D>
struct NelderMeadResult {
  std::array<double, D> x{};
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimization of f: R^D -> R.
/// The initial simplex is `start` plus one vertex per axis offset by `step`.
template <std::size_t D, class F>
NelderMeadResult<D> nelder_mead(F&& f, const std::array<double, D>& start, const std::array<double, D>& step,
                                const NelderMeadOptions& opt = {}) {
  using Point = std::array<double, D>;
  std::array<Point, D + 1> x;
  std::array<double, D + 1> fx;
  std::size_t evals = 0;
  auto eval = [&](const Point& p) {
    ++evals;
    const double v = f(p);
    return std::isnan(v) ? HUGE_VAL : v;
  };

  x[0] = start;
  for (std::size_t i = 0; i < D; ++i) {
    x[i + 1] = start;
    x[i + 1][i] += step[i];
  }
  for (std::size_t i = 0; i <= D; ++i) fx[i] = eval(x[i]);

  std::array<std::size_t, D + 1> order;
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // ties keep vertex index order so runs are reproducible
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    std::array<Point, D + 1> xs;
    std::array<double, D + 1> fs;
    for (std::size_t i = 0; i <= D; ++i) {
      xs[i] = x[order[i]];
      fs[i] = fx[order[i]];
    }
    x = xs;
    fx = fs;
  };
  auto along = [](const Point& from, const Point& to, double t) {
    Point p;
    for (std::size_t i = 0; i < D; ++i) p[i] = from[i] + t * (to[i] - from[i]);
    return p;
  };

  bool converged = false;
  while (evals < opt.max_evaluations) {
    sort_simplex();
    double diameter = 0.0;
    for (std::size_t v = 1; v <= D; ++v) {
      for (std::size_t i = 0; i < D; ++i) diameter = std::max(diameter, std::fabs(x[v][i] - x[0][i]));
    }
    if (fx[D] - fx[0] <= opt.f_tolerance && diameter <= opt.x_tolerance) {
      converged = true;
      break;
    }

    Point centroid{};
    for (std::size_t v = 0; v < D; ++v) {
      for (std::size_t i = 0; i < D; ++i) centroid[i] += x[v][i] / static_cast<double>(D);
    }

    const Point xr = along(centroid, x[D], -opt.reflection);
    const double fr = eval(xr);
    if (fr < fx[0]) {
      const Point xe = along(centroid, x[D], -opt.reflection * opt.expansion);
      const double fe = eval(xe);
      if (fe < fr) {
        x[D] = xe;
        fx[D] = fe;
      } else {
        x[D] = xr;
        fx[D] = fr;
      }
      continue;
    }
    if (fr < fx[D - 1]) {
      x[D] = xr;
      fx[D] = fr;
      continue;
    }
    const bool outside = fr < fx[D];
    const Point xc = outside ? along(centroid, xr, opt.contraction) : along(centroid, x[D], opt.contraction);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fx[D])) {
      x[D] = xc;
      fx[D] = fc;
      continue;
    }
    for (std::size_t v = 1; v <= D; ++v) {
      x[v] = along(x[0], x[v], opt.shrink);
      fx[v] = eval(x[v]);
    }
  }
  sort_simplex();
  return NelderMeadResult<D>{x[0], fx[0], evals, converged};
}

}  // namespace rankdist
