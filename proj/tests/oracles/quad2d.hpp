#pragma once

// Test-side adaptive quadrature, kept independent of the library's
// Gauss-Legendre machinery on purpose.

#include <cmath>
#include <functional>

namespace quad2d {

namespace detail {

template <typename F>
double simpson(const F& f, double a, double b) {
  return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

template <typename F>
double adapt(const F& f, double a, double b, double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double left = simpson(f, a, m), right = simpson(f, m, b);
  if (depth > 40 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adapt(f, a, m, left, 0.5 * tol, depth + 1) +
         adapt(f, m, b, right, 0.5 * tol, depth + 1);
}

}  // namespace detail

template <typename F>
double adaptive_1d(const F& f, double a, double b, double tol) {
  return detail::adapt(f, a, b, detail::simpson(f, a, b), tol, 0);
}

// integral of f(x, y) over [ax, bx] x [ay, by]
template <typename F>
double integrate(const F& f, double ax, double bx, double ay, double by, double tol) {
  auto outer = [&](double y) {
    return adaptive_1d([&](double x) { return f(x, y); }, ax, bx, tol);
  };
  return adaptive_1d(outer, ay, by, tol);
}

}  // namespace quad2d
