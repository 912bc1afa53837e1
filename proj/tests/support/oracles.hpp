#pragma once

// Independent reference values for the unit and acceptance suites. Nothing
// here calls into the library's numerical paths.

#include <cmath>
#include <functional>

namespace oracle {

/// 1-D soliton of -U'' + U = U^p:
/// U(s) = ((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1) s / 2).
inline double soliton_1d(double p, double s) {
  const double amplitude = std::pow(0.5 * (p + 1.0), 1.0 / (p - 1.0));
  return amplitude * std::pow(1.0 / std::cosh(0.5 * (p - 1.0) * s), 2.0 / (p - 1.0));
}

inline double soliton_1d_derivative(double p, double s) {
  const double x = 0.5 * (p - 1.0) * s;
  return -soliton_1d(p, s) * std::tanh(x);
}

/// Composite Simpson on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return sum * h / 3.0;
}

/// Bisection root of a continuous f with a sign change on [a, b].
inline double bisect(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  double fa = f(a);
  for (int i = 0; i < 300 && b - a > tol; ++i) {
    const double mid = 0.5 * (a + b);
    const double fm = f(mid);
    if ((fm < 0) == (fa < 0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace oracle
