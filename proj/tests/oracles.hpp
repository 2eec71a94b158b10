#pragma once
// Reference computations written independently of the library code paths they check.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

using M = std::array<double, 4>;  // a11 a12 a21 a22

inline M mul(const M& x, const M& y) {
  M r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0;
      for (int k = 0; k < 2; ++k) s += x[2 * i + k] * y[2 * k + j];
      r[2 * i + j] = s;
    }
  return r;
}

inline M A(double t) { return {std::exp(t / 2), 0, 0, std::exp(-t / 2)}; }
inline M B(double t) { return {1, t, 0, 1}; }
inline M C(double t) { return {1, 0, t, 1}; }

inline double max_diff(const M& x, const M& y) {
  double m = 0;
  for (int i = 0; i < 4; ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

/// d_H(i, G i) from the upper half-plane formula cosh d = 1 + |z - w|^2 / (2 Im z Im w).
inline double hyperbolic_displacement(const M& g) {
  const std::complex<double> i(0, 1);
  const std::complex<double> z = (g[0] * i + g[1]) / (g[2] * i + g[3]);
  const double c = 1 + std::norm(z - i) / (2 * z.imag());
  return std::acosh(std::max(1.0, c));
}

/// exp of a 2x2 matrix by scaling and squaring of the Taylor series.
inline M expm(const M& x) {
  double n = 0;
  for (double v : x) n = std::max(n, std::abs(v));
  int sq = 0;
  while (n > 0.5) n /= 2, ++sq;
  const double s = std::ldexp(1.0, -sq);
  const M y{x[0] * s, x[1] * s, x[2] * s, x[3] * s};
  M term{1, 0, 0, 1}, sum{1, 0, 0, 1};
  for (int k = 1; k < 30; ++k) {
    term = mul(term, y);
    for (double& v : term) v /= k;
    for (int i = 0; i < 4; ++i) sum[i] += term[i];
  }
  for (int k = 0; k < sq; ++k) sum = mul(sum, sum);
  return sum;
}

/// Bolza group constants in closed form.
inline double bolza_min_trace() { return 2 + 2 * std::sqrt(2.0); }
inline double bolza_translation_length() { return 2 * std::acosh(1 + std::sqrt(2.0)); }
inline double bolza_sigma0() { return bolza_translation_length() / std::sqrt(2.0); }

/// Simpson's rule on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4 : 2) * f(a + k * h);
  return s * h / 3;
}

}  // namespace oracle
