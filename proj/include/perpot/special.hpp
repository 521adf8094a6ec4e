// Copyright 2026 The perpot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <vector>

#include "perpot/types.hpp"

namespace perpot::special {

inline constexpr double euler_gamma = 0.57721566490153286061;

/// Exponential integral E1(x), x > 0.
inline double expint_e1(double x) { return -std::expint(-x); }

/// (4 pi)^{-n/2}
inline double heat_norm(int n) { return n == 2 ? 1.0 / (4.0 * pi) : std::pow(4.0 * pi, -1.5); }

/// Time moments of the free heat kernel,
///   I_m(r, tau) = int_0^tau t^m (4 pi t)^{-n/2} exp(-r^2/(4t)) dt,
/// for m = lo..hi (lo <= 0 <= hi), written to out[m - lo]. Requires r > 0.
inline void heat_moments(int n, double r2, double tau, int lo, int hi, double* out) {
  const double x = r2 / (4.0 * tau);
  const double c = heat_norm(n);
  const double h = 0.5 * n;
  double i0;
  if (n == 3) {
    const double r = std::sqrt(r2);
    i0 = std::erfc(0.5 * r / std::sqrt(tau)) / (4.0 * pi * r);
  } else {
    i0 = expint_e1(x) / (4.0 * pi);
  }
  out[-lo] = i0;
  if (x > 700.0) {
    for (int m = lo; m <= hi; ++m) out[m - lo] = 0.0;
    return;
  }
  const double ex = std::exp(-x);
  // t^m integration by parts: (m + 2 - n/2) I_{m+1} = c tau^{m+2-n/2} e^{-x} - (r^2/4) I_m
  double tp = std::pow(tau, 2.0 - h);  // tau^{m+2-n/2} at m = 0
  for (int m = 0; m < hi; ++m) {
    out[m + 1 - lo] = (c * tp * ex - 0.25 * r2 * out[m - lo]) / (m + 2.0 - h);
    tp *= tau;
  }
  tp = std::pow(tau, 1.0 - h);  // at m = -1
  for (int m = -1; m >= lo; --m) {
    out[m - lo] = 4.0 / r2 * (c * tp * ex - (m + 2.0 - h) * out[m + 1 - lo]);
    tp /= tau;
  }
}

/// I_m(0, tau), finite for m > n/2 - 1.
inline double heat_moment_origin(int n, double tau, int m) {
  const double e = m + 1.0 - 0.5 * n;
  return heat_norm(n) * std::pow(tau, e) / e;
}

/// Bessel J0 and J1 for complex argument (power series; moderate |z|).
inline cplx bessel_j0(cplx z) {
  const cplx q = -0.25 * z * z;
  cplx term = 1.0, sum = 1.0;
  for (int m = 1; m < 200; ++m) {
    term *= q / (double(m) * m);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum) && m > std::abs(z)) break;
  }
  return sum;
}

inline cplx bessel_j1(cplx z) {
  const cplx q = -0.25 * z * z;
  cplx term = 1.0, sum = 1.0;
  for (int m = 1; m < 200; ++m) {
    term *= q / (double(m) * (m + 1));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum) && m > std::abs(z)) break;
  }
  return 0.5 * z * sum;
}

/// P_0(x) .. P_lmax(x).
inline std::vector<double> legendre(int lmax, double x) {
  std::vector<double> p(lmax + 1);
  p[0] = 1.0;
  if (lmax >= 1) p[1] = x;
  for (int l = 1; l < lmax; ++l) p[l + 1] = ((2.0 * l + 1.0) * x * p[l] - l * p[l - 1]) / (l + 1.0);
  return p;
}

struct GaussRule {
  std::vector<double> x, w;
};

/// Gauss-Legendre rule on [-1, 1].
inline GaussRule gauss_legendre(int n) {
  GaussRule g;
  g.x.resize(n);
  g.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    g.x[i] = -z;
    g.x[n - 1 - i] = z;
    g.w[i] = g.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return g;
}

/// Gauss-Legendre rule mapped to [a, b].
inline GaussRule gauss_legendre(int n, double a, double b) {
  GaussRule g = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    g.x[i] = 0.5 * (a + b) + 0.5 * (b - a) * g.x[i];
    g.w[i] *= 0.5 * (b - a);
  }
  return g;
}

}  // namespace perpot::special
