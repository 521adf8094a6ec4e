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

// Independent reference values for the tests. Nothing here calls the
// library's lattice sums.

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <type_traits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;
using V3 = Eigen::Vector3d;
constexpr double pi = 3.14159265358979323846;

/// Brute-force image sum of the periodic heat kernel.
inline double heat_images(const std::vector<double>& diag, double t, const V3& x) {
  const int n = static_cast<int>(diag.size());
  const double reach = std::sqrt(4.0 * t * 45.0);
  int R[3] = {0, 0, 0};
  for (int a = 0; a < n; ++a) R[a] = static_cast<int>(std::ceil(reach / diag[a])) + 1;
  double s = 0.0;
  for (int i = -R[0]; i <= R[0]; ++i)
    for (int j = -R[1]; j <= R[1]; ++j)
      for (int l = -R[2]; l <= R[2]; ++l) {
        V3 d = x;
        d[0] -= i * diag[0];
        if (n > 1) d[1] -= j * diag[1];
        if (n > 2) d[2] -= l * diag[2];
        s += std::exp(-d.squaredNorm() / (4.0 * t));
      }
  return s / std::pow(4.0 * pi * t, 0.5 * n);
}

/// Green's function of Delta + k^2 (Laplace when k2 = 0, with the mean
/// removed), normalised so that applying the operator gives minus the
/// lattice of Dirac masses. Written as the time integral of the heat
/// kernel, split at tau: the short-time image integrals are done by
/// adaptive Gauss-Kronrod, the long-time part in Fourier space.
inline cplx helmholtz_heat_integral(const std::vector<double>& diag, double k2, const V3& eta, const V3& x,
                                    double tau = -1.0) {
  const int n = static_cast<int>(diag.size());
  double vol = 1.0;
  for (double d : diag) vol *= d;
  if (tau <= 0.0) tau = 0.05 * std::pow(vol, 2.0 / n);
  using boost::math::quadrature::gauss_kronrod;
  cplx s = 0.0;
  const double reach = std::sqrt(4.0 * tau * (44.0 + k2 * tau));
  int R[3] = {0, 0, 0};
  for (int a = 0; a < n; ++a) R[a] = static_cast<int>(std::ceil(reach / diag[a])) + 1;
  for (int i = -R[0]; i <= R[0]; ++i)
    for (int j = -R[1]; j <= R[1]; ++j)
      for (int l = -R[2]; l <= R[2]; ++l) {
        V3 p = V3::Zero();
        p[0] = i * diag[0];
        if (n > 1) p[1] = j * diag[1];
        if (n > 2) p[2] = l * diag[2];
        const double r2 = (x - p).squaredNorm();
        if (r2 > reach * reach * 1.2) continue;
        auto f = [&](double t) {
          if (t <= 0.0) return 0.0;
          return std::exp(k2 * t - r2 / (4.0 * t)) / std::pow(4.0 * pi * t, 0.5 * n);
        };
        const double v = gauss_kronrod<double, 61>::integrate(f, 0.0, tau, 8, 1e-14);
        s += std::polar(v, eta.dot(p));
      }
  if (k2 == 0.0) s -= tau / vol;
  const double kmax = std::sqrt(46.0 / tau + std::max(k2, 0.0));
  int Z[3] = {0, 0, 0};
  for (int a = 0; a < n; ++a) Z[a] = static_cast<int>(std::ceil(kmax * diag[a] / (2.0 * pi))) + 1;
  for (int i = -Z[0]; i <= Z[0]; ++i)
    for (int j = -Z[1]; j <= Z[1]; ++j)
      for (int l = -Z[2]; l <= Z[2]; ++l) {
        V3 xi = eta;
        xi[0] += 2.0 * pi * i / diag[0];
        if (n > 1) xi[1] += 2.0 * pi * j / diag[1];
        if (n > 2) xi[2] += 2.0 * pi * l / diag[2];
        for (int a = n; a < 3; ++a) xi[a] = 0.0;
        const double lam = xi.squaredNorm() - k2;
        if (k2 == 0.0 && i == 0 && j == 0 && l == 0 && eta.squaredNorm() == 0.0) continue;
        s += std::polar(std::exp(-lam * tau) / lam / vol, xi.dot(x));
      }
  return s;
}

/// Area enclosed by a star-shaped curve r(theta), by adaptive quadrature.
inline double polar_area(const std::function<double(double)>& r) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate([&](double th) { return 0.5 * r(th) * r(th); }, 0.0, 2.0 * pi, 8,
                                              1e-15);
}

/// Fourth-order central differences of f along e.
template <class F>
auto d1(const F& f, const V3& x, const V3& e, double h) {
  using R = std::decay_t<decltype(f(x))>;
  const R num = f(x - 2 * h * e) - 8.0 * f(x - h * e) + 8.0 * f(x + h * e) - f(x + 2 * h * e);
  return R(num / (12.0 * h));
}

template <class F>
auto d2(const F& f, const V3& x, const V3& e, double h) {
  using R = std::decay_t<decltype(f(x))>;
  const R num = -f(x - 2 * h * e) + 16.0 * f(x - h * e) - 30.0 * f(x) + 16.0 * f(x + h * e) - f(x + 2 * h * e);
  return R(num / (12.0 * h * h));
}

template <class F>
auto laplacian(const F& f, const V3& x, int n, double h) {
  std::decay_t<decltype(f(x))> acc = d2(f, x, V3::Unit(0), h);
  for (int a = 1; a < n; ++a) acc += d2(f, x, V3::Unit(a), h);
  return acc;
}

}  // namespace oracle
