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

#include "perpot/error.hpp"
#include "perpot/greens.hpp"
#include "perpot/special.hpp"
#include "perpot/types.hpp"

namespace perpot {

/// Kernel values are small blocks: 1x1 for scalar families, n x n for Lame.
using Block = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using BVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, 3, 1>;

/// single: G(x - y); dlayer: kernel of D (carries the leading minus);
/// adjoint: kernel of K*, i.e. normal derivative (traction for Lame) of the
/// single layer at x in the direction nx.
enum class LayerKind { single, dlayer, adjoint };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::single: return "single";
    case LayerKind::dlayer: return "double";
    case LayerKind::adjoint: return "adjoint";
  }
  return "?";
}

namespace detail {

inline Block scalar_block(cplx v) {
  Block b(1, 1);
  b(0, 0) = v;
  return b;
}

// D: B_ij = -[T(omega, D Gamma^i) ny]_j with (D Gamma^i)_{jl} = d_l Gamma_ij.
inline Block lame_dl_block(const std::array<Mat, 3>& J, const Vec& ny, double omega, int n) {
  Block B(n, n);
  for (int i = 0; i < n; ++i) {
    Mat A = Mat::Zero();
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) A(j, l) = J[l](i, j);
    const Vec v = traction(omega, A, n) * ny;
    for (int j = 0; j < n; ++j) B(i, j) = -v[j];
  }
  return B;
}

// K*: B_il = [T(omega, D Gamma^l) nx]_i.
inline Block lame_adj_block(const std::array<Mat, 3>& J, const Vec& nx, double omega, int n) {
  Block B(n, n);
  for (int l = 0; l < n; ++l) {
    Mat A = Mat::Zero();
    for (int i = 0; i < n; ++i)
      for (int m = 0; m < n; ++m) A(i, m) = J[m](l, i);
    const Vec v = traction(omega, A, n) * nx;
    for (int i = 0; i < n; ++i) B(i, l) = v[i];
  }
  return B;
}

}  // namespace detail

/// Uniform access to the periodic layer kernels of an elliptic family, their
/// free-space singular parts and the regular limits used on the diagonal.
class LayerKernel {
 public:
  explicit LayerKernel(const KernelFamily& kf) : kf_(&kf), n_(kf.n()) {
    switch (kf.family) {
      case Family::laplace: lap0_ = laplace_regular_at_zero(kf); break;
      case Family::helmholtz:
        if (!kf.resonant.empty())
          throw Error(ErrorCode::resonant, "layer operators refused at a resonant wave number");
        helm0_ = helmholtz_regular_at_zero(kf);
        break;
      case Family::lame: lame0_ = lame_regular_at_zero(kf); break;
      case Family::heat:
        throw Error(ErrorCode::invalid_argument, "heat kernels are handled by the time-block path");
    }
  }

  const KernelFamily& family() const { return *kf_; }
  int components() const { return kf_->family == Family::lame ? n_ : 1; }
  int dim() const { return n_; }

  Block periodic(LayerKind kind, const Vec& d, const Vec& ny, const Vec& nx) const {
    switch (kf_->family) {
      case Family::laplace: {
        const auto e = laplace_green_eval(*kf_, d);
        return scalar(kind, e.value, e.grad.cast<cplx>(), ny, nx);
      }
      case Family::helmholtz: {
        const auto e = helmholtz_green_eval(*kf_, d);
        return scalar(kind, e.value, e.grad, ny, nx);
      }
      default: {
        const auto e = lame_green_eval(*kf_, d);
        return lame(kind, e, ny, nx);
      }
    }
  }

  Block free(LayerKind kind, const Vec& d, const Vec& ny, const Vec& nx) const {
    switch (kf_->family) {
      case Family::laplace: {
        const auto e = laplace_free(n_, d);
        return scalar(kind, e.value, e.grad.cast<cplx>(), ny, nx);
      }
      case Family::helmholtz: {
        const auto e = helmholtz_free(n_, kf_->k(), d);
        return scalar(kind, e.value, e.grad, ny, nx);
      }
      default: return lame(kind, lame_free(n_, kf_->omega(), d), ny, nx);
    }
  }

  /// periodic - free, for d != 0.
  Block remainder(LayerKind kind, const Vec& d, const Vec& ny, const Vec& nx) const {
    return periodic(kind, d, ny, nx) - free(kind, d, ny, nx);
  }

  /// lim_{d -> 0} (periodic - free).
  Block rem0(LayerKind kind, const Vec& ny, const Vec& nx) const {
    switch (kf_->family) {
      case Family::laplace:
        return scalar(kind, lap0_.value, lap0_.grad.cast<cplx>(), ny, nx);
      case Family::helmholtz: return scalar(kind, helm0_.value, helm0_.grad, ny, nx);
      default: return lame(kind, lame0_, ny, nx);
    }
  }

  /// Lame double layer and adjoint are principal-value kernels.
  bool principal_value(LayerKind kind) const {
    return kf_->family == Family::lame && kind != LayerKind::single;
  }

  /// 2D: coefficient of log r^2 in the free kernel.
  Block log_coef(LayerKind kind, const Vec& d, const Vec& ny, const Vec& nx) const {
    const int c = components();
    Block B = Block::Zero(c, c);
    if (kf_->family == Family::lame) {
      if (kind == LayerKind::single)
        for (int a = 0; a < c; ++a) B(a, a) = (1.0 - 0.5 * kf_->lame_c()) / (4.0 * pi);
      return B;
    }
    if (kf_->family == Family::laplace) {
      if (kind == LayerKind::single) B(0, 0) = 1.0 / (4.0 * pi);
      return B;
    }
    const cplx k = kf_->k();
    const double r = d.head(2).norm();
    if (kind == LayerKind::single) {
      B(0, 0) = special::bessel_j0(k * r) / (4.0 * pi);
      return B;
    }
    // J1(kr)/r -> k/2 as r -> 0
    const cplx j1r = r > 0.0 ? special::bessel_j1(k * r) / r : 0.5 * k;
    if (kind == LayerKind::dlayer) B(0, 0) = k / (4.0 * pi) * j1r * ny.dot(d);
    else B(0, 0) = -k / (4.0 * pi) * j1r * nx.dot(d);
    return B;
  }

  /// 2D: limit along the curve of (free - log_coef log r^2) at the diagonal.
  Block free_diag(LayerKind kind, const Vec& tangent, double kappa) const {
    const int c = components();
    Block B = Block::Zero(c, c);
    if (kf_->family == Family::lame) {
      const double cc = kf_->lame_c();
      for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b)
          B(a, b) = -cc / (4.0 * pi) * tangent[a] * tangent[b] + (a == b ? cc / (8.0 * pi) : 0.0);
      return B;
    }
    if (kind != LayerKind::single) B(0, 0) = kappa / (4.0 * pi);
    return B;
  }

 private:
  static Block scalar(LayerKind kind, cplx v, const CVec& g, const Vec& ny, const Vec& nx) {
    switch (kind) {
      case LayerKind::single: return detail::scalar_block(v);
      case LayerKind::dlayer: return detail::scalar_block(-ny.cast<cplx>().dot(g));
      default: return detail::scalar_block(nx.cast<cplx>().dot(g));
    }
  }

  Block lame(LayerKind kind, const LameValue& e, const Vec& ny, const Vec& nx) const {
    switch (kind) {
      case LayerKind::single: return e.value.topLeftCorner(n_, n_).cast<cplx>();
      case LayerKind::dlayer: return detail::lame_dl_block(e.jacobian, ny, kf_->omega(), n_);
      default: return detail::lame_adj_block(e.jacobian, nx, kf_->omega(), n_);
    }
  }

  const KernelFamily* kf_;
  int n_;
  LaplaceValue lap0_;
  HelmholtzValue helm0_;
  LameValue lame0_;
};

// ------------------------------------------------------------- heat blocks

/// Cumulative time integrals C_l = int_0^{l dt} Phi(s, x) ds and their spatial
/// gradients for l = 0..M. With skip_origin the nearest image is omitted.
struct HeatCumulative {
  std::vector<double> value;
  std::vector<Vec> grad;
};

inline HeatCumulative heat_cumulative(const UnitCell& cell, double crossover, const Vec& x,
                                      double dt, int M, bool want_value, bool skip_origin = false) {
  const int n = cell.n;
  HeatCumulative out;
  out.value.assign(M + 1, 0.0);
  out.grad.assign(M + 1, Vec::Zero());
  if (crossover <= 0.0) crossover = detail::heat_crossover_default(cell);
  const Vec xr = cell.reduce(x);
  const double tmax = M * dt;
  // levels handled by the image sum: t_l <= crossover
  const int ls = std::min(M, static_cast<int>(std::floor(crossover / dt * (1.0 + 1e-12))));
  const double ts = std::min(tmax, crossover);
  double I[2];
  detail::for_each_image(cell, xr, std::sqrt(4.0 * ts * detail::heat_cut),
                         [&](const Vec& d, double r2) {
    if (r2 <= 1e-30 * cell.min_diag() * cell.min_diag()) {
      if (skip_origin) return;
      throw Error(ErrorCode::singular_point, "heat time integral from 0 on the lattice");
    }
    auto add = [&](int l, double t) {
      if (r2 / (4.0 * t) > detail::heat_cut) return;
      if (want_value) {
        special::heat_moments(n, r2, t, -1, 0, I);
        out.value[l] += I[1];
      } else {
        special::heat_moments(n, r2, t, -1, -1, I);
      }
      out.grad[l] -= 0.5 * I[0] * d;
    };
    for (int l = 1; l <= ls; ++l) add(l, l * dt);
    if (tmax > crossover && ls < M) {
      // spatial part up to the crossover, shared by all later levels
      double vs = 0.0;
      Vec gs = Vec::Zero();
      if (r2 / (4.0 * crossover) <= detail::heat_cut) {
        if (want_value) {
          special::heat_moments(n, r2, crossover, -1, 0, I);
          vs = I[1];
        } else {
          special::heat_moments(n, r2, crossover, -1, -1, I);
        }
        gs = -0.5 * I[0] * d;
      }
      for (int l = ls + 1; l <= M; ++l) {
        out.value[l] += vs;
        out.grad[l] += gs;
      }
    }
  });
  if (tmax > crossover && ls < M) {
    const double inv = 1.0 / cell.volume;
    detail::for_each_mode(cell, xr, detail::heat_cut / crossover,
                          [&](const Vec& xi, double l2, double c, double s) {
      if (l2 == 0.0) {
        for (int l = ls + 1; l <= M; ++l) out.value[l] += inv * (l * dt - crossover);
        return;
      }
      const double es = std::exp(-l2 * crossover);
      const double step = std::exp(-l2 * dt);
      double el = std::exp(-l2 * (ls + 1) * dt);
      for (int l = ls + 1; l <= M; ++l) {
        const double f = inv * (es - el) / l2;
        out.value[l] += f * c;
        out.grad[l] -= xi * (f * s);
        el *= step;
      }
    });
  }
  return out;
}

/// Nearest-image part of int_0^dt Phi(s, d) ds (value, gradient); d != 0.
inline std::pair<double, Vec> heat_free_first_step(int n, const Vec& d, double dt) {
  double I[2];
  const double r2 = d.head(n).squaredNorm();
  special::heat_moments(n, r2, dt, -1, 0, I);
  return {I[1], -0.5 * I[0] * d};
}

}  // namespace perpot
