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
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "perpot/error.hpp"
#include "perpot/geometry.hpp"
#include "perpot/greens.hpp"
#include "perpot/layer_kernels.hpp"
#include "perpot/parallel.hpp"
#include "perpot/special.hpp"

namespace perpot {

/// Boundary density. Elliptic: node-major values (N * components).
/// Heat: values at the time levels t_1..t_M (level-major, N per level); the
/// level t_0 = 0 is implicitly zero and each value holds on (t_{p-1}, t_p].
struct Density {
  int components = 1;
  std::size_t steps = 0;
  double horizon = 0.0;
  Eigen::VectorXcd values;

  static Density scalar(const Eigen::VectorXcd& v) {
    Density d;
    d.values = v;
    return d;
  }
  static Density vector(const Eigen::VectorXcd& v, int comps) {
    Density d;
    d.components = comps;
    d.values = v;
    return d;
  }
  /// heat density from an N x M real matrix (column p-1 = level t_p)
  static Density heat(const Eigen::MatrixXd& levels, double T) {
    Density d;
    d.steps = static_cast<std::size_t>(levels.cols());
    d.horizon = T;
    d.values.resize(levels.size());
    for (Eigen::Index p = 0; p < levels.cols(); ++p)
      for (Eigen::Index j = 0; j < levels.rows(); ++j)
        d.values[p * levels.rows() + j] = levels(j, p);
    return d;
  }

  bool is_heat() const { return steps > 0; }
  std::size_t nodes() const {
    return is_heat() ? values.size() / steps : values.size() / components;
  }
  BVec at(std::size_t i) const { return values.segment(i * components, components); }
  double heat_at(std::size_t level, std::size_t j) const {
    return values[(level - 1) * nodes() + j].real();
  }
  double dt() const { return horizon / static_cast<double>(steps); }
};

/// Nystrom matrix of a boundary operator. Heat operators are block Toeplitz
/// in time and store only the blocks B_l acting from level p to level p + l.
struct BoundaryOperator {
  Family family = Family::laplace;
  LayerKind kind = LayerKind::dlayer;
  std::string fingerprint;
  int components = 1;
  std::size_t nodes = 0;
  std::size_t steps = 1;
  double dt = 0.0;
  Eigen::MatrixXcd matrix;
  std::vector<Eigen::MatrixXd> blocks;

  bool is_heat() const { return family == Family::heat; }

  /// Full (M N) x (M N) block lower triangular matrix of a heat operator.
  Eigen::MatrixXd heat_dense() const {
    const Eigen::Index N = static_cast<Eigen::Index>(nodes), M = static_cast<Eigen::Index>(steps);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M * N, M * N);
    for (Eigen::Index m = 0; m < M; ++m)
      for (Eigen::Index p = 0; p <= m; ++p) A.block(m * N, p * N, N, N) = blocks[m - p];
    return A;
  }
};

// ------------------------------------------------------------------ rules

namespace detail {

/// Weights of int_0^{2pi} log(4 sin^2((t - s)/2)) f(s) ds at offset m.
inline std::vector<double> kress_weights(int N) {
  const int n = N / 2;
  std::vector<double> R(N);
  const double h = 2.0 * pi / N;
  for (int m = 0; m < N; ++m) {
    double s = 0.0;
    for (int p = 1; p < n; ++p) s += std::cos(p * m * h) / p;
    R[m] = -2.0 * pi / n * s - pi / (double(n) * n) * (m % 2 == 0 ? 1.0 : -1.0);
  }
  return R;
}

struct CurveSamples {
  std::vector<Vec> pos, normal;
  std::vector<double> speed, param;
};

/// Curve points at parameters t_j + shift with the orientation of g.
inline CurveSamples curve_samples(const BoundaryGeometry& g, int N, double shift) {
  CurveSamples s;
  const Curve& c = *g.curve;
  const Vec d0 = c.d1(g.params[0]);
  const double orient = make_vec(d0[1], -d0[0]).dot(g.normals[0]) >= 0.0 ? 1.0 : -1.0;
  for (int j = 0; j < N; ++j) {
    const double t = 2.0 * pi * j / N + shift;
    const Vec d1 = c.d1(t);
    const double sp = d1.head(2).norm();
    s.pos.push_back(c.pos(t));
    s.normal.push_back(orient * make_vec(d1[1] / sp, -d1[0] / sp));
    s.speed.push_back(sp);
    s.param.push_back(t);
  }
  return s;
}

/// Funk-Hecke eigenvalues of a zonal kernel f(x - y, n_y, n_x) on a sphere of
/// radius R, degrees 0..L-1.
inline std::vector<cplx> funk_hecke(const std::function<cplx(const Vec&, const Vec&, const Vec&)>& f,
                                    double R, int L) {
  const auto gl = special::gauss_legendre(2 * L + 32, 0.0, 1.0);
  std::vector<cplx> lam(L, 0.0);
  const Vec e3(0, 0, 1);
  for (std::size_t q = 0; q < gl.x.size(); ++q) {
    const double v = gl.x[q];
    const double ca = 1.0 - 2.0 * v * v;
    const double sa = std::sqrt(std::max(0.0, 1.0 - ca * ca));
    const Vec x = R * Vec(sa, 0.0, ca);
    const cplx fv = f(x - R * e3, e3, x / R);
    const auto P = special::legendre(L - 1, ca);
    for (int l = 0; l < L; ++l) lam[l] += 2.0 * pi * R * R * gl.w[q] * 4.0 * v * fv * P[l];
  }
  return lam;
}

inline std::vector<cplx> funk_hecke(const LayerKernel& K, LayerKind kind, double R, int L) {
  return funk_hecke([&](const Vec& d, const Vec& ny, const Vec& nx) { return K.free(kind, d, ny, nx)(0, 0); },
                    R, L);
}

/// Singular part sum_l lam_l (2l+1)/(4 pi R^2) P_l(n_i . n_j) of a zonal kernel.
inline cplx zonal_sum(const std::vector<cplx>& lam, double R, const Vec& ni, const Vec& nj) {
  const int L = static_cast<int>(lam.size());
  const auto P = special::legendre(L - 1, std::clamp(ni.dot(nj), -1.0, 1.0));
  cplx z = 0.0;
  for (int l = 0; l < L; ++l) z += lam[l] * (2.0 * l + 1.0) / (4.0 * pi * R * R) * P[l];
  return z;
}

/// Real spherical harmonics of degree < L at the sphere nodes, scaled so that
/// Y^T W Y = I for the node weights W.
inline Eigen::MatrixXd sphere_basis(const BoundaryGeometry& g) {
  const int L = g.order;
  const std::size_t N = g.size();
  Eigen::MatrixXd Y(N, L * L);
  std::vector<double> P(L * L);
  auto idx = [L](int l, int m) { return l * L + m; };
  for (std::size_t i = 0; i < N; ++i) {
    const double ct = std::cos(g.theta[i]), st = std::sin(g.theta[i]);
    // fully normalised associated Legendre functions
    P[idx(0, 0)] = 1.0 / std::sqrt(4.0 * pi);
    for (int m = 1; m < L; ++m)
      P[idx(m, m)] = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * st * P[idx(m - 1, m - 1)];
    for (int m = 0; m + 1 < L; ++m) P[idx(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * ct * P[idx(m, m)];
    for (int m = 0; m < L; ++m)
      for (int l = m + 2; l < L; ++l) {
        const double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
        const double b = std::sqrt(((l - 1.0) * (l - 1.0) - double(m) * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
        P[idx(l, m)] = a * (ct * P[idx(l - 1, m)] - b * P[idx(l - 2, m)]);
      }
    int col = 0;
    for (int l = 0; l < L; ++l) {
      Y(i, col++) = P[idx(l, 0)] / g.radius;
      for (int m = 1; m <= l; ++m) {
        Y(i, col++) = std::sqrt(2.0) * P[idx(l, m)] * std::cos(m * g.phi[i]) / g.radius;
        Y(i, col++) = std::sqrt(2.0) * P[idx(l, m)] * std::sin(m * g.phi[i]) / g.radius;
      }
    }
  }
  return Y;
}

/// Degree of each column of sphere_basis.
inline std::vector<int> sphere_basis_degrees(int L) {
  std::vector<int> d;
  for (int l = 0; l < L; ++l)
    for (int c = 0; c < 2 * l + 1; ++c) d.push_back(l);
  return d;
}

/// Quadrature on a sphere with the pole rotated to direction u; geometric
/// panels in colatitude resolve the neighbourhood of the pole.
struct PoleRule {
  std::vector<Vec> pos, normal, rel;  // rel = pos - pole, formed without cancellation
  std::vector<double> weight;
};

inline PoleRule pole_rule(const Vec& center, double R, const Vec& u, int panels = 40,
                          int nphi = 64, int order = 16) {
  Vec e3 = u.normalized();
  Vec a = std::abs(e3[0]) < 0.9 ? Vec(1, 0, 0) : Vec(0, 1, 0);
  Vec e1 = (a - a.dot(e3) * e3).normalized();
  Vec e2 = e3.cross(e1);
  std::vector<double> brk{0.0};
  for (int k = panels; k >= 1; --k) brk.push_back(pi * std::ldexp(1.0, -k));
  brk.push_back(pi);
  PoleRule r;
  for (std::size_t b = 0; b + 1 < brk.size(); ++b) {
    const auto gl = special::gauss_legendre(order, brk[b], brk[b + 1]);
    for (int q = 0; q < order; ++q) {
      const double th = gl.x[q], st = std::sin(th), ct = std::cos(th);
      for (int k = 0; k < nphi; ++k) {
        const double ph = 2.0 * pi * k / nphi;
        const Vec nrm = st * std::cos(ph) * e1 + st * std::sin(ph) * e2 + ct * e3;
        const double sh = std::sin(0.5 * th);
        r.rel.push_back(R * (st * std::cos(ph) * e1 + st * std::sin(ph) * e2 - 2.0 * sh * sh * e3));
        r.pos.push_back(center + R * nrm);
        r.normal.push_back(nrm);
        r.weight.push_back(R * R * st * gl.w[q] * 2.0 * pi / nphi);
      }
    }
  }
  return r;
}

inline void check_density(const BoundaryGeometry& g, const Density& mu, int comps) {
  if (mu.is_heat() || mu.components != comps || mu.nodes() != g.size() ||
      static_cast<std::size_t>(mu.values.size()) != g.size() * comps)
    throw Error(ErrorCode::invalid_argument, "density does not match the geometry");
}

}  // namespace detail

// ------------------------------------------------------- elliptic assembly

/// Rows `rows` of the Nystrom matrix for kind on g (row/column blocks of size
/// components()).
inline Eigen::MatrixXcd assemble_rows(const LayerKernel& K, LayerKind kind,
                                      const BoundaryGeometry& g,
                                      const std::vector<std::size_t>& rows, unsigned workers = 1) {
  const int c = K.components();
  const int N = static_cast<int>(g.size());
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(rows.size() * c, N * c);
  if (g.kind == BoundaryKind::curve2d) {
    const double h = 2.0 * pi / N;
    if (K.principal_value(kind)) {
      // kernel at the shifted nodes t_j + h/2, density carried there by
      // trigonometric interpolation
      const auto mid = detail::curve_samples(g, N, 0.5 * h);
      Eigen::MatrixXd P(N, N);
      for (int m = 0; m < N; ++m)
        for (int j = 0; j < N; ++j)
          P(m, j) = ((m - j) % 2 == 0 ? 1.0 : -1.0) / N / std::tan(0.5 * h * (m - j + 0.5));
      parallel_for(rows.size(), workers, [&](std::size_t r) {
        const std::size_t i = rows[r];
        Eigen::MatrixXcd W(c, N * c);
        for (int m = 0; m < N; ++m)
          W.block(0, m * c, c, c) =
              h * mid.speed[m] * K.periodic(kind, g.nodes[i] - mid.pos[m], mid.normal[m], g.normals[i]);
        for (int j = 0; j < N; ++j)
          for (int b = 0; b < c; ++b) {
            Eigen::VectorXcd col = Eigen::VectorXcd::Zero(c);
            for (int m = 0; m < N; ++m) col += W.col(m * c + b) * P(m, j);
            A.block(r * c, j * c + b, c, 1) = col;
          }
      });
      return A;
    }
    const auto R = detail::kress_weights(N);
    parallel_for(rows.size(), workers, [&](std::size_t r) {
      const std::size_t i = rows[r];
      for (int j = 0; j < N; ++j) {
        const std::size_t off = static_cast<std::size_t>(std::abs(static_cast<int>(i) - j));
        Block blk;
        if (static_cast<int>(i) != j) {
          const Vec d = g.nodes[i] - g.nodes[j];
          const Block C = K.log_coef(kind, d, g.normals[j], g.normals[i]);
          const double s = std::sin(0.5 * (g.params[i] - g.params[j]));
          const Block Kp = K.periodic(kind, d, g.normals[j], g.normals[i]);
          blk = g.speed[j] * (R[off] * C + h * (Kp - std::log(4.0 * s * s) * C));
        } else {
          const Vec tan = make_vec(-g.normals[i][1], g.normals[i][0]);
          const Block C = K.log_coef(kind, Vec::Zero(), g.normals[i], g.normals[i]);
          const Block sm = K.rem0(kind, g.normals[i], g.normals[i]) +
                           K.free_diag(kind, tan, g.curvature[i]) +
                           std::log(g.speed[i] * g.speed[i]) * C;
          blk = g.speed[i] * (R[0] * C + h * sm);
        }
        A.block(r * c, j * c, c, c) = blk;
      }
    });
    return A;
  }
  if (c != 1)
    throw Error(ErrorCode::unsupported,
                "vector kernels on spheres are applied by pole-rotated quadrature only");
  const int L = g.order;
  const double Rr = g.radius;
  const auto lam = detail::funk_hecke(K, kind, Rr, L);
  parallel_for(rows.size(), workers, [&](std::size_t r) {
    const std::size_t i = rows[r];
    for (int j = 0; j < N; ++j) {
      const cplx z = detail::zonal_sum(lam, Rr, g.normals[i], g.normals[j]);
      const cplx rem = static_cast<int>(i) == j
                           ? K.rem0(kind, g.normals[j], g.normals[i])(0, 0)
                           : K.remainder(kind, g.nodes[i] - g.nodes[j], g.normals[j], g.normals[i])(0, 0);
      A(r, j) = g.weights[j] * (z + rem);
    }
  });
  return A;
}

inline BoundaryOperator assemble(const KernelFamily& kf, const BoundaryGeometry& g, LayerKind kind,
                                 unsigned workers = 1) {
  LayerKernel K(kf);
  std::vector<std::size_t> rows(g.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  BoundaryOperator op;
  op.family = kf.family;
  op.kind = kind;
  op.fingerprint = g.fingerprint();
  op.components = K.components();
  op.nodes = g.size();
  op.matrix = assemble_rows(K, kind, g, rows, workers);
  return op;
}

inline BoundaryOperator assemble_K(const KernelFamily& kf, const BoundaryGeometry& g,
                                   unsigned workers = 1) {
  return assemble(kf, g, LayerKind::dlayer, workers);
}
inline BoundaryOperator assemble_Kstar(const KernelFamily& kf, const BoundaryGeometry& g,
                                       unsigned workers = 1) {
  return assemble(kf, g, LayerKind::adjoint, workers);
}
inline BoundaryOperator assemble_Sboundary(const KernelFamily& kf, const BoundaryGeometry& g,
                                           unsigned workers = 1) {
  return assemble(kf, g, LayerKind::single, workers);
}

/// Smooth part periodic - free on a sphere, R_ij (rem0 on the diagonal), scalar kernels.
inline Eigen::MatrixXcd sphere_remainder(const LayerKernel& K, LayerKind kind,
                                         const BoundaryGeometry& g, unsigned workers = 1) {
  const std::size_t N = g.size();
  Eigen::MatrixXcd R(N, N);
  parallel_for(N, workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < N; ++j)
      R(i, j) = i == j ? K.rem0(kind, g.normals[j], g.normals[i])(0, 0)
                       : K.remainder(kind, g.nodes[i] - g.nodes[j], g.normals[j], g.normals[i])(0, 0);
  });
  return R;
}

/// Operator applied at on-surface points of a sphere by pole-rotated
/// quadrature (free part) plus the product rule (smooth remainder).
inline BVec sphere_apply_at_node(const LayerKernel& K, LayerKind kind, const BoundaryGeometry& g,
                                 const std::function<BVec(const Vec&, double)>& mu, std::size_t i) {
  const int c = K.components();
  BVec acc = BVec::Zero(c);
  const Vec& x = g.nodes[i];
  const Vec& nx = g.normals[i];
  const auto rule = detail::pole_rule(g.center, g.radius, nx);
  for (std::size_t q = 0; q < rule.pos.size(); ++q)
    acc += rule.weight[q] * K.free(kind, -rule.rel[q], rule.normal[q], nx) * mu(rule.pos[q], 0.0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Block rem = j == i ? K.rem0(kind, g.normals[j], nx)
                             : K.remainder(kind, x - g.nodes[j], g.normals[j], nx);
    acc += g.weights[j] * rem * mu(g.nodes[j], 0.0);
  }
  return acc;
}

// ----------------------------------------------------------- heat assembly

namespace detail {

inline void require_heat_curve(const KernelFamily& kf, const BoundaryGeometry& g) {
  if (kf.family != Family::heat) throw Error(ErrorCode::invalid_argument, "heat family expected");
  if (g.kind != BoundaryKind::curve2d || kf.n() != 2)
    throw Error(ErrorCode::unsupported, "heat operators are assembled on curves (n = 2)");
}

/// Per-block kernels at x for all l from cumulative integrals.
inline void heat_block_values(const HeatCumulative& C, LayerKind kind, const Vec& ny,
                              const Vec& nx, std::vector<double>& out) {
  const std::size_t M = C.value.size() - 1;
  out.resize(M);
  for (std::size_t l = 0; l < M; ++l) {
    switch (kind) {
      case LayerKind::single: out[l] = C.value[l + 1] - C.value[l]; break;
      case LayerKind::dlayer: out[l] = -ny.dot(C.grad[l + 1] - C.grad[l]); break;
      case LayerKind::adjoint: out[l] = nx.dot(C.grad[l + 1] - C.grad[l]); break;
    }
  }
}

}  // namespace detail

/// Heat boundary operator rows on g with M steps of size T/M.
/// single: S^h trace; dlayer: K^h; adjoint: K^h_*.
inline std::vector<Eigen::MatrixXd> assemble_heat_rows(const KernelFamily& kf,
                                                       const BoundaryGeometry& g, LayerKind kind,
                                                       double T, int M,
                                                       const std::vector<std::size_t>& rows,
                                                       unsigned workers = 1) {
  detail::require_heat_curve(kf, g);
  if (!(T > 0.0) || M < 1) throw Error(ErrorCode::invalid_argument, "need T > 0 and M >= 1");
  const int N = static_cast<int>(g.size());
  const double dt = T / M;
  const double h = 2.0 * pi / N;
  const double ts = kf.heat_crossover;
  std::vector<Eigen::MatrixXd> B(M, Eigen::MatrixXd::Zero(rows.size(), N));
  const auto R = detail::kress_weights(N);
  const bool want_value = kind == LayerKind::single;
  parallel_for(rows.size(), workers, [&](std::size_t r) {
    const std::size_t i = rows[r];
    std::vector<double> kv;
    for (int j = 0; j < N; ++j) {
      if (static_cast<int>(i) == j) {
        if (kind == LayerKind::single) {
          // block 0 carries E1(r^2/4dt)/(4pi) = -(1/4pi) log r^2 + smooth
          const auto C = heat_cumulative(kf.cell, ts, g.nodes[i] - g.nodes[j], dt, M, true, true);
          detail::heat_block_values(C, kind, g.normals[j], g.normals[i], kv);
          const double b0 = std::min(dt, ts);
          const double lim = (std::log(4.0 * b0) - special::euler_gamma) / (4.0 * pi);
          const double c1 = -1.0 / (4.0 * pi);
          B[0](r, j) = g.speed[i] * (R[0] * c1 + h * (lim + kv[0] + c1 * std::log(g.speed[i] * g.speed[i])));
          for (int l = 1; l < M; ++l) {
            // nearest image over [l dt, (l+1) dt] at r = 0
            const double a = l * dt, b = (l + 1) * dt;
            const double self = std::min(b, ts) > a ? std::log(std::min(b, ts) / a) / (4.0 * pi) : 0.0;
            B[l](r, j) = g.weights[j] * (kv[l] + self);
          }
        } else {
          B[0](r, j) = g.weights[j] * (-g.curvature[i] / (4.0 * pi));
        }
        continue;
      }
      const Vec d = g.nodes[i] - g.nodes[j];
      const auto C = heat_cumulative(kf.cell, ts, d, dt, M, want_value);
      detail::heat_block_values(C, kind, g.normals[j], g.normals[i], kv);
      if (kind == LayerKind::single) {
        const std::size_t off = static_cast<std::size_t>(std::abs(static_cast<int>(i) - j));
        const double c1 = -1.0 / (4.0 * pi);
        const double s = std::sin(0.5 * (g.params[i] - g.params[j]));
        B[0](r, j) = g.speed[j] * (R[off] * c1 + h * (kv[0] - c1 * std::log(4.0 * s * s)));
        for (int l = 1; l < M; ++l) B[l](r, j) = g.weights[j] * kv[l];
      } else {
        for (int l = 0; l < M; ++l) B[l](r, j) = g.weights[j] * kv[l];
      }
    }
  });
  return B;
}

inline BoundaryOperator assemble_heat(const KernelFamily& kf, const BoundaryGeometry& g,
                                      LayerKind kind, double T, int M, unsigned workers = 1) {
  std::vector<std::size_t> rows(g.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  BoundaryOperator op;
  op.family = Family::heat;
  op.kind = kind;
  op.fingerprint = g.fingerprint();
  op.nodes = g.size();
  op.steps = static_cast<std::size_t>(M);
  op.dt = T / M;
  op.blocks = assemble_heat_rows(kf, g, kind, T, M, rows, workers);
  return op;
}

// --------------------------------------------------------- off-boundary eval

struct PotentialValue {
  BVec value;
  bool near_boundary = false;
};

namespace detail {

inline bool near_boundary(const BoundaryGeometry& g, const Vec& x) {
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double width = g.n == 2 ? g.weights[j] : std::sqrt(g.weights[j]);
    if ((x - g.nodes[j]).norm() < width) return true;
  }
  return false;
}

inline PotentialValue elliptic_eval(const KernelFamily& kf, const BoundaryGeometry& g,
                                    const Density& mu, const Vec& x, LayerKind kind,
                                    const Vec& direction) {
  LayerKernel K(kf);
  check_density(g, mu, K.components());
  PotentialValue out;
  out.value = BVec::Zero(K.components());
  for (std::size_t j = 0; j < g.size(); ++j)
    out.value += g.weights[j] * K.periodic(kind, x - g.nodes[j], g.normals[j], direction) * mu.at(j);
  out.near_boundary = near_boundary(g, x);
  return out;
}

inline PotentialValue heat_eval_potential(const KernelFamily& kf, const BoundaryGeometry& g,
                                          const Density& mu, const Vec& x, double t,
                                          LayerKind kind, const Vec& direction) {
  if (!mu.is_heat() || mu.nodes() != g.size())
    throw Error(ErrorCode::invalid_argument, "heat density does not match the geometry");
  if (!(t > 0.0) || t > mu.horizon * (1.0 + 1e-12))
    throw Error(ErrorCode::invalid_argument, "evaluation time must lie in (0, T]");
  const double dt = mu.dt();
  PotentialValue out;
  out.value = BVec::Zero(1);
  double acc = 0.0;
  const double lev = t / dt;
  const int m = static_cast<int>(std::llround(lev));
  const bool on_level = std::abs(lev - m) < 1e-9 && m >= 1;
  std::vector<double> kv;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Vec d = x - g.nodes[j];
    if (on_level) {
      const auto C = heat_cumulative(kf.cell, kf.heat_crossover, d, dt, m, kind == LayerKind::single);
      heat_block_values(C, kind, g.normals[j], direction, kv);
      for (int p = 1; p <= m; ++p) acc += g.weights[j] * kv[m - p] * mu.heat_at(p, j);
    } else {
      for (std::size_t p = 1; p <= mu.steps; ++p) {
        const double tp0 = (p - 1) * dt;
        if (tp0 >= t) break;
        const double a = std::max(0.0, t - p * dt), b = t - tp0;
        const auto e = detail::heat_integrated(kf.cell, a, b, d, 0, kf.heat_crossover);
        double k = 0.0;
        switch (kind) {
          case LayerKind::single: k = e.value; break;
          case LayerKind::dlayer: k = -g.normals[j].dot(e.grad); break;
          case LayerKind::adjoint: k = direction.dot(e.grad); break;
        }
        acc += g.weights[j] * k * mu.heat_at(p, j);
      }
    }
  }
  out.value(0) = acc;
  out.near_boundary = near_boundary(g, x);
  return out;
}

}  // namespace detail

/// Single layer potential at x (time t for heat).
inline PotentialValue single_layer_eval(const KernelFamily& kf, const BoundaryGeometry& g,
                                        const Density& mu, const Vec& x, double t = 0.0) {
  if (kf.family == Family::heat)
    return detail::heat_eval_potential(kf, g, mu, x, t, LayerKind::single, Vec::Zero());
  return detail::elliptic_eval(kf, g, mu, x, LayerKind::single, Vec::Zero());
}

/// Double layer potential at x (time t for heat).
inline PotentialValue double_layer_eval(const KernelFamily& kf, const BoundaryGeometry& g,
                                        const Density& mu, const Vec& x, double t = 0.0) {
  if (kf.family == Family::heat)
    return detail::heat_eval_potential(kf, g, mu, x, t, LayerKind::dlayer, Vec::Zero());
  return detail::elliptic_eval(kf, g, mu, x, LayerKind::dlayer, Vec::Zero());
}

/// Derivative of the single layer along `direction` (traction for Lame).
inline PotentialValue single_layer_normal_eval(const KernelFamily& kf, const BoundaryGeometry& g,
                                               const Density& mu, const Vec& x,
                                               const Vec& direction, double t = 0.0) {
  if (kf.family == Family::heat)
    return detail::heat_eval_potential(kf, g, mu, x, t, LayerKind::adjoint, direction);
  return detail::elliptic_eval(kf, g, mu, x, LayerKind::adjoint, direction);
}

// -------------------------------------------------------------- jump checks

enum class JumpIdentity { double_layer, single_layer_normal };
enum class Side { interior, exterior };

inline const char* to_string(JumpIdentity j) {
  return j == JumpIdentity::double_layer ? "double-layer-value" : "single-layer-normal";
}
inline const char* to_string(Side s) { return s == Side::interior ? "interior" : "exterior"; }

struct JumpOptions {
  std::vector<double> distances;      // empty: geometric sequence from the geometry size
  std::vector<std::size_t> targets;   // empty: four spread nodes
  int fine_nodes = 1 << 15;
  int pole_panels = 40;
  int pole_phi = 64;
  double T = 1.0;                     // heat horizon
  int M = 128;                        // heat steps
  unsigned workers = 1;
};

struct JumpReport {
  std::string family, identity, side;
  std::vector<double> distances;
  std::vector<double> target_errors;
  double error = 0.0;
};

using DensityFn = std::function<BVec(const Vec& y, double param)>;
using HeatDensityFn = std::function<double(double t, const Vec& y, double param)>;

/// Value at 0 of the interpolating polynomial through (x_k, y_k).
template <class T>
T neville_at_zero(const std::vector<double>& x, std::vector<T> y) {
  const std::size_t m = x.size();
  for (std::size_t k = 1; k < m; ++k)
    for (std::size_t i = 0; i + k < m; ++i)
      y[i] = (x[i + k] * y[i] - x[i] * y[i + 1]) / (x[i + k] - x[i]);
  return y[0];
}

namespace detail {

inline std::vector<double> default_distances(const BoundaryGeometry& g) {
  const double scale = g.kind == BoundaryKind::sphere3d ? g.radius : g.measure() / (2.0 * pi);
  std::vector<double> d;
  for (int k = 0; k < 6; ++k) d.push_back(0.16 * scale * std::ldexp(1.0, -k));
  return d;
}

inline std::vector<std::size_t> default_targets(const BoundaryGeometry& g) {
  const std::size_t N = g.size();
  if (g.kind == BoundaryKind::sphere3d) {
    const std::size_t P = 2 * g.order;
    return {1, (g.order / 3) * P + P / 5, (g.order / 2) * P + 3, (g.order - 1) * P + P / 2};
  }
  return {0, N / 8 + 1, N / 3, (3 * N) / 4 + 3};
}

/// Jump term sign: value(side) = sign * mu / 2 + operator(mu).
inline double jump_sign(Family f, JumpIdentity id, Side s) {
  double sign = s == Side::interior ? 1.0 : -1.0;
  if (id == JumpIdentity::single_layer_normal) sign = -sign;
  if (f == Family::heat) sign = -sign;
  return sign;
}

}  // namespace detail

/// Approaches the boundary along the normal at a few nodes, extrapolates the
/// layer potential (double layer) or its normal derivative / traction (single
/// layer) to distance 0 and compares with sign*mu/2 + (K or K*) mu.
inline JumpReport jump_check(const KernelFamily& kf, const BoundaryGeometry& g, JumpIdentity id,
                             const DensityFn& mu, Side side, const JumpOptions& opt = {}) {
  LayerKernel K(kf);
  const LayerKind kind = id == JumpIdentity::double_layer ? LayerKind::dlayer : LayerKind::adjoint;
  const int c = K.components();
  JumpReport rep;
  rep.family = to_string(kf.family);
  rep.identity = to_string(id);
  rep.side = to_string(side);
  rep.distances = opt.distances.empty() ? detail::default_distances(g) : opt.distances;
  const auto targets = opt.targets.empty() ? detail::default_targets(g) : opt.targets;
  const double sigma = side == Side::interior ? -1.0 : 1.0;
  const double sign = detail::jump_sign(kf.family, id, side);
  const std::size_t N = g.size();

  Eigen::VectorXcd mun(N * c);
  for (std::size_t j = 0; j < N; ++j)
    mun.segment(j * c, c) = mu(g.nodes[j], g.params.empty() ? 0.0 : g.params[j]);

  std::vector<BVec> opval(targets.size());
  const bool sphere = g.kind == BoundaryKind::sphere3d;
  if (sphere && c > 1) {
    for (std::size_t r = 0; r < targets.size(); ++r)
      opval[r] = sphere_apply_at_node(K, kind, g, mu, targets[r]);
  } else {
    const Eigen::MatrixXcd A = assemble_rows(K, kind, g, targets, opt.workers);
    for (std::size_t r = 0; r < targets.size(); ++r) opval[r] = A.block(r * c, 0, c, A.cols()) * mun;
  }

  BoundaryGeometry fine;
  std::vector<BVec> mufine;
  if (!sphere) {
    fine = make_curve(g.curve, opt.fine_nodes, false);
    for (std::size_t f = 0; f < fine.size(); ++f) mufine.push_back(mu(fine.nodes[f], fine.params[f]));
  }

  rep.target_errors.assign(targets.size(), 0.0);
  parallel_for(targets.size(), opt.workers, [&](std::size_t r) {
    const std::size_t i = targets[r];
    const Vec& x0 = g.nodes[i];
    const Vec& n0 = g.normals[i];
    std::vector<BVec> vals;
    detail::PoleRule rule;
    std::vector<BVec> murule;
    if (sphere) {
      rule = detail::pole_rule(g.center, g.radius, n0, opt.pole_panels, opt.pole_phi);
      for (const Vec& y : rule.pos) murule.push_back(mu(y, 0.0));
    }
    for (double d : rep.distances) {
      const Vec x = x0 + sigma * d * n0;
      BVec v = BVec::Zero(c);
      if (sphere) {
        for (std::size_t q = 0; q < rule.pos.size(); ++q)
          v += rule.weight[q] * K.free(kind, sigma * d * n0 - rule.rel[q], rule.normal[q], n0) * murule[q];
      } else {
        for (std::size_t f = 0; f < fine.size(); ++f)
          v += fine.weights[f] * K.free(kind, x - fine.nodes[f], fine.normals[f], n0) * mufine[f];
      }
      for (std::size_t j = 0; j < N; ++j)
        v += g.weights[j] * K.remainder(kind, x - g.nodes[j], g.normals[j], n0) * mun.segment(j * c, c);
      vals.push_back(v);
    }
    const BVec lim = neville_at_zero(rep.distances, vals);
    const BVec expect = sign * 0.5 * mun.segment(i * c, c) + opval[r];
    rep.target_errors[r] = (lim - expect).cwiseAbs().maxCoeff();
  });
  for (double e : rep.target_errors) rep.error = std::max(rep.error, e);
  return rep;
}

/// Heat version with a piecewise-constant-in-time density collocated at t_p,
/// checked at the final time T.
inline JumpReport heat_jump_check(const KernelFamily& kf, const BoundaryGeometry& g,
                                  JumpIdentity id, const HeatDensityFn& mu, Side side,
                                  const JumpOptions& opt = {}) {
  detail::require_heat_curve(kf, g);
  const LayerKind kind = id == JumpIdentity::double_layer ? LayerKind::dlayer : LayerKind::adjoint;
  JumpReport rep;
  rep.family = to_string(kf.family);
  rep.identity = to_string(id);
  rep.side = to_string(side);
  rep.distances = opt.distances.empty() ? detail::default_distances(g) : opt.distances;
  const auto targets = opt.targets.empty() ? detail::default_targets(g) : opt.targets;
  const double sigma = side == Side::interior ? -1.0 : 1.0;
  const double sign = detail::jump_sign(kf.family, id, side);
  const int N = static_cast<int>(g.size());
  const int M = opt.M;
  const double dt = opt.T / M;

  Eigen::MatrixXd mun(N, M);
  for (int p = 1; p <= M; ++p)
    for (int j = 0; j < N; ++j) mun(j, p - 1) = mu(p * dt, g.nodes[j], g.params[j]);

  const auto B = assemble_heat_rows(kf, g, kind, opt.T, M, targets, opt.workers);
  const BoundaryGeometry fine = make_curve(g.curve, opt.fine_nodes, false);
  std::vector<double> mufine(fine.size());
  for (std::size_t f = 0; f < fine.size(); ++f)
    mufine[f] = mu(M * dt, fine.nodes[f], fine.params[f]);

  rep.target_errors.assign(targets.size(), 0.0);
  parallel_for(targets.size(), opt.workers, [&](std::size_t r) {
    const std::size_t i = targets[r];
    double expect = sign * 0.5 * mun(i, M - 1);
    for (int p = 1; p <= M; ++p) expect += B[M - p].row(r).dot(mun.col(p - 1));
    const Vec& x0 = g.nodes[i];
    const Vec& n0 = g.normals[i];
    auto block_kernel = [&](double value, const Vec& grad, const Vec& ny) {
      switch (kind) {
        case LayerKind::dlayer: return -ny.dot(grad);
        case LayerKind::adjoint: return n0.dot(grad);
        default: return value;
      }
    };
    std::vector<double> vals, kv;
    for (double d : rep.distances) {
      const Vec x = x0 + sigma * d * n0;
      double v = 0.0;
      for (std::size_t f = 0; f < fine.size(); ++f) {
        const auto fr = heat_free_first_step(2, x - fine.nodes[f], dt);
        v += fine.weights[f] * block_kernel(fr.first, fr.second, fine.normals[f]) * mufine[f];
      }
      for (int j = 0; j < N; ++j) {
        const Vec dj = x - g.nodes[j];
        const auto C = heat_cumulative(kf.cell, kf.heat_crossover, dj, dt, M, false);
        detail::heat_block_values(C, kind, g.normals[j], n0, kv);
        const auto fr = heat_free_first_step(2, dj, dt);
        kv[0] -= block_kernel(fr.first, fr.second, g.normals[j]);
        for (int p = 1; p <= M; ++p) v += g.weights[j] * kv[M - p] * mun(j, p - 1);
      }
      vals.push_back(v);
    }
    rep.target_errors[r] = std::abs(neville_at_zero(rep.distances, vals) - expect);
  });
  for (double e : rep.target_errors) rep.error = std::max(rep.error, e);
  return rep;
}

// ------------------------------------------------------------------ export

/// Binary layout (little endian): 8-byte magic "PERPOTOP", int32 family
/// (0 laplace, 1 helmholtz, 2 lame, 3 heat), int32 dtype (0 float64,
/// 1 complex128 as re/im pairs), uint64 N (rows of one block = nodes x
/// components), uint64 M (number of time blocks, 1 for elliptic operators),
/// then M row-major N x N blocks.
inline void export_operator(const BoundaryOperator& op, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::invalid_argument, "cannot open " + path);
  const char magic[8] = {'P', 'E', 'R', 'P', 'O', 'T', 'O', 'P'};
  os.write(magic, 8);
  const std::int32_t fam = static_cast<std::int32_t>(op.family);
  const bool cplx_data = op.family == Family::helmholtz;
  const std::int32_t dtype = cplx_data ? 1 : 0;
  const std::uint64_t N = op.is_heat() ? op.nodes : static_cast<std::uint64_t>(op.matrix.rows());
  const std::uint64_t M = op.is_heat() ? op.steps : 1;
  os.write(reinterpret_cast<const char*>(&fam), 4);
  os.write(reinterpret_cast<const char*>(&dtype), 4);
  os.write(reinterpret_cast<const char*>(&N), 8);
  os.write(reinterpret_cast<const char*>(&M), 8);
  for (std::uint64_t b = 0; b < M; ++b)
    for (std::uint64_t i = 0; i < N; ++i)
      for (std::uint64_t j = 0; j < N; ++j) {
        if (op.is_heat()) {
          const double v = op.blocks[b](i, j);
          os.write(reinterpret_cast<const char*>(&v), 8);
        } else if (cplx_data) {
          const cplx v = op.matrix(i, j);
          const double re = v.real(), im = v.imag();
          os.write(reinterpret_cast<const char*>(&re), 8);
          os.write(reinterpret_cast<const char*>(&im), 8);
        } else {
          const double v = op.matrix(i, j).real();
          os.write(reinterpret_cast<const char*>(&v), 8);
        }
      }
}

}  // namespace perpot
