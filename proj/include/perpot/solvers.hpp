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

#include <functional>
#include <string>

#include <Eigen/LU>

#include "perpot/potentials.hpp"

namespace perpot {

enum class Representation { single_layer, double_layer_constant, heat_double_layer };

inline const char* to_string(Representation r) {
  switch (r) {
    case Representation::single_layer: return "single-layer";
    case Representation::double_layer_constant: return "double-layer+constant";
    case Representation::heat_double_layer: return "heat-double-layer";
  }
  return "?";
}

struct SolveResult {
  Density density;
  cplx constant = 0.0;     // additive constant (Laplace)
  double residual = 0.0;   // relative residual of the linear system
  double condition = 0.0;  // 1 / rcond estimate (largest over time steps for heat)
  Representation representation = Representation::single_layer;
  bool ok = false;
  std::string message;
};

/// Dirichlet data on the boundary: node position and curve parameter.
using BoundaryData = std::function<cplx(const Vec& x, double param)>;
using HeatData = std::function<double(double t, const Vec& x, double param)>;

struct SolveOptions {
  unsigned workers = 1;
  double tolerance = 1e-8;        // residual threshold
  double max_condition = 1e14;
};

namespace detail {

inline Eigen::VectorXcd sample_data(const BoundaryGeometry& g, const BoundaryData& f) {
  Eigen::VectorXcd v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g.nodes[i], g.params.empty() ? 0.0 : g.params[i]);
  return v;
}

inline double rel_residual(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& x,
                           const Eigen::VectorXcd& b) {
  const double nb = b.norm();
  const double r = (A * x - b).norm();
  return nb > 0.0 ? r / nb : r;
}

inline void finish(SolveResult& res, const SolveOptions& opt) {
  res.ok = std::isfinite(res.residual) && res.residual < opt.tolerance &&
           res.condition < opt.max_condition;
  if (!res.ok)
    res.message = "solve failed: residual " + std::to_string(res.residual) + ", condition " +
                  std::to_string(res.condition);
}

/// Single layer equation on a sphere solved by Galerkin projection onto the
/// spherical harmonics of degree < L: the free part is diagonal (Funk-Hecke
/// eigenvalues lam), the smooth remainder R is applied by the product rule.
inline void sphere_galerkin(const BoundaryGeometry& g, const std::vector<cplx>& lam,
                            const Eigen::MatrixXcd* R, const Eigen::VectorXcd& b,
                            SolveResult& res) {
  const Eigen::MatrixXd Y = sphere_basis(g);
  const auto deg = sphere_basis_degrees(g.order);
  const Eigen::Index B = Y.cols();
  Eigen::VectorXd w(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) w[j] = g.weights[j];
  const Eigen::MatrixXcd WY = (w.asDiagonal() * Y).cast<cplx>();
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(B, B);
  if (R) G = WY.transpose() * (*R) * WY;
  for (Eigen::Index c = 0; c < B; ++c) G(c, c) += lam[deg[c]];
  const Eigen::VectorXcd rhs = WY.transpose() * b;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(G);
  res.condition = 1.0 / lu.rcond();
  const Eigen::VectorXcd c = lu.solve(rhs);
  res.residual = rel_residual(G, c, rhs);
  res.density = Density::scalar(Y.cast<cplx>() * c);
}

}  // namespace detail

/// Exterior quasi-periodic Helmholtz problem, single layer representation
/// u = S[theta] with S theta = f on the boundary.
inline SolveResult solve_helmholtz_dirichlet_exterior(const KernelFamily& kf,
                                                      const BoundaryGeometry& g,
                                                      const BoundaryData& f,
                                                      const SolveOptions& opt = {}) {
  if (kf.family != Family::helmholtz) throw Error(ErrorCode::invalid_argument, "Helmholtz family expected");
  if (!kf.resonant.empty())
    throw Error(ErrorCode::resonant, "k^2 lies on the quasi-periodic spectrum; solve refused");
  SolveResult res;
  res.representation = Representation::single_layer;
  const Eigen::VectorXcd b = detail::sample_data(g, f);
  if (g.kind == BoundaryKind::sphere3d) {
    const LayerKernel K(kf);
    const auto lam = detail::funk_hecke(K, LayerKind::single, g.radius, g.order);
    const Eigen::MatrixXcd R = sphere_remainder(K, LayerKind::single, g, opt.workers);
    detail::sphere_galerkin(g, lam, &R, b, res);
    detail::finish(res, opt);
    return res;
  }
  const auto op = assemble_Sboundary(kf, g, opt.workers);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(op.matrix);
  res.condition = 1.0 / lu.rcond();
  const Eigen::VectorXcd x = lu.solve(b);
  res.residual = detail::rel_residual(op.matrix, x, b);
  res.density = Density::scalar(x);
  detail::finish(res, opt);
  return res;
}

/// Exterior periodic Laplace problem: u = D[mu] + c with
/// (-1/2 + K) mu + c = f and int mu = 0.
inline SolveResult solve_laplace_dirichlet_exterior(const UnitCell& cell, const BoundaryGeometry& g,
                                                    const BoundaryData& f,
                                                    const SolveOptions& opt = {}) {
  if (!inside_cell(g, cell)) throw Error(ErrorCode::invalid_geometry, "boundary is not inside the cell");
  const auto kf = KernelFamily::make_laplace(cell);
  SolveResult res;
  res.representation = Representation::double_layer_constant;
  const auto op = assemble_K(kf, g, opt.workers);
  const Eigen::Index N = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(N + 1, N + 1);
  A.topLeftCorner(N, N) = op.matrix;
  A.topLeftCorner(N, N).diagonal().array() -= 0.5;
  A.col(N).head(N).setOnes();
  for (Eigen::Index j = 0; j < N; ++j) A(N, j) = g.weights[j];
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(N + 1);
  b.head(N) = detail::sample_data(g, f);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  res.condition = 1.0 / lu.rcond();
  const Eigen::VectorXcd x = lu.solve(b);
  res.residual = detail::rel_residual(A, x, b);
  res.density = Density::scalar(x.head(N));
  res.constant = x[N];
  detail::finish(res, opt);
  return res;
}

/// Exterior space-periodic heat problem: u = D^h[theta] with
/// (1/2 + K^h) theta = f, marched forward in time.
inline SolveResult solve_heat_dirichlet_exterior(const UnitCell& cell, const BoundaryGeometry& g,
                                                 double T, int M, const HeatData& f,
                                                 const SolveOptions& opt = {},
                                                 double crossover = 0.0) {
  if (!inside_cell(g, cell)) throw Error(ErrorCode::invalid_geometry, "boundary is not inside the cell");
  const auto kf = KernelFamily::make_heat(cell, crossover);
  SolveResult res;
  res.representation = Representation::heat_double_layer;
  const auto op = assemble_heat(kf, g, LayerKind::dlayer, T, M, opt.workers);
  const Eigen::Index N = static_cast<Eigen::Index>(g.size());
  const double dt = T / M;
  Eigen::MatrixXd D = op.blocks[0];
  D.diagonal().array() += 0.5;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(D);
  res.condition = 1.0 / lu.rcond();
  Eigen::MatrixXd theta(N, M), rhs(N, M);
  for (int m = 1; m <= M; ++m)
    for (Eigen::Index i = 0; i < N; ++i) rhs(i, m - 1) = f(m * dt, g.nodes[i], g.params[i]);
  double worst = 0.0;
  for (int m = 1; m <= M; ++m) {
    Eigen::VectorXd b = rhs.col(m - 1);
    for (int p = 1; p < m; ++p) b -= op.blocks[m - p] * theta.col(p - 1);
    theta.col(m - 1) = lu.solve(b);
    const double nb = rhs.col(m - 1).norm();
    const double r = (D * theta.col(m - 1) - b).norm();
    worst = std::max(worst, nb > 0.0 ? r / nb : r);
  }
  res.residual = worst;
  res.density = Density::heat(theta, T);
  detail::finish(res, opt);
  return res;
}

/// Value of a solved representation at an exterior point (time t for heat).
inline cplx solution_at(const KernelFamily& kf, const BoundaryGeometry& g, const SolveResult& s,
                        const Vec& x, double t = 0.0) {
  switch (s.representation) {
    case Representation::single_layer: return single_layer_eval(kf, g, s.density, x).value(0);
    case Representation::double_layer_constant:
      return double_layer_eval(kf, g, s.density, x).value(0) + s.constant;
    case Representation::heat_double_layer: return double_layer_eval(kf, g, s.density, x, t).value(0);
  }
  return 0.0;
}

}  // namespace perpot
