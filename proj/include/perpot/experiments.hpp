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

#include <optional>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "perpot/solvers.hpp"

namespace perpot {

// ------------------------------------------------------------ limit density

struct LimitDensity {
  Density theta;
  double integral = 0.0;  // int theta dsigma
};

/// Solves S[theta] = g on a sphere with the free kernel -1/(4 pi |t - s|).
inline LimitDensity limit_density(const BoundaryGeometry& reference, const BoundaryData& g) {
  if (reference.kind != BoundaryKind::sphere3d)
    throw Error(ErrorCode::unsupported, "limit density is implemented for spheres");
  const auto lam = detail::funk_hecke(
      [](const Vec& d, const Vec&, const Vec&) { return cplx(-1.0 / (4.0 * pi * d.norm())); },
      reference.radius, reference.order);
  SolveResult res;
  detail::sphere_galerkin(reference, lam, nullptr, detail::sample_data(reference, g), res);
  LimitDensity out;
  out.theta = res.density;
  for (std::size_t j = 0; j < reference.size(); ++j)
    out.integral += reference.weights[j] * res.density.values[j].real();
  return out;
}

/// G^k(xbar - p) * int theta.
inline cplx leading_coefficient(const LimitDensity& limit, const KernelFamily& kf, const Vec& p,
                                const Vec& xbar) {
  if (kf.family != Family::helmholtz) throw Error(ErrorCode::invalid_argument, "Helmholtz family expected");
  if (!kf.resonant.empty()) throw Error(ErrorCode::resonant, "resonant wave number refused");
  if (limit.integral == 0.0) return 0.0;
  return helmholtz_green(kf, xbar - p) * limit.integral;
}

// ------------------------------------------------------------ epsilon sweep

struct AsymptoticReport {
  std::vector<double> epsilons;
  std::vector<cplx> probe_values;
  std::vector<cplx> scaled;
  std::vector<bool> solved;
  std::vector<std::string> failures;
  std::vector<double> conditions;
  std::vector<cplx> fit;                 // scaled ~ fit[0] + fit[1] eps + ...
  std::vector<cplx> fit_without_smallest;
  cplx oracle_a1 = 0.0;
  double relative_gap = 0.0;
  std::vector<double> errors;            // |scaled - oracle_a1|
  std::vector<double> halving_ratios;    // errors[i] / errors[i + 1]
  bool fitted = false;
};

namespace detail {

inline std::vector<cplx> poly_fit(const std::vector<double>& x, const std::vector<cplx>& y, int degree) {
  const Eigen::Index m = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXcd V(m, degree + 1);
  Eigen::VectorXcd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double p = 1.0;
    for (int d = 0; d <= degree; ++d, p *= x[i]) V(i, d) = p;
    b[i] = y[i];
  }
  const Eigen::VectorXcd c = V.colPivHouseholderQr().solve(b);
  return std::vector<cplx>(c.data(), c.data() + c.size());
}

}  // namespace detail

/// Solves the exterior Helmholtz problem around p + eps * reference with data
/// g((x - p) / eps) for each eps and fits u_eps(xbar) / eps against eps.
inline AsymptoticReport run_epsilon_sweep(const KernelFamily& kf, const BoundaryGeometry& reference,
                                          const Vec& p, const BoundaryData& g,
                                          const std::vector<double>& epsilons, const Vec& xbar,
                                          int fit_degree, unsigned workers = 1) {
  if (reference.kind != BoundaryKind::sphere3d)
    throw Error(ErrorCode::unsupported, "the epsilon sweep uses a spherical reference hole");
  if (fit_degree < 0 || fit_degree > 3) throw Error(ErrorCode::invalid_argument, "fit degree must be in 0..3");
  for (std::size_t i = 0; i + 1 < epsilons.size(); ++i)
    if (!(epsilons[i + 1] < epsilons[i])) throw Error(ErrorCode::invalid_argument, "epsilons must decrease");
  AsymptoticReport rep;
  rep.epsilons = epsilons;
  const std::size_t E = epsilons.size();
  rep.probe_values.assign(E, 0.0);
  rep.scaled.assign(E, 0.0);
  rep.solved.assign(E, false);
  rep.failures.assign(E, "");
  rep.conditions.assign(E, 0.0);
  parallel_for(E, workers, [&](std::size_t e) {
    const double eps = epsilons[e];
    try {
      const BoundaryGeometry hole = scale_hole(HoleSpec{p, eps, reference}, kf.cell);
      if ((xbar - hole.center).norm() <= hole.radius)
        throw Error(ErrorCode::invalid_geometry, "probe lies inside the hole");
      const auto res = solve_helmholtz_dirichlet_exterior(
          kf, hole, [&](const Vec& x, double t) { return g((x - p) / eps, t); });
      rep.conditions[e] = res.condition;
      if (!res.ok) throw Error(ErrorCode::solve_failed, res.message);
      rep.probe_values[e] = solution_at(kf, hole, res, xbar);
      rep.scaled[e] = rep.probe_values[e] / eps;
      rep.solved[e] = true;
    } catch (const std::exception& ex) {
      rep.failures[e] = ex.what();
    }
  });
  const auto limit = limit_density(reference, g);
  rep.oracle_a1 = leading_coefficient(limit, kf, p, xbar);
  std::vector<double> xs;
  std::vector<cplx> ys;
  for (std::size_t e = 0; e < E; ++e)
    if (rep.solved[e]) {
      xs.push_back(epsilons[e]);
      ys.push_back(rep.scaled[e]);
    }
  if (static_cast<int>(xs.size()) >= fit_degree + 2) {
    rep.fit = detail::poly_fit(xs, ys, fit_degree);
    rep.fitted = true;
    rep.relative_gap = std::abs(rep.oracle_a1) > 0.0
                           ? std::abs(rep.fit[0] - rep.oracle_a1) / std::abs(rep.oracle_a1)
                           : std::abs(rep.fit[0]);
    if (static_cast<int>(xs.size()) >= fit_degree + 3) {
      xs.pop_back();
      ys.pop_back();
      rep.fit_without_smallest = detail::poly_fit(xs, ys, fit_degree);
    }
  }
  for (std::size_t e = 0; e < E; ++e) rep.errors.push_back(std::abs(rep.scaled[e] - rep.oracle_a1));
  for (std::size_t e = 0; e + 1 < E; ++e)
    rep.halving_ratios.push_back(rep.errors[e + 1] > 0.0 ? rep.errors[e] / rep.errors[e + 1] : 0.0);
  return rep;
}

// -------------------------------------------------------------- shape sweep

struct Probe {
  double t = 0.0;
  Vec x = Vec::Zero();
};

struct ShapeSweepReport {
  std::vector<double> s;
  std::vector<std::vector<double>> values;  // [s][probe]
  std::vector<bool> solved;
  std::vector<std::string> failures;
  double step = 0.0;                        // H; derivatives at H and H/2
  // [order - 1][probe]
  std::vector<std::vector<double>> derivative_coarse, derivative_fine, stability_ratio;
  double periodicity_error = 0.0;
  double spread = 0.0;                      // max - min of probe values over s
};

struct ShapeSweepOptions {
  int N = 128;
  double T = 1.0;
  int M = 64;
  double crossover = 0.0;
  unsigned workers = 1;
  AdmissibilityThresholds thresholds;
};

namespace detail {

inline bool inside_curve(const Curve& c, const Vec& x, int m = 2048) {
  const auto pts = sample_curve(c, m);
  bool in = false;
  for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
    if ((pts[i][1] > x[1]) != (pts[j][1] > x[1]) &&
        x[0] < (pts[j][0] - pts[i][0]) * (x[1] - pts[i][1]) / (pts[j][1] - pts[i][1]) + pts[i][0])
      in = !in;
  }
  return in;
}

inline std::optional<std::size_t> find_s(const std::vector<double>& s, double v) {
  for (std::size_t i = 0; i < s.size(); ++i)
    if (std::abs(s[i] - v) <= 1e-12 * std::max(1.0, std::abs(v))) return i;
  return std::nullopt;
}

}  // namespace detail

/// Heat exterior problem on phi_s(reference) with phi_s = id + s psi_m for
/// each s; probe values and central differences in s at steps H and H/2,
/// H = max |s| / 2 (needs 0, +-H/2, +-H, +-2H in the grid).
inline ShapeSweepReport run_shape_sweep(const UnitCell& cell, const CurvePtr& reference, int m,
                                        const std::vector<double>& s_grid, const HeatData& f,
                                        const std::vector<Probe>& probes,
                                        const ShapeSweepOptions& opt = {}) {
  if (cell.n != 2) throw Error(ErrorCode::unsupported, "shape sweeps run in two dimensions");
  for (const auto& pr : probes)
    if (!(pr.t > 0.0) || pr.t > opt.T * (1.0 + 1e-12))
      throw Error(ErrorCode::invalid_argument, "probe time must lie in (0, T]");
  ShapeSweepReport rep;
  rep.s = s_grid;
  const std::size_t S = s_grid.size(), P = probes.size();
  rep.values.assign(S, std::vector<double>(P, 0.0));
  rep.solved.assign(S, false);
  rep.failures.assign(S, "");
  std::vector<double> period(S, 0.0);
  parallel_for(S, opt.workers, [&](std::size_t i) {
    try {
      DiffeoPerturbation d{reference, std::vector<double>(m + 1, 0.0)};
      d.coefficients[m] = s_grid[i];
      const BoundaryGeometry g = apply_diffeo(d, opt.N, cell, opt.thresholds);
      for (const auto& pr : probes)
        if (detail::inside_curve(*g.curve, pr.x))
          throw Error(ErrorCode::invalid_geometry, "probe lies inside the perturbed hole");
      const auto res = solve_heat_dirichlet_exterior(cell, g, opt.T, opt.M, f, {}, opt.crossover);
      if (!res.ok) throw Error(ErrorCode::solve_failed, res.message);
      const auto kf = KernelFamily::make_heat(cell, opt.crossover);
      for (std::size_t q = 0; q < P; ++q) {
        rep.values[i][q] = solution_at(kf, g, res, probes[q].x, probes[q].t).real();
        for (int a = 0; a < 2; ++a) {
          Vec shift = Vec::Zero();
          shift[a] = cell.diag[a];
          const double v = solution_at(kf, g, res, probes[q].x + shift, probes[q].t).real();
          period[i] = std::max(period[i], std::abs(v - rep.values[i][q]) /
                                              std::max(1.0, std::abs(rep.values[i][q])));
        }
      }
      rep.solved[i] = true;
    } catch (const std::exception& ex) {
      rep.failures[i] = ex.what();
    }
  });
  for (double e : period) rep.periodicity_error = std::max(rep.periodicity_error, e);
  for (std::size_t q = 0; q < P; ++q) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < S; ++i) {
      if (!rep.solved[i]) continue;
      lo = first ? rep.values[i][q] : std::min(lo, rep.values[i][q]);
      hi = first ? rep.values[i][q] : std::max(hi, rep.values[i][q]);
      first = false;
    }
    rep.spread = std::max(rep.spread, hi - lo);
  }
  double H = 0.0;
  for (double v : s_grid) H = std::max(H, std::abs(v));
  H *= 0.5;
  if (H <= 0.0) return rep;
  auto at = [&](double v, std::size_t q) -> std::optional<double> {
    const auto i = detail::find_s(s_grid, v);
    if (!i || !rep.solved[*i]) return std::nullopt;
    return rep.values[*i][q];
  };
  auto differences = [&](double h, std::size_t q) -> std::optional<std::array<double, 3>> {
    const auto f0 = at(0.0, q), fp = at(h, q), fm = at(-h, q), fpp = at(2 * h, q), fmm = at(-2 * h, q);
    if (!f0 || !fp || !fm || !fpp || !fmm) return std::nullopt;
    return std::array<double, 3>{(*fp - *fm) / (2 * h), (*fp - 2 * *f0 + *fm) / (h * h),
                                 (*fpp - 2 * *fp + 2 * *fm - *fmm) / (2 * h * h * h)};
  };
  rep.step = H;
  rep.derivative_coarse.assign(3, std::vector<double>(P, 0.0));
  rep.derivative_fine.assign(3, std::vector<double>(P, 0.0));
  rep.stability_ratio.assign(3, std::vector<double>(P, 0.0));
  for (std::size_t q = 0; q < P; ++q) {
    const auto c = differences(H, q), fn = differences(0.5 * H, q);
    if (!c || !fn) {
      rep.step = 0.0;
      break;
    }
    for (int o = 0; o < 3; ++o) {
      rep.derivative_coarse[o][q] = (*c)[o];
      rep.derivative_fine[o][q] = (*fn)[o];
      rep.stability_ratio[o][q] = (*c)[o] != 0.0 ? (*fn)[o] / (*c)[o] : 0.0;
    }
  }
  if (rep.step == 0.0) {
    rep.derivative_coarse.clear();
    rep.derivative_fine.clear();
    rep.stability_ratio.clear();
  }
  return rep;
}

/// The grid 0, +-H/2, +-H, +-2H used for the derivative diagnostics.
inline std::vector<double> shape_grid(double H) {
  return {-2 * H, -H, -0.5 * H, 0.0, 0.5 * H, H, 2 * H};
}

}  // namespace perpot
