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

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "perpot/error.hpp"
#include "perpot/lattice.hpp"
#include "perpot/special.hpp"
#include "perpot/types.hpp"

namespace perpot {

/// Smooth closed parameterised curve t in [0, 2 pi).
class Curve {
 public:
  virtual ~Curve() = default;
  virtual Vec pos(double t) const = 0;
  virtual Vec d1(double t) const = 0;
  virtual Vec d2(double t) const = 0;
  virtual Vec center() const { return Vec::Zero(); }
  virtual std::string name() const = 0;
};

using CurvePtr = std::shared_ptr<const Curve>;

class Circle final : public Curve {
 public:
  Circle(Vec c, double r) : c_(c), r_(r) {}
  Vec pos(double t) const override { return c_ + r_ * make_vec(std::cos(t), std::sin(t)); }
  Vec d1(double t) const override { return r_ * make_vec(-std::sin(t), std::cos(t)); }
  Vec d2(double t) const override { return -r_ * make_vec(std::cos(t), std::sin(t)); }
  Vec center() const override { return c_; }
  std::string name() const override { return "circle"; }
  double radius() const { return r_; }

 private:
  Vec c_;
  double r_;
};

class Ellipse final : public Curve {
 public:
  Ellipse(Vec c, double a, double b) : c_(c), a_(a), b_(b) {}
  Vec pos(double t) const override { return c_ + make_vec(a_ * std::cos(t), b_ * std::sin(t)); }
  Vec d1(double t) const override { return make_vec(-a_ * std::sin(t), b_ * std::cos(t)); }
  Vec d2(double t) const override { return make_vec(-a_ * std::cos(t), -b_ * std::sin(t)); }
  Vec center() const override { return c_; }
  std::string name() const override { return "ellipse"; }

 private:
  Vec c_;
  double a_, b_;
};

/// The classical kite (cos t + 0.65 cos 2t - 0.65, 1.5 sin t), scaled.
class Kite final : public Curve {
 public:
  Kite(Vec c, double s) : c_(c), s_(s) {}
  Vec pos(double t) const override {
    return c_ + s_ * make_vec(std::cos(t) + 0.65 * std::cos(2 * t) - 0.65, 1.5 * std::sin(t));
  }
  Vec d1(double t) const override {
    return s_ * make_vec(-std::sin(t) - 1.3 * std::sin(2 * t), 1.5 * std::cos(t));
  }
  Vec d2(double t) const override {
    return s_ * make_vec(-std::cos(t) - 2.6 * std::cos(2 * t), -1.5 * std::sin(t));
  }
  Vec center() const override { return c_; }
  std::string name() const override { return "kite"; }

 private:
  Vec c_;
  double s_;
};

/// p + eps * base.
class ScaledCurve final : public Curve {
 public:
  ScaledCurve(CurvePtr base, Vec p, double eps) : base_(std::move(base)), p_(p), eps_(eps) {}
  Vec pos(double t) const override { return p_ + eps_ * base_->pos(t); }
  Vec d1(double t) const override { return eps_ * base_->d1(t); }
  Vec d2(double t) const override { return eps_ * base_->d2(t); }
  Vec center() const override { return p_ + eps_ * base_->center(); }
  std::string name() const override { return base_->name(); }

 private:
  CurvePtr base_;
  Vec p_;
  double eps_;
};

/// Vector fields psi_m(t) on a reference curve used as perturbation directions:
/// 0, 1 translations; 2 radial gamma(t) - centre; then for j = 1, 2, ...
/// (cos jt, 0), (sin jt, 0), (0, cos jt), (0, sin jt).
inline int diffeo_basis_size(int fourier_modes) { return 3 + 4 * fourier_modes; }

inline std::array<Vec, 3> diffeo_field(const Curve& ref, int m, double t) {
  if (m < 0) throw Error(ErrorCode::invalid_diffeo, "negative basis index");
  if (m == 0) return {make_vec(1, 0), Vec::Zero(), Vec::Zero()};
  if (m == 1) return {make_vec(0, 1), Vec::Zero(), Vec::Zero()};
  if (m == 2) return {ref.pos(t) - ref.center(), ref.d1(t), ref.d2(t)};
  const int j = (m - 3) / 4 + 1, kind = (m - 3) % 4;
  const double c = std::cos(j * t), s = std::sin(j * t);
  const int comp = kind / 2;
  Vec v = Vec::Zero(), dv = Vec::Zero(), ddv = Vec::Zero();
  if (kind % 2 == 0) {
    v[comp] = c;
    dv[comp] = -j * s;
    ddv[comp] = -j * j * c;
  } else {
    v[comp] = s;
    dv[comp] = j * c;
    ddv[comp] = -j * j * s;
  }
  return {v, dv, ddv};
}

struct DiffeoPerturbation {
  CurvePtr base;
  std::vector<double> coefficients;  // amplitude of psi_m
};

class PerturbedCurve final : public Curve {
 public:
  explicit PerturbedCurve(DiffeoPerturbation d) : d_(std::move(d)) {}
  Vec pos(double t) const override { return d_.base->pos(t) + sum(t, 0); }
  Vec d1(double t) const override { return d_.base->d1(t) + sum(t, 1); }
  Vec d2(double t) const override { return d_.base->d2(t) + sum(t, 2); }
  Vec center() const override { return d_.base->center(); }
  std::string name() const override { return d_.base->name() + "+diffeo"; }

 private:
  Vec sum(double t, int order) const {
    Vec s = Vec::Zero();
    for (std::size_t m = 0; m < d_.coefficients.size(); ++m)
      if (d_.coefficients[m] != 0.0)
        s += d_.coefficients[m] * diffeo_field(*d_.base, static_cast<int>(m), t)[order];
    return s;
  }
  DiffeoPerturbation d_;
};

enum class BoundaryKind { curve2d, sphere3d };

struct BoundaryGeometry {
  BoundaryKind kind = BoundaryKind::curve2d;
  int n = 2;
  std::vector<Vec> nodes;
  std::vector<Vec> normals;
  std::vector<double> weights;
  // curve: parameter t_i, |gamma'(t_i)|, signed curvature w.r.t. the outward normal
  std::vector<double> params, speed, curvature;
  CurvePtr curve;
  // sphere: centre, radius, order L, colatitude / longitude per node
  Vec center = Vec::Zero();
  double radius = 0.0;
  int order = 0;
  std::vector<double> theta, phi;

  std::size_t size() const { return nodes.size(); }

  double measure() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  std::string fingerprint() const {
    std::ostringstream os;
    os.precision(17);
    os << (kind == BoundaryKind::curve2d ? "curve:" : "sphere:") << size();
    if (!nodes.empty()) os << ":" << nodes.front().transpose() << ":" << nodes.back().transpose();
    os << ":" << measure();
    return os.str();
  }
};

struct AdmissibilityThresholds {
  double min_speed_ratio = 1e-2;  // min |gamma'| / mean |gamma'|
  int oversample = 4;             // polygon refinement for the self-intersection test
};

namespace detail {

inline bool segments_cross(const Vec& a, const Vec& b, const Vec& c, const Vec& d) {
  auto orient = [](const Vec& p, const Vec& q, const Vec& r) {
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 &&
         o4 != 0;
}

/// True when the closed polygon through pts has no crossing non-adjacent edges.
inline bool polygon_simple(const std::vector<Vec>& pts) {
  const std::size_t m = pts.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec& a = pts[i];
    const Vec& b = pts[(i + 1) % m];
    for (std::size_t j = i + 2; j < m; ++j) {
      if (i == 0 && j == m - 1) continue;
      if (segments_cross(a, b, pts[j], pts[(j + 1) % m])) return false;
    }
  }
  return true;
}

inline std::vector<Vec> sample_curve(const Curve& c, int m) {
  std::vector<Vec> pts(m);
  for (int i = 0; i < m; ++i) pts[i] = c.pos(2.0 * pi * i / m);
  return pts;
}

inline double min_speed_ratio(const Curve& c, int m) {
  double lo = 1e300, mean = 0.0;
  for (int i = 0; i < m; ++i) {
    const double s = c.d1(2.0 * pi * i / m).head(2).norm();
    lo = std::min(lo, s);
    mean += s / m;
  }
  return lo / mean;
}

}  // namespace detail

/// Trapezoidal discretisation with N uniform parameters.
inline BoundaryGeometry make_curve(CurvePtr shape, int N, bool check = true) {
  if (N < 8 || N % 2 != 0)
    throw Error(ErrorCode::invalid_argument, "curve node count must be even and >= 8");
  if (check) {
    if (detail::min_speed_ratio(*shape, 4 * N) < 1e-8 ||
        !detail::polygon_simple(detail::sample_curve(*shape, 2 * N)))
      throw Error(ErrorCode::invalid_geometry, "curve is not simple");
  }
  BoundaryGeometry g;
  g.kind = BoundaryKind::curve2d;
  g.n = 2;
  g.curve = shape;
  const double h = 2.0 * pi / N;
  double flux = 0.0;
  for (int i = 0; i < N; ++i) {
    const double t = h * i;
    const Vec p = shape->pos(t), d1 = shape->d1(t), d2 = shape->d2(t);
    const double sp = d1.head(2).norm();
    g.params.push_back(t);
    g.nodes.push_back(p);
    g.speed.push_back(sp);
    g.weights.push_back(h * sp);
    g.normals.push_back(make_vec(d1[1] / sp, -d1[0] / sp));
    g.curvature.push_back((d1[0] * d2[1] - d1[1] * d2[0]) / (sp * sp * sp));
    flux += h * sp * (p - shape->center()).dot(g.normals.back());
  }
  if (flux < 0.0) {
    for (auto& v : g.normals) v = -v;
    for (auto& k : g.curvature) k = -k;
  }
  return g;
}

/// L Gauss-Legendre colatitudes times 2L uniform longitudes.
inline BoundaryGeometry make_sphere(const Vec& center, double radius, int L) {
  if (L < 4) throw Error(ErrorCode::invalid_argument, "sphere order must be >= 4");
  if (!(radius > 0.0)) throw Error(ErrorCode::invalid_geometry, "sphere radius must be positive");
  BoundaryGeometry g;
  g.kind = BoundaryKind::sphere3d;
  g.n = 3;
  g.center = center;
  g.radius = radius;
  g.order = L;
  const auto gl = special::gauss_legendre(L);
  const int P = 2 * L;
  for (int i = 0; i < L; ++i) {
    const double ct = gl.x[L - 1 - i];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    const double th = std::acos(ct);
    for (int k = 0; k < P; ++k) {
      const double ph = 2.0 * pi * k / P;
      const Vec nrm(st * std::cos(ph), st * std::sin(ph), ct);
      g.nodes.push_back(center + radius * nrm);
      g.normals.push_back(nrm);
      g.weights.push_back(radius * radius * gl.w[L - 1 - i] * 2.0 * pi / P);
      g.theta.push_back(th);
      g.phi.push_back(ph);
    }
  }
  return g;
}

struct HoleSpec {
  Vec center = Vec::Zero();
  double epsilon = 1.0;
  BoundaryGeometry reference;
};

/// True when the closure of the geometry lies in the open cell.
inline bool inside_cell(const BoundaryGeometry& g, const UnitCell& cell) {
  if (g.kind == BoundaryKind::sphere3d) {
    for (int a = 0; a < 3; ++a)
      if (!(g.center[a] - g.radius > 0.0 && g.center[a] + g.radius < cell.diag[a])) return false;
    return true;
  }
  for (const Vec& p : detail::sample_curve(*g.curve, 8 * static_cast<int>(g.size())))
    if (!cell.contains_open(p)) return false;
  return true;
}

/// p + eps * reference, same resolution.
inline BoundaryGeometry scale_hole(const HoleSpec& h, const UnitCell& cell) {
  if (!(h.epsilon > 0.0)) throw Error(ErrorCode::invalid_geometry, "epsilon must be positive");
  const BoundaryGeometry& ref = h.reference;
  BoundaryGeometry g;
  if (ref.kind == BoundaryKind::sphere3d) {
    g = make_sphere(h.center + h.epsilon * ref.center, h.epsilon * ref.radius, ref.order);
  } else {
    g = make_curve(std::make_shared<ScaledCurve>(ref.curve, h.center, h.epsilon),
                   static_cast<int>(ref.size()), false);
  }
  if (!inside_cell(g, cell)) throw Error(ErrorCode::invalid_geometry, "scaled hole escapes the cell");
  return g;
}

/// Boundary phi(reference) for the perturbation d, discretised with N nodes.
inline BoundaryGeometry apply_diffeo(const DiffeoPerturbation& d, int N, const UnitCell& cell,
                                     const AdmissibilityThresholds& thr = {}) {
  if (!d.base) throw Error(ErrorCode::invalid_diffeo, "missing reference curve");
  auto shape = std::make_shared<PerturbedCurve>(d);
  const int m = thr.oversample * N;
  if (detail::min_speed_ratio(*shape, m) < thr.min_speed_ratio)
    throw Error(ErrorCode::invalid_diffeo, "differential degenerates");
  if (!detail::polygon_simple(detail::sample_curve(*shape, m)))
    throw Error(ErrorCode::invalid_diffeo, "perturbed curve is not injective");
  BoundaryGeometry g = make_curve(shape, N, false);
  if (!inside_cell(g, cell)) throw Error(ErrorCode::out_of_cell, "perturbed curve leaves the cell");
  return g;
}

/// Enclosed area (2D) or volume (sphere) by the divergence theorem on the nodes.
inline double enclosed_measure(const BoundaryGeometry& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.weights[i] * g.nodes[i].dot(g.normals[i]);
  return s / g.n;
}

}  // namespace perpot
