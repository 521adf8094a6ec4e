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
#include <optional>
#include <string>
#include <vector>

#include "perpot/error.hpp"
#include "perpot/lattice.hpp"
#include "perpot/special.hpp"
#include "perpot/types.hpp"

namespace perpot {

enum class Family { laplace, helmholtz, lame, heat };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::laplace: return "laplace";
    case Family::helmholtz: return "helmholtz";
    case Family::lame: return "lame";
    case Family::heat: return "heat";
  }
  return "?";
}

/// Splitting length a (tau = a^2) and truncation radii for the screened sums.
struct EwaldParams {
  double split = 0.0;
  double real_radius = 0.0;
  double spectral_radius = 0.0;
  double tolerance = 1e-12;

  static double default_split(const UnitCell& cell) {
    return std::pow(cell.volume, 1.0 / cell.n) / std::sqrt(4.0 * pi);
  }

  /// Radii chosen so every neglected term is below exp(-40) times its prefactor.
  static EwaldParams automatic(const UnitCell& cell, cplx k2 = 0.0, double scale = 1.0) {
    EwaldParams p;
    p.split = scale * default_split(cell);
    const double tau = p.split * p.split;
    const double kr = std::max(0.0, k2.real());
    p.real_radius = 2.0 * std::sqrt(tau * (40.0 + kr * tau));
    p.spectral_radius = std::sqrt(40.0 / tau + kr);
    return p;
  }

  double truncation_bound(cplx k2) const {
    const double tau = split * split;
    const double kr = std::max(0.0, k2.real());
    const double real = std::exp(-(real_radius * real_radius / (4.0 * tau) - kr * tau));
    const double spec = std::exp(-(spectral_radius * spectral_radius - k2.real()) * tau);
    return std::max(real, spec);
  }
};

struct LameParams {
  double omega = 1.0;
};

enum class HeatRep { automatic, spatial, spectral };

/// Immutable evaluation context for one periodic kernel family.
class KernelFamily {
 public:
  Family family = Family::laplace;
  UnitCell cell;
  std::optional<WaveParams> wave;
  std::optional<LameParams> lame_params;
  EwaldParams ewald;
  ResonantSet resonant;
  double heat_crossover = 0.0;

  double tau = 0.0;
  std::vector<Vec> images;           // q w, sorted by norm; images[0] = 0
  std::vector<cplx> image_phase;     // exp(-i eta . q w)
  std::vector<IVec> modes;           // z
  std::vector<Vec> xis;              // 2 pi q^{-1} z + eta
  std::vector<cplx> weight;          // screened spectral weight of the value
  std::vector<double> weight_bih;    // biharmonic weight (Lame only)
  std::vector<cplx> jcoef;           // (k^2)^m / m!
  IVec extent = IVec::Zero();        // max |z_a| over modes

  static KernelFamily make_laplace(const UnitCell& cell, std::optional<EwaldParams> ew = {}) {
    KernelFamily kf;
    kf.family = Family::laplace;
    kf.cell = cell;
    kf.build(ew, 0.0);
    return kf;
  }

  static KernelFamily make_helmholtz(const UnitCell& cell, const WaveParams& wave,
                                     std::optional<EwaldParams> ew = {}, double res_tol = -1.0) {
    KernelFamily kf;
    kf.family = Family::helmholtz;
    kf.cell = cell;
    kf.wave = wave;
    kf.resonant = resonant_set(cell, wave, res_tol);
    kf.build(ew, wave.k2());
    return kf;
  }

  static KernelFamily make_lame(const UnitCell& cell, LameParams lp,
                                std::optional<EwaldParams> ew = {}) {
    if (!(lp.omega > 1.0 - 2.0 / cell.n))
      throw Error(ErrorCode::invalid_argument,
                  "omega must exceed 1 - 2/n = " + std::to_string(1.0 - 2.0 / cell.n));
    KernelFamily kf;
    kf.family = Family::lame;
    kf.cell = cell;
    kf.lame_params = lp;
    kf.build(ew, 0.0);
    return kf;
  }

  /// crossover <= 0 selects min(diag)^2 / 4.
  static KernelFamily make_heat(const UnitCell& cell, double crossover = -1.0) {
    KernelFamily kf;
    kf.family = Family::heat;
    kf.cell = cell;
    kf.heat_crossover = crossover > 0.0 ? crossover : 0.25 * cell.min_diag() * cell.min_diag();
    return kf;
  }

  int n() const { return cell.n; }
  cplx k() const { return wave ? wave->k : cplx(0.0); }
  cplx k2() const { return wave ? wave->k2() : cplx(0.0); }
  Vec eta() const { return wave ? wave->eta : Vec(Vec::Zero()); }
  double omega() const { return lame_params ? lame_params->omega : 0.0; }
  /// omega / (omega + 1)
  double lame_c() const { return omega() / (omega() + 1.0); }

 private:
  void build(std::optional<EwaldParams> ew, cplx k2) {
    ewald = ew ? *ew : EwaldParams::automatic(cell, k2);
    if (!(ewald.split > 0.0 && ewald.real_radius > 0.0 && ewald.spectral_radius > 0.0))
      throw Error(ErrorCode::invalid_argument, "Ewald parameters must be positive");
    const double bound = ewald.truncation_bound(k2);
    if (bound > ewald.tolerance)
      throw Error(ErrorCode::accuracy,
                  "truncation radii too small, achievable bound " + std::to_string(bound));
    tau = ewald.split * ewald.split;
    const Vec eta = this->eta();
    const int n = cell.n;

    for (const IVec& w :
         enumerate_lattice(cell, ewald.real_radius + cell.half_diagonal(), LatticeSpace::direct)) {
      const Vec p = cell.lattice_point(w);
      images.push_back(p);
      image_phase.push_back(std::polar(1.0, -eta.head(n).dot(p.head(n))));
    }

    const double vol = cell.volume;
    auto add_mode = [&](const IVec& z, const Vec& xi, cplx wv, double wb) {
      modes.push_back(z);
      xis.push_back(xi);
      weight.push_back(wv);
      weight_bih.push_back(wb);
      for (int a = 0; a < 3; ++a) extent[a] = std::max(extent[a], std::abs(z[a]));
    };
    const double search = ewald.spectral_radius + eta.head(n).norm();
    for (const IVec& z : enumerate_lattice(cell, search, LatticeSpace::reciprocal)) {
      const Vec xi = reciprocal_vector(cell, z, eta);
      const double xi2 = xi.squaredNorm();
      if (family == Family::helmholtz) {
        const cplx delta = xi2 - k2;
        if (resonant.contains(z)) {
          const cplx c = std::abs(delta * tau) < 1e-8
                             ? cplx(tau) * (1.0 - 0.5 * delta * tau)
                             : (1.0 - std::exp(-delta * tau)) / delta;
          add_mode(z, xi, c / vol, 0.0);
        } else if (xi2 <= ewald.spectral_radius * ewald.spectral_radius) {
          add_mode(z, xi, -std::exp(-delta * tau) / (delta * vol), 0.0);
        }
      } else {
        if (z.isZero() || xi2 > ewald.spectral_radius * ewald.spectral_radius) continue;
        const double e = std::exp(-xi2 * tau);
        add_mode(z, xi, -e / (xi2 * vol), e * (tau / xi2 + 1.0 / (xi2 * xi2)) / vol);
      }
    }

    jcoef.push_back(1.0);
    if (family == Family::helmholtz) {
      // Terms of sum_m (k^2)^m/m! I_m shrink like (|k^2| tau)^m / m!.
      cplx c = 1.0;
      double mag = 1.0;
      for (int m = 1; m < 400; ++m) {
        c *= k2 / double(m);
        mag *= std::abs(k2) * tau / m;
        jcoef.push_back(c);
        if (mag < 1e-20 && m > std::abs(k2) * tau) break;
      }
    }
  }
};

namespace detail {

inline void check_off_lattice(const UnitCell& cell, const Vec& xr) {
  if (xr.head(cell.n).norm() <= 1e-12 * cell.min_diag())
    throw Error(ErrorCode::singular_point, "evaluation point on the lattice");
}

/// exp(i 2 pi z . x / q) for every mode, built from per-axis power tables.
inline void mode_phases(const KernelFamily& kf, const Vec& x, std::vector<cplx>& out) {
  const int n = kf.cell.n;
  std::array<std::vector<cplx>, 3> ax;
  for (int a = 0; a < 3; ++a) {
    const int e = kf.extent[a];
    ax[a].assign(2 * e + 1, cplx(1.0));
    if (a >= n) continue;
    const cplx base = std::polar(1.0, 2.0 * pi * x[a] / kf.cell.diag[a]);
    cplx p = 1.0;
    for (int m = 1; m <= e; ++m) {
      p *= base;
      ax[a][e + m] = p;
      ax[a][e - m] = std::conj(p);
    }
  }
  out.resize(kf.modes.size());
  for (std::size_t j = 0; j < kf.modes.size(); ++j) {
    const IVec& z = kf.modes[j];
    out[j] = ax[0][z[0] + kf.extent[0]] * ax[1][z[1] + kf.extent[1]] * ax[2][z[2] + kf.extent[2]];
  }
}

inline bool within(const KernelFamily& kf, double r2) {
  return r2 <= kf.ewald.real_radius * kf.ewald.real_radius;
}

struct ScalarEval {
  cplx value = 0.0;
  CVec grad = CVec::Zero();
};

/// Screened sums for Laplace (real) and Helmholtz at a reduced point.
/// With skip_origin the w = 0 image is left out (its regular limit is added by the caller).
inline ScalarEval scalar_core(const KernelFamily& kf, const Vec& xr, bool skip_origin) {
  const int n = kf.cell.n;
  ScalarEval out;
  std::vector<cplx> ph;
  mode_phases(kf, xr, ph);
  const cplx eph = std::polar(1.0, kf.eta().head(n).dot(xr.head(n)));
  for (std::size_t j = 0; j < ph.size(); ++j) {
    const cplx t = kf.weight[j] * ph[j] * eph;
    out.value += t;
    for (int a = 0; a < n; ++a) out.grad[a] += cplx(0.0, kf.xis[j][a]) * t;
  }
  const int mmax = static_cast<int>(kf.jcoef.size()) - 1;
  std::vector<double> I(mmax + 2);
  for (std::size_t w = skip_origin ? 1 : 0; w < kf.images.size(); ++w) {
    const Vec d = xr + kf.images[w];
    const double r2 = d.head(n).squaredNorm();
    if (!within(kf, r2)) continue;
    special::heat_moments(n, r2, kf.tau, -1, mmax, I.data());
    cplx J = 0.0, Jm1 = 0.0;
    for (int m = 0; m <= mmax; ++m) {
      J += kf.jcoef[m] * I[m + 1];
      Jm1 += kf.jcoef[m] * I[m];
    }
    const cplx ph_w = kf.image_phase[w];
    out.value -= ph_w * J;
    for (int a = 0; a < n; ++a) out.grad[a] += ph_w * 0.5 * d[a] * Jm1;
  }
  if (kf.family != Family::helmholtz) out.value += kf.tau / kf.cell.volume;
  return out;
}

/// Limit of the w = 0 image minus the free-space singular part at d -> 0.
inline cplx scalar_origin_limit(const KernelFamily& kf) {
  const int n = kf.cell.n;
  const double tau = kf.tau;
  cplx c;
  if (n == 2) {
    c = (special::euler_gamma - std::log(4.0 * tau)) / (4.0 * pi);
  } else {
    c = 1.0 / (4.0 * std::pow(pi, 1.5) * std::sqrt(tau)) + cplx(0.0, 1.0) * kf.k() / (4.0 * pi);
  }
  for (std::size_t m = 1; m < kf.jcoef.size(); ++m)
    c -= kf.jcoef[m] * special::heat_moment_origin(n, tau, static_cast<int>(m));
  return c;
}

struct LameEval {
  double s = 0.0;
  Vec grad_s = Vec::Zero();
  Mat hess_h = Mat::Zero();
  std::array<Mat, 3> third_h{Mat::Zero(), Mat::Zero(), Mat::Zero()};
};

inline LameEval lame_core(const KernelFamily& kf, const Vec& xr, bool skip_origin) {
  const int n = kf.cell.n;
  LameEval out;
  std::vector<cplx> ph;
  mode_phases(kf, xr, ph);
  for (std::size_t j = 0; j < ph.size(); ++j) {
    const double c = ph[j].real(), s = ph[j].imag();
    const Vec& xi = kf.xis[j];
    const double ws = kf.weight[j].real(), wh = kf.weight_bih[j];
    out.s += ws * c;
    for (int a = 0; a < n; ++a) {
      out.grad_s[a] -= ws * xi[a] * s;
      for (int b = 0; b < n; ++b) {
        out.hess_h(a, b) -= wh * xi[a] * xi[b] * c;
        for (int l = 0; l < n; ++l) out.third_h[l](a, b) += wh * xi[a] * xi[b] * xi[l] * s;
      }
    }
  }
  double I[3];  // I_{-2}, I_{-1}, I_0
  for (std::size_t w = skip_origin ? 1 : 0; w < kf.images.size(); ++w) {
    const Vec d = xr + kf.images[w];
    const double r2 = d.head(n).squaredNorm();
    if (!within(kf, r2)) continue;
    special::heat_moments(n, r2, kf.tau, -2, 0, I);
    out.s -= I[2];
    for (int a = 0; a < n; ++a) {
      out.grad_s[a] += 0.5 * d[a] * I[1];
      for (int b = 0; b < n; ++b) {
        out.hess_h(a, b) += 0.25 * d[a] * d[b] * I[1] - (a == b ? 0.5 * I[2] : 0.0);
        for (int l = 0; l < n; ++l) {
          double t = -0.125 * d[a] * d[b] * d[l] * I[0];
          if (a == b) t += 0.25 * d[l] * I[1];
          if (a == l) t += 0.25 * d[b] * I[1];
          if (b == l) t += 0.25 * d[a] * I[1];
          out.third_h[l](a, b) += t;
        }
      }
    }
  }
  out.s += kf.tau / kf.cell.volume;
  return out;
}

inline void require(const KernelFamily& kf, Family f) {
  if (kf.family != f && !(f == Family::laplace && kf.family == Family::lame))
    throw Error(ErrorCode::invalid_argument,
                std::string("kernel family mismatch: expected ") + to_string(f));
}

}  // namespace detail

// ---------------------------------------------------------------- Laplace

struct LaplaceValue {
  double value = 0.0;
  Vec grad = Vec::Zero();
};

inline LaplaceValue laplace_green_eval(const KernelFamily& kf, const Vec& x) {
  detail::require(kf, Family::laplace);
  const Vec xr = kf.cell.reduce(x);
  detail::check_off_lattice(kf.cell, xr);
  const auto e = detail::scalar_core(kf, xr, false);
  return {e.value.real(), e.grad.real()};
}

inline double laplace_green(const KernelFamily& kf, const Vec& x) {
  return laplace_green_eval(kf, x).value;
}

inline Vec laplace_green_grad(const KernelFamily& kf, const Vec& x) {
  return laplace_green_eval(kf, x).grad;
}

/// lim_{x->0} [S(x) - free(x)] and the gradient limit.
inline LaplaceValue laplace_regular_at_zero(const KernelFamily& kf) {
  detail::require(kf, Family::laplace);
  const auto e = detail::scalar_core(kf, Vec::Zero(), true);
  return {e.value.real() + detail::scalar_origin_limit(kf).real(), e.grad.real()};
}

/// Free-space part subtracted from S: (1/4pi) log r^2 in 2D, -1/(4 pi r) in 3D.
inline LaplaceValue laplace_free(int n, const Vec& d) {
  const double r2 = d.head(n).squaredNorm();
  if (n == 2) return {std::log(r2) / (4.0 * pi), d / (2.0 * pi * r2)};
  const double r = std::sqrt(r2);
  return {-1.0 / (4.0 * pi * r), d / (4.0 * pi * r2 * r)};
}

// -------------------------------------------------------------- Helmholtz

struct HelmholtzValue {
  cplx value = 0.0;
  CVec grad = CVec::Zero();
};

inline HelmholtzValue helmholtz_green_eval(const KernelFamily& kf, const Vec& x) {
  detail::require(kf, Family::helmholtz);
  IVec shift;
  const Vec xr = kf.cell.reduce(x, &shift);
  detail::check_off_lattice(kf.cell, xr);
  auto e = detail::scalar_core(kf, xr, false);
  const int n = kf.cell.n;
  const cplx ph = std::polar(1.0, kf.eta().head(n).dot(kf.cell.lattice_point(shift).head(n)));
  return {e.value * ph, e.grad * ph};
}

inline cplx helmholtz_green(const KernelFamily& kf, const Vec& x) {
  return helmholtz_green_eval(kf, x).value;
}

inline CVec helmholtz_green_grad(const KernelFamily& kf, const Vec& x) {
  return helmholtz_green_eval(kf, x).grad;
}

inline HelmholtzValue helmholtz_regular_at_zero(const KernelFamily& kf) {
  detail::require(kf, Family::helmholtz);
  auto e = detail::scalar_core(kf, Vec::Zero(), true);
  return {e.value + detail::scalar_origin_limit(kf), e.grad};
}

/// (1/4pi) J0(kr) log r^2 in 2D; -exp(ikr)/(4 pi r) in 3D.
inline HelmholtzValue helmholtz_free(int n, cplx k, const Vec& d) {
  const double r2 = d.head(n).squaredNorm();
  const double r = std::sqrt(r2);
  const CVec dc = d.cast<cplx>();
  if (n == 2) {
    const cplx j0 = special::bessel_j0(k * r), j1 = special::bessel_j1(k * r);
    const double lg = std::log(r2);
    return {j0 * lg / (4.0 * pi), (2.0 * j0 / r2 - k * j1 * lg / r) / (4.0 * pi) * dc};
  }
  const cplx e = std::exp(cplx(0.0, 1.0) * k * r);
  return {-e / (4.0 * pi * r), (1.0 - cplx(0.0, 1.0) * k * r) * e / (4.0 * pi * r2 * r) * dc};
}

// ------------------------------------------------------------------- Lame

/// T(omega, A) = (omega - 1) tr(A) I + A + A^T on the leading n x n block.
inline Mat traction(double omega, const Mat& A, int n = 3) {
  Mat T = Mat::Zero();
  const double tr = A.topLeftCorner(n, n).trace();
  T.topLeftCorner(n, n) = A.topLeftCorner(n, n) + A.topLeftCorner(n, n).transpose();
  for (int i = 0; i < n; ++i) T(i, i) += (omega - 1.0) * tr;
  return T;
}

struct LameValue {
  Mat value = Mat::Zero();
  std::array<Mat, 3> jacobian{Mat::Zero(), Mat::Zero(), Mat::Zero()};  // [l](j,k) = d_l Gamma_jk
};

namespace detail {
inline LameValue lame_assemble(const KernelFamily& kf, const LameEval& e) {
  const int n = kf.cell.n;
  const double c = kf.lame_c();
  LameValue out;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      out.value(j, k) = (j == k ? e.s : 0.0) - c * e.hess_h(j, k);
      for (int l = 0; l < n; ++l)
        out.jacobian[l](j, k) = (j == k ? e.grad_s[l] : 0.0) - c * e.third_h[l](j, k);
    }
  return out;
}
}  // namespace detail

inline LameValue lame_green_eval(const KernelFamily& kf, const Vec& x) {
  detail::require(kf, Family::lame);
  const Vec xr = kf.cell.reduce(x);
  detail::check_off_lattice(kf.cell, xr);
  return detail::lame_assemble(kf, detail::lame_core(kf, xr, false));
}

inline Mat lame_green(const KernelFamily& kf, const Vec& x) { return lame_green_eval(kf, x).value; }

inline std::array<Mat, 3> lame_green_jacobian(const KernelFamily& kf, const Vec& x) {
  return lame_green_eval(kf, x).jacobian;
}

inline LameValue lame_regular_at_zero(const KernelFamily& kf) {
  detail::require(kf, Family::lame);
  auto e = detail::lame_core(kf, Vec::Zero(), true);
  const int n = kf.cell.n;
  const double tau = kf.tau;
  e.s += detail::scalar_origin_limit(kf).real();
  const double h = n == 2 ? (special::euler_gamma + 1.0 - std::log(4.0 * tau)) / (8.0 * pi)
                          : 1.0 / (8.0 * std::pow(pi, 1.5) * std::sqrt(tau));
  for (int a = 0; a < n; ++a) e.hess_h(a, a) += h;
  return detail::lame_assemble(kf, e);
}

/// Free-space Kelvin matrix for Delta + omega grad div, same normalisation.
inline LameValue lame_free(int n, double omega, const Vec& d) {
  const double c = omega / (omega + 1.0);
  const double r2 = d.head(n).squaredNorm();
  LaplaceValue s = laplace_free(n, d);
  Mat hh = Mat::Zero();
  std::array<Mat, 3> th{Mat::Zero(), Mat::Zero(), Mat::Zero()};
  const double r = std::sqrt(r2);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double dab = a == b ? 1.0 : 0.0;
      if (n == 2) {
        hh(a, b) = (dab * std::log(r2) + 2.0 * d[a] * d[b] / r2 - dab) / (8.0 * pi);
      } else {
        hh(a, b) = -(dab / r - d[a] * d[b] / (r2 * r)) / (8.0 * pi);
      }
      for (int l = 0; l < n; ++l) {
        const double dal = a == l ? 1.0 : 0.0, dbl = b == l ? 1.0 : 0.0;
        if (n == 2) {
          th[l](a, b) = (2.0 * dab * d[l] / r2 + 2.0 * (dal * d[b] + dbl * d[a]) / r2 -
                         4.0 * d[a] * d[b] * d[l] / (r2 * r2)) /
                        (8.0 * pi);
        } else {
          const double r3 = r2 * r;
          th[l](a, b) = -(-(dab * d[l] + dal * d[b] + dbl * d[a]) / r3 +
                          3.0 * d[a] * d[b] * d[l] / (r3 * r2)) /
                        (8.0 * pi);
        }
      }
    }
  LameValue out;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      out.value(j, k) = (j == k ? s.value : 0.0) - c * hh(j, k);
      for (int l = 0; l < n; ++l)
        out.jacobian[l](j, k) = (j == k ? s.grad[l] : 0.0) - c * th[l](j, k);
    }
  return out;
}

// ------------------------------------------------------------------- Heat

namespace detail {

inline double heat_crossover_default(const UnitCell& cell) {
  return 0.25 * cell.min_diag() * cell.min_diag();
}

inline IVec image_box(const UnitCell& cell, double radius) {
  IVec hi = IVec::Zero();
  for (int a = 0; a < cell.n; ++a)
    hi[a] = static_cast<int>(std::ceil(radius / cell.diag[a] + 0.5));
  return hi;
}

template <class F>
void for_each_image(const UnitCell& cell, const Vec& xr, double radius, F&& f) {
  const IVec hi = image_box(cell, radius);
  const double r2max = radius * radius;
  for (int i = -hi[0]; i <= hi[0]; ++i)
    for (int j = -hi[1]; j <= hi[1]; ++j)
      for (int k = -hi[2]; k <= hi[2]; ++k) {
        const Vec d = xr + cell.lattice_point(IVec(i, j, k));
        const double r2 = d.head(cell.n).squaredNorm();
        if (r2 <= r2max) f(d, r2);
      }
}

/// Visits z with |xi|^2 <= lambda_max, passing (xi, |xi|^2, cos(xi.x), sin(xi.x)).
template <class F>
void for_each_mode(const UnitCell& cell, const Vec& xr, double lambda_max, F&& f) {
  IVec hi = IVec::Zero();
  for (int a = 0; a < cell.n; ++a)
    hi[a] = static_cast<int>(std::floor(std::sqrt(lambda_max) * cell.diag[a] / (2.0 * pi)));
  std::array<std::vector<cplx>, 3> ax;
  for (int a = 0; a < 3; ++a) {
    ax[a].assign(2 * hi[a] + 1, cplx(1.0));
    if (a >= cell.n) continue;
    const cplx base = std::polar(1.0, 2.0 * pi * xr[a] / cell.diag[a]);
    cplx p = 1.0;
    for (int m = 1; m <= hi[a]; ++m) {
      p *= base;
      ax[a][hi[a] + m] = p;
      ax[a][hi[a] - m] = std::conj(p);
    }
  }
  for (int i = -hi[0]; i <= hi[0]; ++i)
    for (int j = -hi[1]; j <= hi[1]; ++j)
      for (int k = -hi[2]; k <= hi[2]; ++k) {
        const IVec z(i, j, k);
        const Vec xi = reciprocal_vector(cell, z, Vec::Zero());
        const double l2 = xi.squaredNorm();
        if (l2 > lambda_max) continue;
        const cplx e = ax[0][i + hi[0]] * ax[1][j + hi[1]] * ax[2][k + hi[2]];
        f(xi, l2, e.real(), e.imag());
      }
}

inline constexpr double heat_cut = 42.0;

struct HeatEval {
  double value = 0.0;
  Vec grad = Vec::Zero();
};

inline HeatEval heat_spatial(const UnitCell& cell, double t, const Vec& xr) {
  HeatEval out;
  const int n = cell.n;
  const double c = std::pow(4.0 * pi * t, -0.5 * n);
  for_each_image(cell, xr, std::sqrt(4.0 * t * heat_cut), [&](const Vec& d, double r2) {
    const double g = c * std::exp(-r2 / (4.0 * t));
    out.value += g;
    out.grad -= d * (g / (2.0 * t));
  });
  return out;
}

inline HeatEval heat_spectral(const UnitCell& cell, double t, const Vec& xr) {
  HeatEval out;
  const double inv = 1.0 / cell.volume;
  for_each_mode(cell, xr, heat_cut / t, [&](const Vec& xi, double l2, double c, double s) {
    const double e = std::exp(-l2 * t) * inv;
    out.value += e * c;
    out.grad -= xi * (e * s);
  });
  return out;
}

/// int_a^b s^p exp(-lambda s) ds, lambda > 0, 0 < a < b.
inline double exp_moment(double lambda, double a, double b, int p) {
  const double ea = std::exp(-lambda * a), eb = std::exp(-lambda * b);
  double f = -ea * std::expm1(-lambda * (b - a)) / lambda;
  double ap = 1.0, bp = 1.0;
  for (int q = 1; q <= p; ++q) {
    ap *= a;
    bp *= b;
    f = (ap * ea - bp * eb + q * f) / lambda;
  }
  return f;
}

/// int_a^b s^p Phi(s, x) ds through the image sum, 0 <= a < b.
inline HeatEval heat_integrated_spatial(const UnitCell& cell, double a, double b, const Vec& xr,
                                        int p) {
  HeatEval out;
  const int n = cell.n;
  double Ib[8], Ia[8];
  const int lo = -1;
  for_each_image(cell, xr, std::sqrt(4.0 * b * heat_cut), [&](const Vec& d, double r2) {
    if (r2 == 0.0) {
      if (a <= 0.0) throw Error(ErrorCode::singular_point, "time integral from 0 on the lattice");
      const double e = p + 1.0 - 0.5 * n;
      const double cn = special::heat_norm(n);
      out.value += e == 0.0 ? cn * std::log(b / a) : cn * (std::pow(b, e) - std::pow(a, e)) / e;
      return;
    }
    special::heat_moments(n, r2, b, lo, p, Ib);
    double v = Ib[p - lo], g = Ib[p - 1 - lo];
    if (a > 0.0) {
      special::heat_moments(n, r2, a, lo, p, Ia);
      v -= Ia[p - lo];
      g -= Ia[p - 1 - lo];
    }
    out.value += v;
    out.grad -= 0.5 * g * d;
  });
  return out;
}

inline HeatEval heat_integrated_spectral(const UnitCell& cell, double a, double b, const Vec& xr,
                                         int p) {
  HeatEval out;
  const double inv = 1.0 / cell.volume;
  for_each_mode(cell, xr, heat_cut / a, [&](const Vec& xi, double l2, double c, double s) {
    double f;
    if (l2 == 0.0) {
      f = (std::pow(b, p + 1) - std::pow(a, p + 1)) / (p + 1);
    } else {
      f = exp_moment(l2, a, b, p);
    }
    out.value += inv * f * c;
    out.grad -= xi * (inv * f * s);
  });
  return out;
}

inline HeatEval heat_eval(const UnitCell& cell, double t, const Vec& x, HeatRep rep,
                          double crossover) {
  const Vec xr = cell.reduce(x);
  const bool on_lattice = xr.head(cell.n).norm() <= 1e-12 * cell.min_diag();
  if (t <= 0.0) {
    if (on_lattice) throw Error(ErrorCode::singular_point, "heat kernel at t <= 0 on the lattice");
    return {};
  }
  if (crossover <= 0.0) crossover = heat_crossover_default(cell);
  if (rep == HeatRep::automatic) rep = t <= crossover ? HeatRep::spatial : HeatRep::spectral;
  return rep == HeatRep::spatial ? heat_spatial(cell, t, xr) : heat_spectral(cell, t, xr);
}

inline HeatEval heat_integrated(const UnitCell& cell, double t0, double t1, const Vec& x, int p,
                                double crossover) {
  if (!(t0 >= 0.0) || t1 < t0) throw Error(ErrorCode::invalid_argument, "need 0 <= t0 <= t1");
  if (p < 0 || p > 6) throw Error(ErrorCode::invalid_argument, "moment order must be in 0..6");
  if (t1 == t0) return {};
  const Vec xr = cell.reduce(x);
  if (t0 == 0.0 && xr.head(cell.n).norm() <= 1e-12 * cell.min_diag())
    throw Error(ErrorCode::singular_point, "time integral from 0 on the lattice");
  if (crossover <= 0.0) crossover = heat_crossover_default(cell);
  HeatEval out;
  if (t0 < crossover) {
    auto s = heat_integrated_spatial(cell, t0, std::min(t1, crossover), xr, p);
    out.value += s.value;
    out.grad += s.grad;
  }
  if (t1 > crossover) {
    auto s = heat_integrated_spectral(cell, std::max(t0, crossover), t1, xr, p);
    out.value += s.value;
    out.grad += s.grad;
  }
  return out;
}

}  // namespace detail

/// Phi(t, x); zero for t <= 0 away from the lattice.
inline double heat_green(const UnitCell& cell, double t, const Vec& x,
                         HeatRep rep = HeatRep::automatic, double crossover = -1.0) {
  return detail::heat_eval(cell, t, x, rep, crossover).value;
}

inline Vec heat_green_grad(const UnitCell& cell, double t, const Vec& x,
                           HeatRep rep = HeatRep::automatic, double crossover = -1.0) {
  return detail::heat_eval(cell, t, x, rep, crossover).grad;
}

/// int_{t0}^{t1} s^p Phi(s, x) ds.
inline double heat_green_time_integrated(const UnitCell& cell, double t0, double t1, const Vec& x,
                                         int p = 0, double crossover = -1.0) {
  return detail::heat_integrated(cell, t0, t1, x, p, crossover).value;
}

inline Vec heat_green_time_integrated_grad(const UnitCell& cell, double t0, double t1,
                                           const Vec& x, int p = 0, double crossover = -1.0) {
  return detail::heat_integrated(cell, t0, t1, x, p, crossover).grad;
}

}  // namespace perpot
