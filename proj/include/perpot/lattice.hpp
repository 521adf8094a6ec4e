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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "perpot/error.hpp"
#include "perpot/types.hpp"

namespace perpot {

/// Periodicity cell Q = ]0,q_11[ x ... x ]0,q_nn[ with diagonal q.
struct UnitCell {
  int n = 3;
  Vec diag = Vec::Ones();
  double volume = 1.0;

  double min_diag() const { return diag.head(n).minCoeff(); }
  double max_diag() const { return diag.head(n).maxCoeff(); }
  double half_diagonal() const { return 0.5 * diag.head(n).norm(); }

  /// Splits x = r + q w with r in the centred cell [-q/2, q/2].
  Vec reduce(const Vec& x, IVec* shift = nullptr) const {
    Vec r = Vec::Zero();
    IVec w = IVec::Zero();
    for (int a = 0; a < n; ++a) {
      const double m = std::nearbyint(x[a] / diag[a]);
      w[a] = static_cast<int>(m);
      r[a] = x[a] - m * diag[a];
    }
    if (shift) *shift = w;
    return r;
  }

  Vec lattice_point(const IVec& w) const {
    Vec v = Vec::Zero();
    for (int a = 0; a < n; ++a) v[a] = diag[a] * w[a];
    return v;
  }

  bool contains_open(const Vec& x, double margin = 0.0) const {
    for (int a = 0; a < n; ++a)
      if (!(x[a] > margin && x[a] < diag[a] - margin)) return false;
    return true;
  }
};

struct WaveParams {
  cplx k{1.0, 0.0};
  Vec eta = Vec::Zero();

  cplx k2() const { return k * k; }
};

struct ResonantSet {
  std::vector<IVec> members;
  // Set when k^2 is not (numerically) real: no member can exist.
  bool warning = false;

  bool empty() const { return members.empty(); }
  std::size_t size() const { return members.size(); }
  bool contains(const IVec& z) const {
    return std::find(members.begin(), members.end(), z) != members.end();
  }
};

enum class LatticeSpace { direct, reciprocal };

inline UnitCell make_cell(const std::vector<double>& diag) {
  if (diag.size() != 2 && diag.size() != 3)
    throw Error(ErrorCode::unsupported_dimension,
                "cell dimension must be 2 or 3, got " + std::to_string(diag.size()));
  UnitCell c;
  c.n = static_cast<int>(diag.size());
  c.diag = Vec::Zero();
  c.volume = 1.0;
  for (int a = 0; a < c.n; ++a) {
    if (!(diag[a] > 0.0) || !std::isfinite(diag[a]))
      throw Error(ErrorCode::invalid_cell, "cell entries must be positive and finite");
    c.diag[a] = diag[a];
    c.volume *= diag[a];
  }
  return c;
}

/// 2 pi q^{-1} z + eta.
inline Vec reciprocal_vector(const UnitCell& cell, const IVec& z, const Vec& eta) {
  Vec xi = Vec::Zero();
  for (int a = 0; a < cell.n; ++a) xi[a] = 2.0 * pi * z[a] / cell.diag[a] + eta[a];
  return xi;
}

namespace detail {

inline double lattice_norm2(const UnitCell& cell, const IVec& z, LatticeSpace space) {
  double s = 0.0;
  for (int a = 0; a < cell.n; ++a) {
    const double v = space == LatticeSpace::direct ? cell.diag[a] * z[a]
                                                   : 2.0 * pi * z[a] / cell.diag[a];
    s += v * v;
  }
  return s;
}

inline bool lex_less(const IVec& a, const IVec& b) {
  for (int i = 0; i < 3; ++i)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

}  // namespace detail

/// All integer vectors with |qz| <= radius (direct) or |2 pi q^{-1} z| <= radius
/// (reciprocal), sorted by norm and then lexicographically.
inline std::vector<IVec> enumerate_lattice(const UnitCell& cell, double radius,
                                           LatticeSpace space) {
  if (!(radius > 0.0)) throw Error(ErrorCode::invalid_argument, "radius must be positive");
  IVec hi = IVec::Zero();
  for (int a = 0; a < cell.n; ++a) {
    const double step = space == LatticeSpace::direct ? cell.diag[a] : 2.0 * pi / cell.diag[a];
    hi[a] = static_cast<int>(std::floor(radius / step * (1.0 + 1e-14)));
  }
  const double r2 = radius * radius * (1.0 + 1e-13);
  std::vector<std::pair<double, IVec>> found;
  for (int i = -hi[0]; i <= hi[0]; ++i)
    for (int j = -hi[1]; j <= hi[1]; ++j)
      for (int k = -hi[2]; k <= hi[2]; ++k) {
        const IVec z(i, j, k);
        const double s = detail::lattice_norm2(cell, z, space);
        if (s <= r2) found.emplace_back(s, z);
      }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return detail::lex_less(a.second, b.second);
  });
  std::vector<IVec> out;
  out.reserve(found.size());
  for (auto& f : found) out.push_back(f.second);
  return out;
}

inline double default_resonance_tol(const WaveParams& wave) {
  return 1e-10 * std::max(1.0, std::abs(wave.k2()));
}

/// Z = { z : |k^2 - |2 pi q^{-1} z + eta|^2| <= tol }. A negative tol selects the default.
inline ResonantSet resonant_set(const UnitCell& cell, const WaveParams& wave, double tol = -1.0) {
  if (tol < 0.0) tol = default_resonance_tol(wave);
  ResonantSet out;
  const cplx k2 = wave.k2();
  if (std::abs(k2.imag()) > tol) {
    out.warning = true;
    return out;
  }
  const double top = k2.real() + tol;
  if (top < 0.0) return out;
  // |xi| <= sqrt(top) and |2 pi q^{-1} z| <= |xi| + |eta|.
  const double radius = std::sqrt(top) + wave.eta.head(cell.n).norm() + 1e-9;
  for (const IVec& z : enumerate_lattice(cell, radius, LatticeSpace::reciprocal)) {
    const double xi2 = reciprocal_vector(cell, z, wave.eta).squaredNorm();
    if (std::abs(k2 - xi2) <= tol) out.members.push_back(z);
  }
  return out;
}

}  // namespace perpot
