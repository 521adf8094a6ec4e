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

#include <Eigen/Dense>

#include <complex>
#include <numbers>

namespace perpot {

using cplx = std::complex<double>;

// Points are stored in 3-vectors; two-dimensional problems keep the third
// component at zero so that norms and dot products need no special casing.
using Vec = Eigen::Vector3d;
using CVec = Eigen::Vector3cd;
using Mat = Eigen::Matrix3d;
using IVec = Eigen::Vector3i;

inline constexpr double pi = std::numbers::pi;

inline Vec make_vec(double x, double y, double z = 0.0) { return Vec(x, y, z); }

}  // namespace perpot
