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

#include <gtest/gtest.h>

#include "perpot/solvers.hpp"

using namespace perpot;

TEST(Solve, HelmholtzCircleManufactured) {
  const auto cell = make_cell({1.0, 1.0});
  WaveParams w;
  w.k = 3.0;
  w.eta = make_vec(0.5, 0.0);
  const auto kf = KernelFamily::make_helmholtz(cell, w);
  const auto g = make_curve(std::make_shared<Ellipse>(make_vec(0.5, 0.5), 0.2, 0.15), 96);
  const Vec p0 = make_vec(0.52, 0.47);
  const auto r = solve_helmholtz_dirichlet_exterior(kf, g, [&](const Vec& x, double) { return helmholtz_green(kf, x - p0); });
  ASSERT_TRUE(r.ok) << r.message;
  EXPECT_LT(r.residual, 1e-10);
  for (const Vec& x : {make_vec(0.9, 0.1), make_vec(0.1, 0.6)}) {
    const cplx e = helmholtz_green(kf, x - p0);
    EXPECT_LT(std::abs(solution_at(kf, g, r, x) - e) / std::abs(e), 1e-8);
  }
}

TEST(Solve, HelmholtzResonantRefused) {
  const auto cell = make_cell({1.0, 1.0});
  WaveParams w;
  w.k = 2.0 * pi;
  const auto kf = KernelFamily::make_helmholtz(cell, w);
  const auto g = make_curve(std::make_shared<Circle>(make_vec(0.5, 0.5), 0.2), 32);
  try {
    solve_helmholtz_dirichlet_exterior(kf, g, [](const Vec&, double) { return cplx(1.0); });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::resonant);
  }
}

TEST(Solve, LaplaceConstantDataGivesConstant) {
  const auto cell = make_cell({1.0, 1.2});
  const auto g = make_curve(std::make_shared<Kite>(make_vec(0.5, 0.6), 0.15), 128);
  const auto r = solve_laplace_dirichlet_exterior(cell, g, [](const Vec&, double) { return cplx(2.5); });
  ASSERT_TRUE(r.ok) << r.message;
  const auto kf = KernelFamily::make_laplace(cell);
  EXPECT_NEAR(solution_at(kf, g, r, make_vec(0.05, 0.1)).real(), 2.5, 1e-10);
}

TEST(Solve, LaplaceSphereSourcePair) {
  const auto cell = make_cell({2.0, 2.0, 2.0});
  const auto kf = KernelFamily::make_laplace(cell);
  const auto g = make_sphere(Vec(1, 1, 1), 0.5, 12);
  const Vec a(1.1, 1.0, 0.95), b(0.9, 1.05, 1.0);
  auto u = [&](const Vec& x) { return laplace_green(kf, x - a) - laplace_green(kf, x - b); };
  const auto r = solve_laplace_dirichlet_exterior(cell, g, [&](const Vec& x, double) { return cplx(u(x)); });
  ASSERT_TRUE(r.ok) << r.message;
  const Vec x(0.1, 1.8, 0.3);
  EXPECT_NEAR(solution_at(kf, g, r, x).real(), u(x), 1e-8 * std::abs(u(x)));
}

TEST(Solve, HeatFirstOrderInTime) {
  const auto cell = make_cell({1.0, 1.0});
  const auto g = make_curve(std::make_shared<Circle>(make_vec(0.5, 0.5), 0.2), 32);
  const auto kf = KernelFamily::make_heat(cell);
  const Vec p0 = make_vec(0.52, 0.47);
  const Vec x = make_vec(0.85, 0.5);
  const double T = 0.1;
  std::vector<double> err;
  for (int M : {32, 64}) {
    const auto r = solve_heat_dirichlet_exterior(cell, g, T, M, [&](double t, const Vec& y, double) {
      return heat_green(cell, t, y - p0);
    });
    ASSERT_TRUE(r.ok) << r.message;
    err.push_back(std::abs(solution_at(kf, g, r, x, T).real() - heat_green(cell, T, x - p0)));
  }
  EXPECT_LT(err[1], 2e-2);
  EXPECT_GT(err[0] / err[1], 1.6);
  EXPECT_LT(err[0] / err[1], 2.5);
}
