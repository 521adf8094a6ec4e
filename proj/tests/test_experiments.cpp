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

#include "perpot/experiments.hpp"

using namespace perpot;

TEST(Fit, PolynomialExact) {
  std::vector<double> x{0.1, 0.05, 0.025, 0.0125};
  std::vector<cplx> y;
  for (double e : x) y.push_back(cplx(1.5, -0.5) + 2.0 * e - 3.0 * e * e);
  const auto c = detail::poly_fit(x, y, 2);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_LT(std::abs(c[0] - cplx(1.5, -0.5)), 1e-12);
  EXPECT_LT(std::abs(c[1] - 2.0), 1e-10);
}

TEST(Limit, SphereCapacitance) {
  const auto ref = make_sphere(Vec::Zero(), 1.0, 8);
  const auto lim = limit_density(ref, [](const Vec&, double) { return cplx(1.0); });
  EXPECT_NEAR(lim.integral, -4.0 * pi, 1e-12);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(lim.theta.values[i].real(), -1.0, 1e-12);
  const auto half = make_sphere(Vec::Zero(), 0.5, 8);
  EXPECT_NEAR(limit_density(half, [](const Vec&, double) { return cplx(1.0); }).integral, -2.0 * pi, 1e-12);
}

TEST(Sweep, EpsilonSweepSmallEpsilons) {
  const auto cell = make_cell({1.0, 1.0, 1.0});
  WaveParams w;
  w.k = 1.0;
  const auto kf = KernelFamily::make_helmholtz(cell, w);
  const auto ref = make_sphere(Vec::Zero(), 1.0, 6);
  const auto rep = run_epsilon_sweep(kf, ref, Vec(0.5, 0.5, 0.5), [](const Vec&, double) { return cplx(1.0); },
                                     {0.008, 0.004, 0.002, 0.001}, Vec(0.1, 0.2, 0.15), 2);
  ASSERT_TRUE(rep.fitted);
  EXPECT_LT(rep.relative_gap, 1e-3);
  for (double q : rep.halving_ratios) {
    EXPECT_GT(q, 1.5);
    EXPECT_LT(q, 2.5);
  }
}

TEST(Sweep, ZeroDataGivesZero) {
  const auto cell = make_cell({1.0, 1.0, 1.0});
  WaveParams w;
  w.k = 1.0;
  const auto kf = KernelFamily::make_helmholtz(cell, w);
  const auto rep = run_epsilon_sweep(kf, make_sphere(Vec::Zero(), 1.0, 6), Vec(0.5, 0.5, 0.5),
                                     [](const Vec&, double) { return cplx(0.0); }, {0.01, 0.005, 0.0025},
                                     Vec(0.1, 0.2, 0.15), 1);
  for (const auto& v : rep.probe_values) EXPECT_EQ(std::abs(v), 0.0);
  EXPECT_EQ(std::abs(rep.oracle_a1), 0.0);
}

TEST(Sweep, ShapeGrid) {
  const auto s = shape_grid(0.04);
  ASSERT_EQ(s.size(), 7u);
  EXPECT_DOUBLE_EQ(s.front(), -0.08);
  EXPECT_DOUBLE_EQ(s[3], 0.0);
}

TEST(Sweep, ShapeSweepRejectsBadInput) {
  const CurvePtr ref = std::make_shared<Circle>(make_vec(0.5, 0.5), 0.2);
  HeatData f = [](double t, const Vec&, double) { return t; };
  EXPECT_THROW(run_shape_sweep(make_cell({1.0, 1.0, 1.0}), ref, 0, {0.0}, f, {{0.5, Vec(0.9, 0.5, 0.5)}}), Error);
  ShapeSweepOptions o;
  o.T = 0.2;
  EXPECT_THROW(run_shape_sweep(make_cell({1.0, 1.0}), ref, 0, {0.0}, f, {{0.5, make_vec(0.9, 0.5)}}, o), Error);
}

TEST(Sweep, ShapeSweepSmall) {
  const auto cell = make_cell({1.0, 1.0});
  const CurvePtr ref = std::make_shared<Circle>(make_vec(0.5, 0.5), 0.2);
  HeatData f = [](double t, const Vec& x, double) { return t * (1.0 + 0.5 * std::cos(2.0 * pi * x[0])); };
  ShapeSweepOptions o;
  o.N = 32;
  o.M = 8;
  o.T = 0.1;
  const auto rep = run_shape_sweep(cell, ref, 0, {0.0, 0.0}, f, {{0.1, make_vec(0.85, 0.5)}}, o);
  EXPECT_TRUE(rep.solved[0] && rep.solved[1]);
  EXPECT_EQ(rep.spread, 0.0);
  EXPECT_LT(rep.periodicity_error, 1e-10);
  const auto bad = run_shape_sweep(cell, ref, 0, {0.0, 0.45}, f, {{0.1, make_vec(0.85, 0.5)}}, o);
  EXPECT_TRUE(bad.solved[0]);
  EXPECT_FALSE(bad.solved[1]);
  EXPECT_FALSE(bad.failures[1].empty());
}
