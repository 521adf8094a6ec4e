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

#include "oracles.hpp"
#include "perpot/geometry.hpp"

using namespace perpot;

TEST(Curve, CircleQuadrature) {
  const auto g = make_curve(std::make_shared<Circle>(make_vec(0.5, 0.5), 0.2), 64);
  EXPECT_EQ(g.size(), 64u);
  EXPECT_NEAR(g.measure(), 2.0 * pi * 0.2, 1e-14);
  EXPECT_NEAR(enclosed_measure(g), oracle::polar_area([](double) { return 0.2; }), 1e-14);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR((g.nodes[i] - make_vec(0.5, 0.5)).dot(g.normals[i]), 0.2, 1e-14);
    EXPECT_NEAR(g.curvature[i], 5.0, 1e-12);
  }
}

TEST(Curve, EllipseAreaAgainstOracle) {
  const double a = 0.25, b = 0.18;
  const auto g = make_curve(std::make_shared<Ellipse>(make_vec(0.5, 0.5), a, b), 64);
  const double area = oracle::polar_area([&](double t) {
    return a * b / std::sqrt(std::pow(b * std::cos(t), 2) + std::pow(a * std::sin(t), 2));
  });
  EXPECT_NEAR(enclosed_measure(g), area, 1e-13);
}

TEST(Curve, RejectsBadNodeCounts) {
  const auto c = std::make_shared<Circle>(make_vec(0.5, 0.5), 0.2);
  EXPECT_THROW(make_curve(c, 7), Error);
  EXPECT_THROW(make_curve(c, 33), Error);
  EXPECT_THROW(make_curve(std::make_shared<Ellipse>(make_vec(0.5, 0.5), 0.2, 0.0), 32), Error);
}

TEST(Sphere, Quadrature) {
  const auto g = make_sphere(Vec(1, 1, 1), 0.5, 10);
  EXPECT_EQ(g.size(), 200u);
  EXPECT_NEAR(g.measure(), 4.0 * pi * 0.25, 1e-13);
  EXPECT_NEAR(enclosed_measure(g), 4.0 / 3.0 * pi * 0.125, 1e-13);
  double moment = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) moment += g.weights[i] * std::pow(g.normals[i][2], 4);
  EXPECT_NEAR(moment, 4.0 * pi * 0.25 / 5.0, 1e-13);
  EXPECT_THROW(make_sphere(Vec::Zero(), 1.0, 3), Error);
  EXPECT_THROW(make_sphere(Vec::Zero(), -1.0, 8), Error);
}

TEST(Holes, ScaledHoleMustFitTheCell) {
  const auto cell = make_cell({1.0, 1.0, 1.0});
  HoleSpec h{Vec(0.5, 0.5, 0.5), 0.1, make_sphere(Vec::Zero(), 1.0, 6)};
  const auto g = scale_hole(h, cell);
  EXPECT_NEAR(g.radius, 0.1, 1e-15);
  h.epsilon = 0.6;
  EXPECT_THROW(scale_hole(h, cell), Error);
  h.epsilon = 0.0;
  EXPECT_THROW(scale_hole(h, cell), Error);
}

TEST(Diffeo, TranslationAndAdmissibility) {
  const auto cell = make_cell({1.0, 1.0});
  const CurvePtr ref = std::make_shared<Circle>(make_vec(0.5, 0.5), 0.2);
  DiffeoPerturbation d{ref, {0.1}};
  const auto g = apply_diffeo(d, 32, cell);
  EXPECT_NEAR(enclosed_measure(g), pi * 0.04, 1e-13);
  d.coefficients = {0.4};
  try {
    apply_diffeo(d, 32, cell);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::out_of_cell);
  }
}
