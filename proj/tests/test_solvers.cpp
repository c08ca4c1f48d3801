// Copyright 2026 The CAG Surrogate Authors
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


#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "cag/solvers.hpp"

using namespace cag;

TEST(Wavelet, KnownValues) {
    EXPECT_DOUBLE_EQ(wavelet_solve(0.0), 1.0);
    EXPECT_NEAR(wavelet_solve(15.0), 1.0, 1e-40);
    // sin(pi/2) = 1, envelope exp(-pi^2/288).
    EXPECT_NEAR(wavelet_solve(std::numbers::pi / 12.0), 1.0 + std::exp(-std::numbers::pi * std::numbers::pi / 288.0),
                1e-15);
}

TEST(Wavelet, PointSymmetryAboutOne) {
    for (double t = -15.0; t <= 15.0; t += 0.137) EXPECT_NEAR(wavelet_solve(t) + wavelet_solve(-t), 2.0, 1e-12);
}

TEST(Spring, UndampedIsCosine) {
    SpringConfig cfg;
    const PhysicalField d = spring_solve(0.0, cfg);
    ASSERT_EQ(d.size(), cfg.time_samples);
    const double wn = std::sqrt(cfg.stiffness / cfg.mass);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        const double t = cfg.horizon * static_cast<double>(i) / static_cast<double>(cfg.time_samples - 1);
        EXPECT_NEAR(d[i], cfg.initial_displacement * std::cos(wn * t), 1e-14);
    }
}

TEST(Spring, TimeGridIncludesBothEndpoints) {
    SpringConfig cfg;
    cfg.time_samples = 3;
    const PhysicalField d = spring_solve(1.0, cfg);
    const double wn = std::sqrt(cfg.stiffness / cfg.mass);
    EXPECT_DOUBLE_EQ(d[0], cfg.initial_displacement);
    EXPECT_NEAR(d[2], cfg.initial_displacement * (1.0 + wn) * std::exp(-wn), 1e-16);
}

TEST(Spring, CriticalIsContinuousFromBothSides) {
    SpringConfig cfg;
    const PhysicalField crit = spring_solve(1.0, cfg);
    EXPECT_LE((spring_solve(1.0 - 1e-8, cfg) - crit).cwiseAbs().maxCoeff(), 1e-5 * cfg.initial_displacement);
    EXPECT_LE((spring_solve(1.0 + 1e-8, cfg) - crit).cwiseAbs().maxCoeff(), 1e-5 * cfg.initial_displacement);
}

TEST(Spring, BranchesMatchClosedForms) {
    SpringConfig cfg;
    const double wn = std::sqrt(cfg.stiffness / cfg.mass);
    const double d0 = cfg.initial_displacement;
    const double t = 0.3;
    {
        const double z = 0.2, wd = wn * std::sqrt(1 - z * z);
        const double expect = std::exp(-z * wn * t) * (d0 * std::cos(wd * t) + z * wn * d0 / wd * std::sin(wd * t));
        EXPECT_NEAR(spring_displacement(z, t, cfg), expect, 1e-15);
    }
    {
        const double z = 1.7, s = std::sqrt(z * z - 1);
        const double r1 = -(z - s) * wn, r2 = -(z + s) * wn;
        // d(0) = d0 and d'(0) = 0 fix the two coefficients.
        const double c1 = -r2 * d0 / (r1 - r2), c2 = r1 * d0 / (r1 - r2);
        EXPECT_NEAR(spring_displacement(z, t, cfg), c1 * std::exp(r1 * t) + c2 * std::exp(r2 * t), 1e-15);
    }
}

TEST(Spring, EnergyDecays) {
    SpringConfig cfg;
    for (double z : {0.01, 0.3, 1.0, 1.5, 2.0}) {
        EXPECT_LT(std::abs(spring_solve(z, cfg)[cfg.time_samples - 1]), cfg.initial_displacement) << z;
    }
}

TEST(Spring, RejectsBadInput) {
    EXPECT_THROW(spring_solve(-0.1), InvalidParameter);
    SpringConfig bad;
    bad.mass = 0.0;
    EXPECT_THROW(make_spring_solver(bad), InvalidParameter);
    bad = {};
    bad.time_samples = 1;
    EXPECT_THROW(make_spring_solver(bad), InvalidParameter);
}

TEST(LabelSamples, ShapesAndEmptyInput) {
    auto w = label_samples(make_wavelet_solver(), {0.0});
    EXPECT_EQ(w.size(), 1u);
    EXPECT_DOUBLE_EQ(w.fields()(0, 0), 1.0);
    auto s = label_samples(make_spring_solver(), {0.5, 0.1});
    EXPECT_EQ(s.field_size(), 200);
    EXPECT_EQ(s.size(), 2u);
    EXPECT_EQ(label_samples(make_wavelet_solver(), {}).size(), 0u);
}
