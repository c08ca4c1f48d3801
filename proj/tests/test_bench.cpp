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


#include <gtest/gtest.h>

#include "cag/bench.hpp"

using namespace cag;

TEST(MaxRelativeError, TrivialCases) {
    FieldMatrix t = FieldMatrix::Ones(3, 4);
    EXPECT_EQ(max_relative_error(t, t), 0.0);
    FieldMatrix p = t;
    p(1, 2) = 1.1;
    EXPECT_NEAR(max_relative_error(p, t), 0.1, 1e-15);
    FieldMatrix pos = FieldMatrix::Random(3, 4).cwiseAbs().array() + 0.1;
    EXPECT_DOUBLE_EQ(max_relative_error(2.0 * pos, pos), 1.0);
}

TEST(MaxRelativeError, ErrorsAndSkipping) {
    FieldMatrix t = FieldMatrix::Ones(2, 2);
    EXPECT_THROW(max_relative_error(FieldMatrix::Ones(2, 3), t), DimensionMismatch);
    t(0, 1) = 0.0;
    EXPECT_THROW(max_relative_error(FieldMatrix::Ones(2, 2), t), DivisionByZero);
    auto s = max_relative_error_skipping(FieldMatrix::Ones(2, 2), t);
    EXPECT_EQ(s.skipped, 1u);
    EXPECT_EQ(s.compared, 3u);
    EXPECT_EQ(s.max, 0.0);
}

TEST(MaxRelativeError, InvariantUnderJointScaling) {
    FieldMatrix t = FieldMatrix::Random(4, 5).array() + 2.0;
    FieldMatrix p = t + 0.01 * FieldMatrix::Random(4, 5);
    EXPECT_NEAR(max_relative_error(3.7 * p, 3.7 * t), max_relative_error(p, t), 1e-14);
    EXPECT_NEAR(case_relative_error(3.7 * p, 3.7 * t), case_relative_error(p, t), 1e-14);
}

TEST(CaseRelativeError, EqualsEntrywiseForScalarFields) {
    FieldMatrix t(1, 3), p(1, 3);
    t << 1.0, 2.0, 0.5;
    p << 1.1, 1.9, 0.55;
    EXPECT_DOUBLE_EQ(case_relative_error(p, t), max_relative_error(p, t));
    EXPECT_THROW(case_relative_error(p, FieldMatrix::Zero(1, 3)), DivisionByZero);
}

TEST(Mse, KnownValues) {
    FieldMatrix t = FieldMatrix::Random(200, 1);
    EXPECT_EQ(mse(t, t), 0.0);
    FieldMatrix p = t;
    p(17, 0) += 0.01;
    EXPECT_NEAR(mse(p, t), 0.01 * 0.01 / 200.0, 1e-18);
    EXPECT_NEAR(mse(t.array() + 0.3, t), 0.09, 1e-15);
    EXPECT_THROW(mse(FieldMatrix::Zero(2, 2), FieldMatrix::Zero(2, 1)), DimensionMismatch);
}

TEST(Mse, ZeroIffIdentical) {
    FieldMatrix t = FieldMatrix::Random(3, 3);
    FieldMatrix p = t;
    p(2, 2) = std::nextafter(p(2, 2), 10.0);
    EXPECT_GT(mse(p, t), 0.0);
}

TEST(ErrorReport, SummaryAggregatesPerCaseExactly) {
    PredictionResult pred;
    pred.fields = FieldMatrix::Random(7, 5);
    pred.variance = Eigen::VectorXd::Zero(5);
    pred.clusters = {0, 1, 1, 0, 2};
    FieldMatrix truth = pred.fields + 0.1 * FieldMatrix::Random(7, 5);
    truth.array() += 3.0;
    pred.fields.array() += 3.0;
    std::vector<double> q{0.1, 0.2, 0.3, 0.4, 0.5};
    auto rep = evaluate_prediction(pred, truth, q);
    double weighted = 0.0, worst = 0.0;
    for (const auto& c : rep.per_case) {
        weighted += c.mse * 7.0;
        worst = std::max(worst, c.max_relative_error);
    }
    EXPECT_EQ(rep.mse, weighted / 35.0);
    EXPECT_EQ(rep.max_relative_error, worst);
    EXPECT_NEAR(rep.mse, mse(pred.fields, truth), 1e-15);
    EXPECT_NEAR(rep.max_relative_error, max_relative_error(pred.fields, truth), 1e-15);
}

TEST(TestGrid, CellCentersAvoidGridPoints) {
    TestGrid g{0.0, 2.0, 50};
    auto v = g.values();
    ASSERT_EQ(v.size(), 50u);
    EXPECT_DOUBLE_EQ(v.front(), 0.02);
    EXPECT_DOUBLE_EQ(v.back(), 1.98);
    // No cell center coincides with a point of any uniform training grid sharing the endpoints and spacing.
    for (double x : initial_grid(0.0, 2.0, 51)) {
        for (double y : v) EXPECT_GT(std::abs(x - y), 1e-9);
    }
}

TEST(ChooseBudget, LandsNearTarget) {
    auto s = choose_budget(make_spring_solver(), spring_defaults().sampling, 30);
    EXPECT_LE(s.choice.samples, 33u);
    EXPECT_GE(s.choice.samples, 27u);
    EXPECT_EQ(s.result.dataset.size(), s.choice.samples);
    EXPECT_THROW(choose_budget(make_spring_solver(), spring_defaults().sampling, 0), InvalidParameter);
}

TEST(RunComparison, SameBudgetAndReports) {
    ComparisonConfig cc;
    cc.problem = "spring";
    cc.base = spring_defaults();
    cc.sizes = {16};
    cc.seeds = {0, 1};
    cc.grid = {0.0, 2.0, 50};
    auto rows = run_comparison(make_spring_solver(), cc);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        ASSERT_TRUE(r.cag && r.uniform) << r.error;
        EXPECT_EQ(r.cag->samples, r.uniform->samples);
        EXPECT_EQ(r.cag->per_case.size(), 50u);
        EXPECT_GE(r.cag->offline_seconds, 0.0);
    }
    const auto j = report_to_json(cc, rows, "2026-01-01T00:00:00Z");
    EXPECT_EQ(j.at("rows").size(), 2u);
    EXPECT_EQ(j.at("timestamp"), "2026-01-01T00:00:00Z");
    cc.reproducible = true;
    const auto k = report_to_json(cc, rows, "2026-01-01T00:00:00Z");
    EXPECT_FALSE(k.contains("timestamp"));
    EXPECT_FALSE(k.at("rows")[0].at("cag").contains("online_seconds"));
    const std::string csv = report_to_csv(rows);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(RunComparison, FailedRowsAreRecordedAndSweepContinues) {
    ComparisonConfig cc;
    cc.problem = "spring";
    cc.base = spring_defaults();
    cc.base.sampling.outer_max_iter = 0;
    cc.base.sampling.min_cluster_size = 30;
    cc.sizes = {20};
    cc.grid = {0.0, 2.0, 10};
    auto rows = run_comparison(make_spring_solver(), cc);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_FALSE(rows[0].error.empty());
    EXPECT_FALSE(rows[0].cag.has_value());
}

TEST(RunComparison, ParallelMatchesSequentialWithoutTimings) {
    ComparisonConfig cc;
    cc.problem = "wavelet";
    cc.base = wavelet_defaults();
    cc.sizes = {20, 30};
    cc.grid = {-15.0, 15.0, 100};
    cc.reproducible = true;
    auto seq = run_comparison(make_wavelet_solver(), cc);
    cc.parallel = true;
    auto par = run_comparison(make_wavelet_solver(), cc);
    cc.parallel = false;
    const auto a = report_to_json(cc, seq).at("rows");
    const auto b = report_to_json(cc, par).at("rows");
    EXPECT_EQ(a.dump(), b.dump());
}
