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


#include <algorithm>
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "cag/bench.hpp"
#include "cag/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cag;

namespace {

const TrainedModel& spring_model() {
    static const TrainedModel m = offline_train(make_spring_solver(), spring_defaults());
    return m;
}

} // namespace

TEST(OfflineTrain, ProducesOneRegressorPerCluster) {
    const auto& m = spring_model();
    EXPECT_EQ(m.clusters(), 3u);
    EXPECT_EQ(m.field_size, 200);
    std::size_t total = 0;
    for (auto s : m.cluster_sizes()) {
        EXPECT_GE(s, 4u);
        total += s;
    }
    EXPECT_EQ(total, m.samples());
    for (const auto& t : m.training) EXPECT_LE(t.objective, t.initial_objective);
}

TEST(OfflineTrain, RejectsUndersizedLabeledClusters) {
    FieldMatrix y = FieldMatrix::Random(2, 5);
    ClusteredDataset cd(LabeledDataset({0, 1, 2, 3, 4}, y), {0, 0, 0, 1, 1}, 2);
    CagConfig cfg;
    cfg.sampling.min_cluster_size = 3;
    EXPECT_THROW(offline_train(cd, cfg), ConvergenceFailure);
    cfg.sampling.min_cluster_size = 2;
    EXPECT_NO_THROW(offline_train(cd, cfg));
}

TEST(OnlinePredict, RoutesAndReturnsQueryOrder) {
    const auto& m = spring_model();
    const std::vector<double> q{1.5, 0.01, 0.3};
    auto p = online_predict(m, q);
    ASSERT_EQ(p.size(), 3u);
    EXPECT_EQ(p.fields.rows(), 200);
    const auto truth = label_samples(make_spring_solver(), q);
    // label_samples sorts; map back by value.
    for (std::size_t j = 0; j < q.size(); ++j) {
        auto it = std::find(truth.inputs().begin(), truth.inputs().end(), q[j]);
        const auto col = static_cast<Eigen::Index>(it - truth.inputs().begin());
        const double scale = truth.fields().col(col).cwiseAbs().maxCoeff();
        EXPECT_LT((p.fields.col(static_cast<Eigen::Index>(j)) - truth.fields().col(col)).cwiseAbs().maxCoeff(),
                  0.5 * scale);
        EXPECT_EQ(p.clusters[j], knn_classify(m.classifier, q[j]));
    }
}

TEST(OnlinePredict, EmptyQueries) {
    auto p = online_predict(spring_model(), std::vector<double>{});
    EXPECT_EQ(p.size(), 0u);
    EXPECT_EQ(p.fields.cols(), 0);
}

TEST(OnlinePredict, ReproducesTrainingFieldsAwayFromBoundaries) {
    const auto& m = spring_model();
    const auto& xs = m.classifier.inputs;
    const auto& labels = m.classifier.labels;
    const auto truth = label_samples(make_spring_solver(), xs);
    auto p = online_predict(m, xs);
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        if (p.clusters[j] != labels[j]) {
            // Only samples adjacent to another cluster may be routed away from their own label.
            const bool boundary = (j > 0 && labels[j - 1] != labels[j]) || (j + 1 < xs.size() && labels[j + 1] != labels[j]);
            EXPECT_TRUE(boundary) << "chi " << xs[j];
            continue;
        }
        const double scale = truth.fields().col(c).cwiseAbs().maxCoeff();
        EXPECT_LT((p.fields.col(c) - truth.fields().col(c)).cwiseAbs().maxCoeff(), 1e-2 * scale) << "chi " << xs[j];
    }
}

TEST(FieldVariance, NonNegativeAndShaped) {
    const auto& m = spring_model();
    auto p = online_predict(m, std::vector<double>{0.2, 1.0});
    auto v = field_variance(m, p);
    EXPECT_EQ(v.rows(), 200);
    EXPECT_EQ(v.cols(), 2);
    EXPECT_GE(v.minCoeff(), 0.0);
}

TEST(ModelFile, RoundTripGivesIdenticalPredictions) {
    const auto& m = spring_model();
    const auto path = fs::temp_directory_path() / "cag_test_model.json";
    save_model(m, path);
    const TrainedModel back = load_model(path);
    fs::remove(path);
    const std::vector<double> q{0.0, 0.05, 0.4, 1.99};
    auto a = online_predict(m, q), b = online_predict(back, q);
    EXPECT_EQ(a.fields, b.fields);
    EXPECT_EQ(a.variance, b.variance);
    EXPECT_EQ(a.clusters, b.clusters);
    EXPECT_EQ(back.classifier.k_knn, m.classifier.k_knn);
    EXPECT_EQ(back.history.size(), m.history.size());
}

TEST(ModelFile, VersionAndFormatChecks) {
    auto j = model_to_json(spring_model());
    j["version"] = model_format_version + 1;
    EXPECT_THROW(model_from_json(j), VersionMismatch);
    EXPECT_THROW(model_from_json(nlohmann::json{{"format", "cag-model"}}), ParseError);
    EXPECT_THROW(load_model("/nonexistent/model.json"), IoError);
}

TEST(UniformBaseline, UsesExactlyTheBudget) {
    auto base = train_uniform_baseline(make_spring_solver(), 0.0, 2.0, 16, spring_defaults());
    EXPECT_EQ(base.samples(), 16u);
    EXPECT_EQ(base.clusters(), 1u);
    EXPECT_EQ(base.method, "uniform");
}

TEST(ClusterDataset, SinglePassLabelsMatchKmeans) {
    const auto ds = label_samples(make_spring_solver(), initial_grid(0.0, 2.0, 12));
    SamplingConfig sc;
    sc.clusters = 3;
    auto cd = cluster_dataset(ds, sc);
    EXPECT_EQ(cd.size(), 12u);
    EXPECT_EQ(cd.clusters(), 3u);
}

TEST(MultiPattern, RecoversFamiliesAndBeatsSingleRegressor) {
    // Two field families over disjoint chi ranges: slow oscillations on [0, 1], offset parabolas on [2, 3].
    const Eigen::Index n = 60;
    auto field = [&](double chi) {
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(n - 1);
            y[i] = chi <= 1.0 ? std::sin(2.0 * M_PI * t * (1.0 + chi)) : 6.0 + chi * t * t;
        }
        return y;
    };
    ParameterGrid xs;
    for (int i = 0; i <= 10; ++i) xs.push_back(0.1 * i);
    for (int i = 0; i <= 10; ++i) xs.push_back(2.0 + 0.1 * i);
    FieldMatrix ys(n, static_cast<Eigen::Index>(xs.size()));
    for (std::size_t j = 0; j < xs.size(); ++j) ys.col(static_cast<Eigen::Index>(j)) = field(xs[j]);
    const LabeledDataset ds(xs, ys);

    SamplingConfig sc;
    sc.clusters = 2;
    const auto cd = cluster_dataset(ds, sc);
    for (std::size_t j = 0; j < xs.size(); ++j) EXPECT_EQ(cd.labels()[j], xs[j] <= 1.0 ? 0u : 1u);

    CagConfig cfg;
    cfg.sampling = sc;
    const auto multi = offline_train(cd, cfg);
    cfg.sampling.clusters = 1;
    const auto single = offline_train(ClusteredDataset(ds, std::vector<std::size_t>(xs.size(), 0), 1), cfg);

    std::vector<double> q;
    for (int i = 0; i < 10; ++i) {
        q.push_back(0.05 + 0.1 * i);
        q.push_back(2.05 + 0.1 * i);
    }
    FieldMatrix truth(n, static_cast<Eigen::Index>(q.size()));
    for (std::size_t j = 0; j < q.size(); ++j) truth.col(static_cast<Eigen::Index>(j)) = field(q[j]);
    const double e_multi = mse(online_predict(multi, q).fields, truth);
    const double e_single = mse(online_predict(single, q).fields, truth);
    EXPECT_LT(e_multi, e_single);
}

TEST(OfflineTrain, SpringClusterBoundariesNearReferenceRanges) {
    // Reference ranges: [0, 0.055), (0.055, 0.438), (0.438, 2]; boundaries accepted within 0.05.
    const double reference[] = {0.055, 0.438};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CagConfig cfg = spring_defaults();
        cfg.sampling.seed = seed;
        const auto model = offline_train(make_spring_solver(), cfg);
        const auto& xs = model.classifier.inputs;
        const auto& labels = model.classifier.labels;
        std::vector<double> boundaries;
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            if (labels[i] != labels[i + 1]) boundaries.push_back(0.5 * (xs[i] + xs[i + 1]));
        }
        ASSERT_EQ(boundaries.size(), 2u) << "seed " << seed;
        for (int b = 0; b < 2; ++b) EXPECT_NEAR(boundaries[b], reference[b], 0.05) << "seed " << seed;
        EXPECT_EQ(model.cluster_sizes()[labels.front()], 4u) << "seed " << seed;
    }
}

TEST(OfflineTrain, SingleClusterEqualsPlainRegressionOnGrid) {
    CagConfig cfg = spring_defaults();
    cfg.sampling.clusters = 1;
    cfg.sampling.min_cluster_size = 1;
    cfg.sampling.initial_samples = 9;
    const auto single = offline_train(make_spring_solver(), cfg);
    EXPECT_EQ(single.samples(), 9u);
    const auto plain = train_uniform_baseline(make_spring_solver(), 0.0, 2.0, 9, cfg);
    const std::vector<double> q{0.1, 0.7, 1.3};
    EXPECT_EQ(online_predict(single, q).fields, online_predict(plain, q).fields);
}

TEST(OnlinePredict, TrainingQueriesRestoreTheirFieldsAtTheJitterFloor) {
    CagConfig cfg = spring_defaults();
    cfg.optimizer.fix_noise = true;
    const auto model = offline_train(make_spring_solver(), cfg);
    const auto& xs = model.classifier.inputs;
    const auto truth = label_samples(make_spring_solver(), xs);
    const auto p = online_predict(model, xs);
    std::size_t own = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        if (p.clusters[j] != model.classifier.labels[j]) continue;  // boundary samples may route elsewhere
        const auto c = static_cast<Eigen::Index>(j);
        EXPECT_LT((p.fields.col(c) - truth.fields().col(c)).norm(), 1e-4 * truth.fields().col(c).norm()) << "chi " << xs[j];
        ++own;
    }
    EXPECT_GE(own, xs.size() - 2);
}
