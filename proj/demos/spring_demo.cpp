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


// Trains CAG on the damped spring and compares a few cases with the analytical solution.

#include <cstdio>

#include "cag/bench.hpp"
#include "cag/pipeline.hpp"

int main() {
    const cag::Solver solver = cag::make_spring_solver();
    const cag::CagConfig cfg = cag::spring_defaults();
    const cag::TrainedModel model = cag::offline_train(solver, cfg);

    std::printf("trained on %zu samples in %zu clusters\n", model.samples(), model.clusters());
    for (const auto& r : cag::cluster_ranges(cag::ClusteredDataset(
             cag::LabeledDataset(model.classifier.inputs, cag::label_samples(solver, model.classifier.inputs).fields()),
             model.classifier.labels, model.clusters()))) {
        for (const auto& iv : r.intervals) {
            std::printf("  cluster %zu: [%.4f, %.4f] with %zu samples\n", r.cluster, iv.lo, iv.hi, iv.count);
        }
    }

    const cag::ParameterGrid queries{0.0408, 0.1633, 0.3673, 1.5102};
    const auto pred = cag::online_predict(model, queries);
    const auto truth = cag::label_samples(solver, queries).fields();
    for (std::size_t j = 0; j < queries.size(); ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        const double err = cag::case_relative_error(pred.fields.col(c), truth.col(c));
        std::printf("zeta = %.4f  cluster %zu  case error %.3e  latent variance %.3e\n", queries[j], pred.clusters[j],
                    err, pred.variance[c]);
    }
    return 0;
}
