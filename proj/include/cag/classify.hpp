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

#ifndef CAG_CLASSIFY_HPP
#define CAG_CLASSIFY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "cag/dataset.hpp"
#include "cag/error.hpp"

namespace cag {

/// Training inputs and their cluster labels, used to route unseen inputs.
struct ClassifierData {
    ParameterGrid inputs;
    std::vector<std::size_t> labels;
    std::size_t clusters = 1;
    std::size_t k_knn = 3;

    void validate() const {
        if (inputs.empty()) throw InvalidParameter("classifier: no training inputs");
        if (labels.size() != inputs.size()) throw DimensionMismatch("classifier: label count differs from inputs");
        if (k_knn < 1 || k_knn > inputs.size()) throw InvalidParameter("classifier: need 1 <= K_knn <= M");
        for (std::size_t g : labels) {
            if (g >= clusters) throw InvalidParameter("classifier: label out of range");
        }
    }
};

/// Majority vote among the K_knn nearest training inputs.
///
/// Neighbors are ordered by distance, equal distances toward the smaller chi. A tied vote
/// goes to the tied label owning the closest neighbor, then to the lowest label index.
inline std::size_t knn_classify(const ClassifierData& cd, ControlParameter query) {
    const std::size_t m = cd.inputs.size();
    const std::size_t k = std::min(cd.k_knn, m);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto closer = [&](std::size_t a, std::size_t b) {
        const double da = std::abs(cd.inputs[a] - query);
        const double db = std::abs(cd.inputs[b] - query);
        if (da != db) return da < db;
        return cd.inputs[a] < cd.inputs[b];
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);

    std::vector<std::size_t> votes(cd.clusters, 0);
    std::vector<double> nearest(cd.clusters, std::numeric_limits<double>::infinity());
    for (std::size_t n = 0; n < k; ++n) {
        const std::size_t g = cd.labels[order[n]];
        ++votes[g];
        nearest[g] = std::min(nearest[g], std::abs(cd.inputs[order[n]] - query));
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < cd.clusters; ++g) {
        if (votes[g] > votes[best] || (votes[g] == votes[best] && nearest[g] < nearest[best])) best = g;
    }
    return best;
}

/// Queries routed to one cluster, with their positions in the original query list.
struct QueryGroup {
    std::size_t cluster = 0;
    std::vector<std::size_t> positions;
    ParameterGrid queries;
};

struct QueryPartition {
    std::vector<QueryGroup> groups;       ///< only non-empty clusters, ascending cluster id
    std::vector<std::size_t> assignment;  ///< cluster id per original query
};

inline QueryPartition partition_queries(const ClassifierData& cd, std::span<const double> queries) {
    cd.validate();
    QueryPartition out;
    out.assignment.reserve(queries.size());
    std::vector<QueryGroup> by_cluster(cd.clusters);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (!std::isfinite(queries[i])) throw InvalidParameter("classifier: non-finite query");
        const std::size_t g = knn_classify(cd, queries[i]);
        out.assignment.push_back(g);
        by_cluster[g].cluster = g;
        by_cluster[g].positions.push_back(i);
        by_cluster[g].queries.push_back(queries[i]);
    }
    for (auto& grp : by_cluster) {
        if (!grp.positions.empty()) out.groups.push_back(std::move(grp));
    }
    return out;
}

} // namespace cag

#endif // CAG_CLASSIFY_HPP
