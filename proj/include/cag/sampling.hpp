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

#ifndef CAG_SAMPLING_HPP
#define CAG_SAMPLING_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cag/dataset.hpp"
#include "cag/error.hpp"
#include "cag/solvers.hpp"

namespace cag {

/// SplitMix64 step; used to derive independent seeds from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// M0 equally spaced values over [chi_min, chi_max], endpoints included.
inline ParameterGrid initial_grid(double chi_min, double chi_max, std::size_t count) {
    if (count < 2) throw InvalidParameter("initial grid needs at least 2 samples");
    if (!(chi_min < chi_max)) throw InvalidParameter("initial grid needs chi_min < chi_max");
    ParameterGrid xs(count);
    const double step = (chi_max - chi_min) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) xs[i] = chi_min + static_cast<double>(i) * step;
    xs.back() = chi_max;
    return xs;
}

struct KMeansOptions {
    std::optional<double> tol;  ///< absolute centroid-shift tolerance; default scales with the data
    std::size_t max_iter = 300;
    std::size_t restarts = 10;
};

struct KMeansResult {
    Eigen::MatrixXd centroids;        ///< N x K
    std::vector<std::size_t> labels;  ///< 0-based, relabeled by first appearance
    double sse = 0.0;
    std::size_t iterations = 0;
    std::vector<double> sse_history;  ///< SSE after each centroid update (winning restart)
};

namespace detail {

inline double squared_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                               const Eigen::Ref<const Eigen::VectorXd>& b) {
    return (a - b).squaredNorm();
}

inline double within_cluster_sse(const FieldMatrix& ys, const Eigen::MatrixXd& centroids,
                                 const std::vector<std::size_t>& labels) {
    double sse = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sse += squared_distance(ys.col(static_cast<Eigen::Index>(i)), centroids.col(static_cast<Eigen::Index>(labels[i])));
    }
    return sse;
}

inline void assign_nearest(const FieldMatrix& ys, const Eigen::MatrixXd& centroids, std::vector<std::size_t>& labels) {
    for (Eigen::Index i = 0; i < ys.cols(); ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < centroids.cols(); ++k) {
            const double d = squared_distance(ys.col(i), centroids.col(k));
            if (d < best_d) {  // strict: lowest index wins ties
                best_d = d;
                best = static_cast<std::size_t>(k);
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
    }
}

/// Gives each empty cluster the sample farthest from its current centroid.
inline void repair_empty_clusters(const FieldMatrix& ys, const Eigen::MatrixXd& centroids,
                                  std::vector<std::size_t>& labels, std::size_t k_count) {
    std::vector<std::size_t> counts(k_count, 0);
    for (std::size_t g : labels) ++counts[g];
    for (std::size_t k = 0; k < k_count; ++k) {
        if (counts[k] != 0) continue;
        std::size_t far = labels.size();
        double far_d = -1.0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (counts[labels[i]] < 2) continue;
            const double d = squared_distance(ys.col(static_cast<Eigen::Index>(i)),
                                              centroids.col(static_cast<Eigen::Index>(labels[i])));
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far == labels.size()) continue;
        --counts[labels[far]];
        labels[far] = k;
        counts[k] = 1;
    }
}

inline Eigen::MatrixXd cluster_means(const FieldMatrix& ys, const std::vector<std::size_t>& labels,
                                     const Eigen::MatrixXd& previous) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(ys.rows(), previous.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(previous.cols()), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sums.col(static_cast<Eigen::Index>(labels[i])) += ys.col(static_cast<Eigen::Index>(i));
        ++counts[labels[i]];
    }
    for (Eigen::Index k = 0; k < sums.cols(); ++k) {
        const auto c = counts[static_cast<std::size_t>(k)];
        sums.col(k) = c ? Eigen::VectorXd(sums.col(k) / static_cast<double>(c)) : Eigen::VectorXd(previous.col(k));
    }
    return sums;
}

/// Single-sample transfers (Hartigan): move a sample to another cluster whenever that lowers the SSE.
/// Runs after Lloyd convergence; every accepted move strictly decreases the SSE.
inline void transfer_refine(const FieldMatrix& ys, Eigen::MatrixXd& centroids, std::vector<std::size_t>& labels,
                            std::vector<double>& sse_history) {
    const auto k_count = static_cast<std::size_t>(centroids.cols());
    if (k_count < 2) return;
    std::vector<double> counts(k_count, 0.0);
    for (std::size_t g : labels) counts[g] += 1.0;
    const double scale = ys.size() ? ys.squaredNorm() + 1.0 : 1.0;
    bool moved = true;
    for (std::size_t sweep = 0; moved && sweep < 100 * labels.size() + 100; ++sweep) {
        moved = false;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const std::size_t a = labels[i];
            if (counts[a] < 2.0) continue;
            const auto x = ys.col(static_cast<Eigen::Index>(i));
            const double removal = counts[a] / (counts[a] - 1.0) * squared_distance(x, centroids.col(static_cast<Eigen::Index>(a)));
            std::size_t best = a;
            double best_gain = 1e-12 * scale;
            for (std::size_t b = 0; b < k_count; ++b) {
                if (b == a) continue;
                const double added = counts[b] / (counts[b] + 1.0) * squared_distance(x, centroids.col(static_cast<Eigen::Index>(b)));
                if (removal - added > best_gain) {
                    best_gain = removal - added;
                    best = b;
                }
            }
            if (best == a) continue;
            const auto ca = static_cast<Eigen::Index>(a), cb = static_cast<Eigen::Index>(best);
            centroids.col(ca) = (centroids.col(ca) * counts[a] - x) / (counts[a] - 1.0);
            centroids.col(cb) = (centroids.col(cb) * counts[best] + x) / (counts[best] + 1.0);
            counts[a] -= 1.0;
            counts[best] += 1.0;
            labels[i] = best;
            moved = true;
        }
        if (moved) sse_history.push_back(within_cluster_sse(ys, centroids, labels));
    }
}

inline KMeansResult iterate_lloyd(const FieldMatrix& ys, Eigen::MatrixXd centroids, double tol, std::size_t max_iter) {
    const auto m = static_cast<std::size_t>(ys.cols());
    const auto k_count = static_cast<std::size_t>(centroids.cols());
    KMeansResult res;
    res.labels.assign(m, 0);
    for (std::size_t it = 0; it < max_iter; ++it) {
        assign_nearest(ys, centroids, res.labels);
        repair_empty_clusters(ys, centroids, res.labels, k_count);
        Eigen::MatrixXd updated = cluster_means(ys, res.labels, centroids);
        const double shift = (updated - centroids).colwise().norm().maxCoeff();
        centroids = std::move(updated);
        res.iterations = it + 1;
        res.sse_history.push_back(within_cluster_sse(ys, centroids, res.labels));
        if (shift < tol) break;
    }
    transfer_refine(ys, centroids, res.labels, res.sse_history);
    res.centroids = std::move(centroids);
    res.sse = res.sse_history.empty() ? 0.0 : res.sse_history.back();
    return res;
}

inline KMeansResult lloyd(const FieldMatrix& ys, std::size_t k_count, double tol, std::size_t max_iter,
                          std::uint64_t seed) {
    const auto m = static_cast<std::size_t>(ys.cols());
    std::mt19937_64 rng(seed);
    // Forgy initialization: K distinct columns via a partial Fisher-Yates shuffle.
    std::vector<std::size_t> pool(m);
    for (std::size_t i = 0; i < m; ++i) pool[i] = i;
    Eigen::MatrixXd centroids(ys.rows(), static_cast<Eigen::Index>(k_count));
    for (std::size_t k = 0; k < k_count; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng() % (m - k));
        std::swap(pool[k], pool[j]);
        centroids.col(static_cast<Eigen::Index>(k)) = ys.col(static_cast<Eigen::Index>(pool[k]));
    }

    return iterate_lloyd(ys, std::move(centroids), tol, max_iter);
}

/// Renumbers clusters in order of first appearance so labels do not depend on initialization.
inline void canonicalize_labels(KMeansResult& res) {
    const auto k_count = static_cast<std::size_t>(res.centroids.cols());
    std::vector<std::size_t> remap(k_count, k_count);
    std::size_t next = 0;
    for (std::size_t g : res.labels) {
        if (remap[g] == k_count) remap[g] = next++;
    }
    for (std::size_t k = 0; k < k_count; ++k) {
        if (remap[k] == k_count) remap[k] = next++;
    }
    Eigen::MatrixXd c(res.centroids.rows(), res.centroids.cols());
    for (std::size_t k = 0; k < k_count; ++k) c.col(static_cast<Eigen::Index>(remap[k])) = res.centroids.col(static_cast<Eigen::Index>(k));
    res.centroids = std::move(c);
    for (auto& g : res.labels) g = remap[g];
}

} // namespace detail

/// Lloyd's K-means over the columns of Y with seeded Forgy restarts; the lowest SSE wins.
inline KMeansResult kmeans(const FieldMatrix& ys, std::size_t k_count, const KMeansOptions& opts, std::uint64_t seed) {
    const auto m = static_cast<std::size_t>(ys.cols());
    if (k_count == 0) throw InvalidParameter("kmeans: K must be at least 1");
    if (m < k_count) {
        throw InvalidParameter("kmeans: " + std::to_string(m) + " samples cannot form " + std::to_string(k_count)
                               + " clusters");
    }
    const double tol = opts.tol.value_or(1e-8 * (ys.size() ? ys.cwiseAbs().maxCoeff() + 1.0 : 1.0));
    const std::size_t restarts = std::max<std::size_t>(opts.restarts, 1);
    KMeansResult best;
    for (std::size_t r = 0; r < restarts; ++r) {
        auto res = detail::lloyd(ys, k_count, tol, std::max<std::size_t>(opts.max_iter, 1), derive_seed(seed, r));
        if (r == 0 || res.sse < best.sse) best = std::move(res);
    }
    detail::canonicalize_labels(best);
    return best;
}

/// Midpoints of adjacent samples whose labels differ, skipping values already present.
inline ParameterGrid boundary_midpoints(const ParameterGrid& xs, const std::vector<std::size_t>& labels) {
    if (xs.size() != labels.size()) throw DimensionMismatch("boundary_midpoints: label count differs");
    ParameterGrid mids;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        if (labels[i] == labels[i + 1]) continue;
        const double mid = 0.5 * (xs[i] + xs[i + 1]);
        const bool present = std::any_of(xs.begin(), xs.end(), [&](double x) { return same_parameter(x, mid); })
                             || std::any_of(mids.begin(), mids.end(), [&](double x) { return same_parameter(x, mid); });
        if (!present) mids.push_back(mid);
    }
    return mids;
}

struct SamplingConfig {
    double chi_min = 0.0;
    double chi_max = 1.0;
    std::size_t initial_samples = 5;
    std::size_t clusters = 3;
    std::size_t min_cluster_size = 4;
    KMeansOptions kmeans;
    std::size_t outer_max_iter = 50;
    std::uint64_t seed = 0;

    void validate() const {
        if (!std::isfinite(chi_min) || !std::isfinite(chi_max) || !(chi_min < chi_max)) {
            throw InvalidParameter("sampling: need finite chi_min < chi_max");
        }
        if (clusters < 1) throw InvalidParameter("sampling: K must be at least 1");
        if (min_cluster_size < 1) throw InvalidParameter("sampling: Q_min must be at least 1");
        if (initial_samples < std::max<std::size_t>(2, clusters)) {
            throw InvalidParameter("sampling: M0 must be at least max(2, K)");
        }
    }
};

/// One pass of cluster-then-insert.
struct SamplingRound {
    std::size_t round = 0;
    std::size_t samples = 0;
    std::vector<std::size_t> cluster_sizes;
    ParameterGrid inserted;
};

struct AdaptiveSamplingResult {
    ClusteredDataset dataset;
    std::vector<SamplingRound> history;
};

/// Clustering-enhanced adaptive sample generation.
///
/// Starts from a uniform grid of M0 samples and repeatedly clusters the response
/// fields, inserting midpoints across every cluster boundary, until each of the
/// K clusters holds at least Q_min samples.
inline AdaptiveSamplingResult adaptive_generate(const Solver& solver, const SamplingConfig& cfg) {
    cfg.validate();
    LabeledDataset ds = label_samples(solver, initial_grid(cfg.chi_min, cfg.chi_max, cfg.initial_samples));
    AdaptiveSamplingResult out;
    for (std::size_t round = 0;; ++round) {
        auto km = kmeans(ds.fields(), cfg.clusters, cfg.kmeans, derive_seed(cfg.seed, 1000 + round));
        SamplingRound rec;
        rec.round = round;
        rec.samples = ds.size();
        rec.cluster_sizes.assign(cfg.clusters, 0);
        for (std::size_t g : km.labels) ++rec.cluster_sizes[g];

        std::vector<ConvergenceFailure::Deficit> deficits;
        for (std::size_t k = 0; k < cfg.clusters; ++k) {
            if (rec.cluster_sizes[k] < cfg.min_cluster_size) deficits.push_back({k, rec.cluster_sizes[k]});
        }
        if (deficits.empty()) {
            out.history.push_back(std::move(rec));
            out.dataset = ClusteredDataset(std::move(ds), std::move(km.labels), cfg.clusters);
            return out;
        }

        auto describe = [&] {
            std::string s;
            for (const auto& d : deficits) {
                s += " cluster " + std::to_string(d.cluster) + " has " + std::to_string(d.count) + " < "
                     + std::to_string(cfg.min_cluster_size) + ";";
            }
            return s;
        };
        if (round >= cfg.outer_max_iter) {
            throw ConvergenceFailure("adaptive sampling did not converge after " + std::to_string(round)
                                         + " insertion rounds:" + describe(),
                                     std::move(deficits));
        }
        rec.inserted = boundary_midpoints(ds.inputs(), km.labels);
        if (rec.inserted.empty()) {
            throw ConvergenceFailure("adaptive sampling stalled: no new boundary midpoints at round "
                                         + std::to_string(round) + ":" + describe(),
                                     std::move(deficits));
        }
        ds = ds.merged(label_samples(solver, rec.inserted));
        out.history.push_back(std::move(rec));
    }
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

struct ClusterRange {
    std::size_t cluster = 0;
    std::vector<Interval> intervals;
};

/// Contiguous chi runs occupied by each cluster (a cluster may own several).
inline std::vector<ClusterRange> cluster_ranges(const ClusteredDataset& cd) {
    std::vector<ClusterRange> out(cd.clusters());
    for (std::size_t k = 0; k < out.size(); ++k) out[k].cluster = k;
    const auto& xs = cd.base().inputs();
    const auto& labels = cd.labels();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto& ivs = out[labels[i]].intervals;
        if (i > 0 && labels[i - 1] == labels[i]) {
            ivs.back().hi = xs[i];
            ++ivs.back().count;
        } else {
            ivs.push_back({xs[i], xs[i], 1});
        }
    }
    return out;
}

} // namespace cag

#endif // CAG_SAMPLING_HPP
