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

#ifndef CAG_BENCH_HPP
#define CAG_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cag/config.hpp"
#include "cag/dataset.hpp"
#include "cag/error.hpp"
#include "cag/pipeline.hpp"
#include "cag/sampling.hpp"
#include "cag/solvers.hpp"

namespace cag {

inline constexpr int report_format_version = 1;

/// Entries with |truth| below this are skipped by the skipping relative-error variant.
inline constexpr double relative_error_floor = 1e-12;

namespace detail {

inline void require_same_shape(const FieldMatrix& a, const FieldMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionMismatch(std::string(what) + ": prediction is " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + ", truth is " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
    }
}

} // namespace detail

/// max |pred - true| / |true| over all entries.
inline double max_relative_error(const FieldMatrix& pred, const FieldMatrix& truth) {
    detail::require_same_shape(pred, truth, "max_relative_error");
    double worst = 0.0;
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
        for (Eigen::Index i = 0; i < truth.rows(); ++i) {
            const double t = truth(i, j);
            if (t == 0.0) throw DivisionByZero("max_relative_error: truth entry (" + std::to_string(i) + ", " +
                                               std::to_string(j) + ") is zero");
            worst = std::max(worst, std::abs(pred(i, j) - t) / std::abs(t));
        }
    }
    return worst;
}

struct RelativeErrorStats {
    double max = 0.0;
    std::size_t compared = 0;
    std::size_t skipped = 0;
};

/// Entrywise relative error that skips and counts entries with |truth| < floor.
inline RelativeErrorStats max_relative_error_skipping(const FieldMatrix& pred, const FieldMatrix& truth,
                                                      double floor = relative_error_floor) {
    detail::require_same_shape(pred, truth, "max_relative_error");
    RelativeErrorStats out;
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
        for (Eigen::Index i = 0; i < truth.rows(); ++i) {
            const double t = truth(i, j);
            if (std::abs(t) < floor) {
                ++out.skipped;
                continue;
            }
            ++out.compared;
            out.max = std::max(out.max, std::abs(pred(i, j) - t) / std::abs(t));
        }
    }
    return out;
}

/// Per-case amplitude-normalized error: max_j ||pred_j - true_j||_inf / ||true_j||_inf.
/// Coincides with max_relative_error for scalar fields.
inline double case_relative_error(const FieldMatrix& pred, const FieldMatrix& truth) {
    detail::require_same_shape(pred, truth, "case_relative_error");
    double worst = 0.0;
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
        const double scale = truth.col(j).cwiseAbs().maxCoeff();
        if (scale == 0.0) throw DivisionByZero("case_relative_error: truth case " + std::to_string(j) + " is zero");
        worst = std::max(worst, (pred.col(j) - truth.col(j)).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

inline double mse(const FieldMatrix& pred, const FieldMatrix& truth) {
    detail::require_same_shape(pred, truth, "mse");
    if (truth.size() == 0) return 0.0;
    return (pred - truth).squaredNorm() / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Reports

struct CaseError {
    double chi = 0.0;
    std::size_t cluster = 0;
    double mse = 0.0;
    double max_relative_error = 0.0;  ///< entrywise, skipping near-zero truth
    std::size_t skipped = 0;
    double case_relative_error = 0.0;
};

struct ErrorReport {
    std::string method;
    std::size_t samples = 0;
    std::size_t entries_per_case = 0;
    double max_relative_error = 0.0;
    std::size_t skipped_entries = 0;
    double case_relative_error = 0.0;
    double mse = 0.0;
    std::vector<CaseError> per_case;
    double offline_seconds = 0.0;
    double online_seconds = 0.0;
};

/// Aggregates per-case values: maxima of maxima, entry-weighted mean of MSEs.
inline void aggregate(ErrorReport& rep) {
    rep.max_relative_error = 0.0;
    rep.case_relative_error = 0.0;
    rep.skipped_entries = 0;
    double weighted = 0.0;
    std::size_t entries = 0;
    for (const auto& c : rep.per_case) {
        rep.max_relative_error = std::max(rep.max_relative_error, c.max_relative_error);
        rep.case_relative_error = std::max(rep.case_relative_error, c.case_relative_error);
        rep.skipped_entries += c.skipped;
        weighted += c.mse * static_cast<double>(rep.entries_per_case);
        entries += rep.entries_per_case;
    }
    rep.mse = entries == 0 ? 0.0 : weighted / static_cast<double>(entries);
}

inline ErrorReport evaluate_prediction(const PredictionResult& pred, const FieldMatrix& truth,
                                       std::span<const double> queries) {
    detail::require_same_shape(pred.fields, truth, "evaluate");
    if (static_cast<Eigen::Index>(queries.size()) != truth.cols()) {
        throw DimensionMismatch("evaluate: query count differs from truth case count");
    }
    ErrorReport rep;
    rep.entries_per_case = static_cast<std::size_t>(truth.rows());
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
        const FieldMatrix p = pred.fields.col(j);
        const FieldMatrix t = truth.col(j);
        CaseError c;
        c.chi = queries[static_cast<std::size_t>(j)];
        c.cluster = pred.clusters.at(static_cast<std::size_t>(j));
        c.mse = mse(p, t);
        const auto rel = max_relative_error_skipping(p, t);
        c.max_relative_error = rel.max;
        c.skipped = rel.skipped;
        c.case_relative_error = case_relative_error(p, t);
        rep.per_case.push_back(c);
    }
    aggregate(rep);
    return rep;
}

// ---------------------------------------------------------------------------
// Comparison sweep

struct TestGrid {
    double chi_min = 0.0;
    double chi_max = 1.0;
    std::size_t points = 50;

    /// Uniform cells over the range, evaluated at cell centers.
    [[nodiscard]] ParameterGrid values() const {
        if (points == 0) throw InvalidParameter("test grid: no points");
        if (!(chi_min < chi_max)) throw InvalidParameter("test grid: chi_min must be below chi_max");
        ParameterGrid xs(points);
        const double step = (chi_max - chi_min) / static_cast<double>(points);
        for (std::size_t j = 0; j < points; ++j) xs[j] = chi_min + (static_cast<double>(j) + 0.5) * step;
        return xs;
    }
};

/// Sampling parameters picked to land a CAG run on a target budget.
struct BudgetChoice {
    std::size_t target = 0;
    std::size_t initial_samples = 0;
    std::size_t min_cluster_size = 0;
    std::size_t samples = 0;
    std::size_t evaluations = 0;
};

struct BudgetSearch {
    BudgetChoice choice;
    AdaptiveSamplingResult result;
};

/// Finds (M0, Q_min) whose adaptive run ends closest to `target` samples.
/// M0 descends from max(base M0, round(fraction * target)) to the base M0; for each M0, Q_min rises from the
/// base value until the run reaches the target. Ties keep the larger M0, then the smaller Q_min.
inline BudgetSearch choose_budget(const Solver& solver, const SamplingConfig& base, std::size_t target,
                                  double initial_fraction = 0.5) {
    if (target == 0) throw InvalidParameter("bench: target sample size must be positive");
    if (!(initial_fraction > 0.0 && initial_fraction <= 1.0)) {
        throw InvalidParameter("bench: initial_fraction must lie in (0, 1]");
    }
    base.validate();
    const std::size_t floor_m0 = base.initial_samples;
    const auto scaled = static_cast<std::size_t>(std::lround(initial_fraction * static_cast<double>(target)));
    const std::size_t top = std::max(floor_m0, scaled);
    const std::size_t q_cap = std::max(base.min_cluster_size, target);

    std::optional<BudgetSearch> best;
    std::size_t best_gap = 0;
    std::size_t evaluations = 0;
    for (std::size_t m0 = top; m0 >= floor_m0; --m0) {
        for (std::size_t q = base.min_cluster_size; q <= q_cap; ++q) {
            SamplingConfig sc = base;
            sc.initial_samples = m0;
            sc.min_cluster_size = q;
            ++evaluations;
            try {
                AdaptiveSamplingResult res = adaptive_generate(solver, sc);
                const std::size_t m = res.dataset.size();
                const std::size_t gap = m > target ? m - target : target - m;
                if (!best || gap < best_gap) {
                    best_gap = gap;
                    best = BudgetSearch{{target, m0, q, m, 0}, std::move(res)};
                }
                if (m >= target) break;
            } catch (const ConvergenceFailure&) {
                continue;
            }
        }
        if (best && best_gap == 0) break;
    }
    if (!best) throw ConvergenceFailure("bench: no sampling configuration satisfied Q_min near " + std::to_string(target), {});
    best->choice.evaluations = evaluations;
    return std::move(*best);
}

struct ComparisonConfig {
    std::string problem;
    CagConfig base;
    std::vector<std::size_t> sizes;
    std::vector<std::uint64_t> seeds{0};
    TestGrid grid;
    double initial_fraction = 0.5;
    bool parallel = false;     ///< rows run concurrently; timings are not captured
    bool reproducible = false; ///< omit timestamp and timings from reports
};

struct ComparisonRow {
    std::size_t target = 0;
    std::uint64_t seed = 0;
    BudgetChoice choice;
    std::optional<ErrorReport> cag;
    std::optional<ErrorReport> uniform;
    std::string error;  ///< non-empty when the row failed
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline ComparisonRow run_row(const Solver& solver, const ComparisonConfig& cc, std::size_t target,
                             std::uint64_t seed, const ParameterGrid& queries, const FieldMatrix& truth, bool timed) {
    ComparisonRow row;
    row.target = target;
    row.seed = seed;
    try {
        CagConfig cfg = cc.base;
        cfg.sampling.seed = seed;
        cfg.optimizer.seed = seed;
        BudgetSearch search = choose_budget(solver, cfg.sampling, target, cc.initial_fraction);
        row.choice = search.choice;
        cfg.sampling.initial_samples = search.choice.initial_samples;
        cfg.sampling.min_cluster_size = search.choice.min_cluster_size;

        auto t0 = std::chrono::steady_clock::now();
        TrainedModel model = offline_train(solver, cfg);
        const double cag_offline = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        const PredictionResult cag_pred = online_predict(model, queries);
        const double cag_online = seconds_since(t0);
        ErrorReport cag = evaluate_prediction(cag_pred, truth, queries);
        cag.method = model.method;
        cag.samples = model.samples();
        if (timed) {
            cag.offline_seconds = cag_offline;
            cag.online_seconds = cag_online;
        }
        row.cag = std::move(cag);

        t0 = std::chrono::steady_clock::now();
        TrainedModel base = train_uniform_baseline(solver, cfg.sampling.chi_min, cfg.sampling.chi_max,
                                                   model.samples(), cfg);
        const double uni_offline = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        const PredictionResult uni_pred = online_predict(base, queries);
        const double uni_online = seconds_since(t0);
        ErrorReport uni = evaluate_prediction(uni_pred, truth, queries);
        uni.method = base.method;
        uni.samples = base.samples();
        if (timed) {
            uni.offline_seconds = uni_offline;
            uni.online_seconds = uni_online;
        }
        row.uniform = std::move(uni);
    } catch (const Error& e) {
        row.error = e.what();
    }
    return row;
}

} // namespace detail

/// Trains CAG and the size-matched uniform baseline for every (size, seed) and scores both on the test grid.
inline std::vector<ComparisonRow> run_comparison(const Solver& solver, const ComparisonConfig& cc) {
    cc.base.validate();
    if (cc.sizes.empty()) throw InvalidParameter("bench: no sizes given");
    if (cc.seeds.empty()) throw InvalidParameter("bench: no seeds given");
    const ParameterGrid queries = cc.grid.values();
    const FieldMatrix truth = label_samples(solver, queries).fields();
    const bool timed = !cc.parallel && !cc.reproducible;

    std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
    for (std::size_t s : cc.sizes) {
        for (std::uint64_t seed : cc.seeds) jobs.emplace_back(s, seed);
    }
    std::vector<ComparisonRow> rows;
    if (!cc.parallel) {
        for (const auto& [s, seed] : jobs) rows.push_back(detail::run_row(solver, cc, s, seed, queries, truth, timed));
        return rows;
    }
    std::vector<std::future<ComparisonRow>> pending;
    for (const auto& [s, seed] : jobs) {
        pending.push_back(std::async(std::launch::async, [&, s = s, seed = seed] {
            return detail::run_row(solver, cc, s, seed, queries, truth, false);
        }));
    }
    for (auto& f : pending) rows.push_back(f.get());
    return rows;
}

/// Lowest CAG MSE among the rows for one target size, if any row succeeded.
inline const ComparisonRow* best_row(const std::vector<ComparisonRow>& rows, std::size_t target) {
    const ComparisonRow* best = nullptr;
    for (const auto& r : rows) {
        if (r.target != target || !r.cag || !r.uniform) continue;
        if (!best || r.cag->mse < best->cag->mse) best = &r;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const ErrorReport& r, bool with_timings, bool with_cases = true) {
    nlohmann::json j = {{"method", r.method},
                        {"samples", r.samples},
                        {"entries_per_case", r.entries_per_case},
                        {"max_relative_error", r.max_relative_error},
                        {"skipped_entries", r.skipped_entries},
                        {"case_relative_error", r.case_relative_error},
                        {"mse", r.mse}};
    if (with_timings) {
        j["offline_seconds"] = r.offline_seconds;
        j["online_seconds"] = r.online_seconds;
    }
    if (with_cases) {
        nlohmann::json cases = nlohmann::json::array();
        for (const auto& c : r.per_case) {
            cases.push_back({{"chi", c.chi},
                             {"cluster", c.cluster},
                             {"mse", c.mse},
                             {"max_relative_error", c.max_relative_error},
                             {"skipped", c.skipped},
                             {"case_relative_error", c.case_relative_error}});
        }
        j["per_case"] = std::move(cases);
    }
    return j;
}

inline nlohmann::json report_to_json(const ComparisonConfig& cc, const std::vector<ComparisonRow>& rows,
                                     const std::string& timestamp = {}) {
    const bool timed = !cc.parallel && !cc.reproducible;
    nlohmann::json out;
    out["format"] = "cag-bench-report";
    out["version"] = report_format_version;
    if (!cc.reproducible && !timestamp.empty()) out["timestamp"] = timestamp;
    out["problem"] = cc.problem;
    out["config"] = to_json(cc.base);
    out["sizes"] = cc.sizes;
    out["seeds"] = cc.seeds;
    out["test_grid"] = {{"chi_min", cc.grid.chi_min}, {"chi_max", cc.grid.chi_max}, {"points", cc.grid.points},
                        {"placement", "cell-centers"}};
    out["initial_fraction"] = cc.initial_fraction;
    out["parallel"] = cc.parallel;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j = {{"target", r.target},
                            {"seed", r.seed},
                            {"initial_samples", r.choice.initial_samples},
                            {"min_cluster_size", r.choice.min_cluster_size},
                            {"samples", r.choice.samples},
                            {"search_evaluations", r.choice.evaluations}};
        if (r.cag) j["cag"] = to_json(*r.cag, timed);
        if (r.uniform) j["uniform"] = to_json(*r.uniform, timed);
        if (!r.error.empty()) j["error"] = r.error;
        arr.push_back(std::move(j));
    }
    out["rows"] = std::move(arr);
    return out;
}

/// One line per method and row: sample size, seed, method and the three error measures.
inline std::string report_to_csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream os;
    os << "sample_size,seed,method,max_relative_error_percent,case_relative_error_percent,mean_square_error\n";
    for (const auto& r : rows) {
        for (const auto* rep : {r.uniform ? &*r.uniform : nullptr, r.cag ? &*r.cag : nullptr}) {
            if (!rep) continue;
            os << rep->samples << ',' << r.seed << ',' << rep->method << ','
               << detail::format_double(100.0 * rep->max_relative_error) << ','
               << detail::format_double(100.0 * rep->case_relative_error) << ',' << detail::format_double(rep->mse)
               << '\n';
        }
    }
    return os.str();
}

} // namespace cag

#endif // CAG_BENCH_HPP
