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

#ifndef CAG_PIPELINE_HPP
#define CAG_PIPELINE_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cag/base64.hpp"
#include "cag/classify.hpp"
#include "cag/config.hpp"
#include "cag/dataset.hpp"
#include "cag/gpr.hpp"
#include "cag/reduction.hpp"
#include "cag/sampling.hpp"
#include "cag/solvers.hpp"

namespace cag {

inline constexpr int model_format_version = 1;

/// Training summary for one cluster, exported alongside the model.
struct ClusterTraining {
    std::size_t cluster = 0;
    std::size_t samples = 0;
    std::size_t rank = 0;
    std::size_t requested_rank = 0;
    double initial_objective = 0.0;
    double objective = 0.0;
    std::size_t iterations = 0;
    std::string stop_reason;
    double jitter = 0.0;
};

/// K sub-regressors plus the KNN routing data.
struct TrainedModel {
    std::string method = "cag";
    Eigen::Index field_size = 0;
    std::vector<SubRegressor> regressors;  ///< indexed by cluster id
    ClassifierData classifier;
    CagConfig config;
    std::vector<ClusterTraining> training;
    std::vector<SamplingRound> history;

    [[nodiscard]] std::size_t clusters() const noexcept { return regressors.size(); }

    [[nodiscard]] std::size_t samples() const noexcept { return classifier.inputs.size(); }

    [[nodiscard]] std::vector<std::size_t> cluster_sizes() const {
        std::vector<std::size_t> out;
        for (const auto& r : regressors) out.push_back(r.size());
        return out;
    }
};

/// Restored fields in query order, with the latent-space variance and routing per query.
struct PredictionResult {
    FieldMatrix fields;               ///< N x M*
    Eigen::VectorXd variance;         ///< latent-space posterior variance per query
    std::vector<std::size_t> clusters;

    [[nodiscard]] std::size_t size() const noexcept { return clusters.size(); }
};

/// Trains the multi-pattern regressor on an already clustered dataset.
inline TrainedModel train_on_clusters(const ClusteredDataset& cd, const CagConfig& cfg, std::string method = "cag") {
    if (cd.size() == 0) throw InvalidParameter("train: empty dataset");
    const auto sizes = cd.cluster_sizes();
    std::vector<ConvergenceFailure::Deficit> deficits;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (sizes[k] < cfg.sampling.min_cluster_size) deficits.push_back({k, sizes[k]});
    }
    if (!deficits.empty()) {
        throw ConvergenceFailure("train: clusters below Q_min = " + std::to_string(cfg.sampling.min_cluster_size),
                                 std::move(deficits));
    }

    TrainedModel model;
    model.method = std::move(method);
    model.config = cfg;
    model.field_size = cd.base().field_size();
    model.classifier.inputs = cd.base().inputs();
    model.classifier.labels = cd.labels();
    model.classifier.clusters = cd.clusters();
    model.classifier.k_knn = std::min(cfg.k_knn, cd.size());
    for (std::size_t k = 0; k < cd.clusters(); ++k) {
        const LabeledDataset part = cd.cluster(k);
        Reduction red = fit_reduce(part.fields(), cfg.reduced_rank);
        OptimizerConfig opt = cfg.optimizer;
        opt.seed = derive_seed(cfg.optimizer.seed, k);
        auto trained = train_subregressor(part.inputs(), std::move(red.basis), std::move(red.latent), opt);
        const auto& best = trained.fit;
        ClusterTraining rep;
        rep.cluster = k;
        rep.samples = part.size();
        rep.rank = trained.regressor.basis().rank();
        rep.requested_rank = cfg.reduced_rank;
        rep.initial_objective = best.initial_value;
        rep.objective = best.value;
        if (!best.runs.empty()) {
            rep.iterations = best.runs[best.best_run].iterations;
            rep.stop_reason = to_string(best.runs[best.best_run].reason);
        } else {
            rep.stop_reason = "max_iter";
        }
        rep.jitter = trained.regressor.jitter();
        model.training.push_back(std::move(rep));
        model.regressors.push_back(std::move(trained.regressor));
    }
    return model;
}

/// Offline stage from a solver: adaptive sampling, per-cluster reduction and GP training.
inline TrainedModel offline_train(const Solver& solver, const CagConfig& cfg) {
    cfg.validate();
    auto sampled = adaptive_generate(solver, cfg.sampling);
    TrainedModel model = train_on_clusters(sampled.dataset, cfg);
    model.history = std::move(sampled.history);
    return model;
}

/// Offline stage from an externally labeled dataset.
inline TrainedModel offline_train(const ClusteredDataset& cd, const CagConfig& cfg) {
    cfg.optimizer.validate();
    return train_on_clusters(cd, cfg);
}

/// Clusters an unlabeled dataset in one K-means pass (no adaptive insertion without a solver).
inline ClusteredDataset cluster_dataset(const LabeledDataset& ds, const SamplingConfig& cfg) {
    auto km = kmeans(ds.fields(), cfg.clusters, cfg.kmeans, derive_seed(cfg.seed, 1000));
    return {ds, std::move(km.labels), cfg.clusters};
}

/// K = 1 model over a uniform grid of `samples` points: the comparison baseline.
inline TrainedModel train_uniform_baseline(const Solver& solver, double chi_min, double chi_max, std::size_t samples,
                                           const CagConfig& cfg) {
    LabeledDataset ds = label_samples(solver, initial_grid(chi_min, chi_max, samples));
    CagConfig base = cfg;
    base.sampling.chi_min = chi_min;
    base.sampling.chi_max = chi_max;
    base.sampling.initial_samples = samples;
    base.sampling.clusters = 1;
    base.sampling.min_cluster_size = 1;
    std::vector<std::size_t> labels(ds.size(), 0);
    return train_on_clusters(ClusteredDataset(std::move(ds), std::move(labels), 1), base, "uniform");
}

/// Online stage: classify, predict per cluster, restore with that cluster's basis.
inline PredictionResult online_predict(const TrainedModel& model, std::span<const double> queries) {
    PredictionResult out;
    const auto q = static_cast<Eigen::Index>(queries.size());
    out.fields.resize(model.field_size, q);
    out.variance.resize(q);
    if (q == 0) return out;
    const QueryPartition part = partition_queries(model.classifier, queries);
    out.clusters = part.assignment;
    for (const auto& grp : part.groups) {
        const SubRegressor& sub = model.regressors.at(grp.cluster);
        const LatentPrediction lp = sub.predict(grp.queries);
        const FieldMatrix restored = restore(sub.basis(), lp.mean);
        for (std::size_t j = 0; j < grp.positions.size(); ++j) {
            const auto col = static_cast<Eigen::Index>(grp.positions[j]);
            out.fields.col(col) = restored.col(static_cast<Eigen::Index>(j));
            out.variance[col] = lp.variance[static_cast<Eigen::Index>(j)];
        }
    }
    return out;
}

/// Approximate per-entry field variance: sum_r Lambda(:, r)^2 * var. Ignores latent cross-covariance.
inline FieldMatrix field_variance(const TrainedModel& model, const PredictionResult& pred) {
    FieldMatrix out(model.field_size, static_cast<Eigen::Index>(pred.size()));
    for (std::size_t j = 0; j < pred.size(); ++j) {
        const auto& basis = model.regressors.at(pred.clusters[j]).basis();
        out.col(static_cast<Eigen::Index>(j)) =
            basis.vectors.array().square().rowwise().sum().matrix() * pred.variance[static_cast<Eigen::Index>(j)];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model file: versioned JSON envelope, matrices as base64 little-endian doubles.

namespace detail {

inline nlohmann::json pack_matrix(const Eigen::MatrixXd& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", base64::encode_doubles(m.data(), static_cast<std::size_t>(m.size()))}};
}

inline Eigen::MatrixXd unpack_matrix(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = base64::decode_doubles(j.at("data").get<std::string>());
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
        throw ParseError("model: matrix payload size does not match its shape");
    }
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

inline nlohmann::json pack_vector(const std::vector<double>& v) { return base64::encode_doubles(v.data(), v.size()); }

inline std::vector<double> unpack_vector(const nlohmann::json& j) { return base64::decode_doubles(j.get<std::string>()); }

inline nlohmann::json to_json(const ClusterTraining& t) {
    return {{"cluster", t.cluster},
            {"samples", t.samples},
            {"rank", t.rank},
            {"requested_rank", t.requested_rank},
            {"initial_objective", t.initial_objective},
            {"objective", t.objective},
            {"iterations", t.iterations},
            {"stop_reason", t.stop_reason},
            {"jitter", t.jitter}};
}

inline ClusterTraining training_from_json(const nlohmann::json& j) {
    ClusterTraining t;
    t.cluster = j.at("cluster").get<std::size_t>();
    t.samples = j.at("samples").get<std::size_t>();
    t.rank = j.at("rank").get<std::size_t>();
    t.requested_rank = j.at("requested_rank").get<std::size_t>();
    t.initial_objective = j.at("initial_objective").get<double>();
    t.objective = j.at("objective").get<double>();
    t.iterations = j.at("iterations").get<std::size_t>();
    t.stop_reason = j.at("stop_reason").get<std::string>();
    t.jitter = j.at("jitter").get<double>();
    return t;
}

} // namespace detail

inline nlohmann::json history_to_json(const std::vector<SamplingRound>& history) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : history) {
        out.push_back({{"round", r.round}, {"samples", r.samples}, {"cluster_sizes", r.cluster_sizes}, {"inserted", r.inserted}});
    }
    return out;
}

inline nlohmann::json model_to_json(const TrainedModel& model) {
    nlohmann::json regs = nlohmann::json::array();
    for (std::size_t k = 0; k < model.regressors.size(); ++k) {
        const auto& r = model.regressors[k];
        const auto& p = r.params();
        regs.push_back({{"cluster", k},
                        {"inputs", detail::pack_vector(r.inputs())},
                        {"latent", detail::pack_matrix(r.latent())},
                        {"basis",
                         {{"vectors", detail::pack_matrix(r.basis().vectors)},
                          {"singular_values", detail::pack_matrix(r.basis().singular_values)},
                          {"requested", r.basis().requested}}},
                        {"hyperparams",
                         {{"length_scale", p.length_scale}, {"signal_sd", p.signal_sd}, {"noise_sd", p.noise_sd}}},
                        {"jitter", r.jitter()}});
    }
    nlohmann::json training = nlohmann::json::array();
    for (const auto& t : model.training) training.push_back(detail::to_json(t));
    std::vector<std::size_t> labels = model.classifier.labels;
    return {{"format", "cag-model"},
            {"version", model_format_version},
            {"method", model.method},
            {"field_size", model.field_size},
            {"config", to_json(model.config)},
            {"classifier",
             {{"inputs", detail::pack_vector(model.classifier.inputs)},
              {"labels", labels},
              {"clusters", model.classifier.clusters},
              {"k_knn", model.classifier.k_knn}}},
            {"regressors", std::move(regs)},
            {"training", std::move(training)},
            {"history", history_to_json(model.history)}};
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", std::string{}) != "cag-model") {
        throw ParseError("model: not a cag-model document");
    }
    if (!j.contains("version") || !j.at("version").is_number_integer()) {
        throw ParseError("model: missing integer format version");
    }
    if (j.at("version").get<int>() != model_format_version) {
        throw VersionMismatch("model: unsupported format version (expected " + std::to_string(model_format_version) + ")");
    }
    try {
        TrainedModel m;
        m.method = j.at("method").get<std::string>();
        m.field_size = j.at("field_size").get<Eigen::Index>();
        update_from_json(m.config, j.at("config"));
        const auto& c = j.at("classifier");
        m.classifier.inputs = detail::unpack_vector(c.at("inputs"));
        m.classifier.labels = c.at("labels").get<std::vector<std::size_t>>();
        m.classifier.clusters = c.at("clusters").get<std::size_t>();
        m.classifier.k_knn = c.at("k_knn").get<std::size_t>();
        m.classifier.validate();
        for (const auto& r : j.at("regressors")) {
            ReducedBasis basis;
            basis.vectors = detail::unpack_matrix(r.at("basis").at("vectors"));
            basis.singular_values = detail::unpack_matrix(r.at("basis").at("singular_values"));
            basis.requested = r.at("basis").at("requested").get<std::size_t>();
            if (basis.vectors.rows() != m.field_size) throw ParseError("model: basis length differs from field size");
            const auto& h = r.at("hyperparams");
            Hyperparams p{h.at("length_scale").get<double>(), h.at("signal_sd").get<double>(),
                          h.at("noise_sd").get<double>()};
            m.regressors.emplace_back(detail::unpack_vector(r.at("inputs")), std::move(basis),
                                      detail::unpack_matrix(r.at("latent")), p);
        }
        if (m.regressors.size() != m.classifier.clusters) {
            throw ParseError("model: classifier references clusters without a regressor");
        }
        for (const auto& t : j.at("training")) m.training.push_back(detail::training_from_json(t));
        for (const auto& h : j.at("history")) {
            SamplingRound r;
            r.round = h.at("round").get<std::size_t>();
            r.samples = h.at("samples").get<std::size_t>();
            r.cluster_sizes = h.at("cluster_sizes").get<std::vector<std::size_t>>();
            r.inserted = h.at("inserted").get<std::vector<double>>();
            m.history.push_back(std::move(r));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    } catch (const DimensionMismatch& e) {
        throw ParseError(std::string("model: ") + e.what());
    } catch (const InvalidParameter& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
}

inline void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    detail::write_file(path, model_to_json(model).dump(1) + "\n");
}

inline TrainedModel load_model(const std::filesystem::path& path) {
    const auto text = detail::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
    return model_from_json(j);
}

} // namespace cag

#endif // CAG_PIPELINE_HPP
