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

#ifndef CAG_CONFIG_HPP
#define CAG_CONFIG_HPP

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "cag/error.hpp"
#include "cag/optimize.hpp"
#include "cag/sampling.hpp"
#include "cag/solvers.hpp"

namespace cag {

/// Settings shared by offline training and the baseline.
struct CagConfig {
    SamplingConfig sampling;
    std::size_t reduced_rank = 50;  ///< requested R; clamped per cluster
    std::size_t k_knn = 3;
    OptimizerConfig optimizer;

    void validate() const {
        sampling.validate();
        optimizer.validate();
        if (reduced_rank < 1) throw InvalidParameter("config: reduced rank must be at least 1");
        if (k_knn < 1) throw InvalidParameter("config: k_knn must be at least 1");
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw InvalidParameter(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw InvalidParameter(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidParameter(where + ": key '" + key + "' has the wrong type");
    }
}

} // namespace detail

inline nlohmann::json to_json(const KMeansOptions& k) {
    nlohmann::json j = {{"max_iter", k.max_iter}, {"restarts", k.restarts}};
    j["tol"] = k.tol ? nlohmann::json(*k.tol) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json to_json(const SamplingConfig& s) {
    return {{"chi_min", s.chi_min},          {"chi_max", s.chi_max},
            {"m0", s.initial_samples},       {"k", s.clusters},
            {"q_min", s.min_cluster_size},   {"kmeans", to_json(s.kmeans)},
            {"outer_max_iter", s.outer_max_iter}, {"seed", s.seed}};
}

inline nlohmann::json to_json(const OptimizerConfig& o) {
    return {{"max_iter", o.max_iter},
            {"grad_tol", o.grad_tol},
            {"f_tol", o.f_tol},
            {"initial_step", o.initial_step},
            {"backtrack", o.backtrack},
            {"sufficient_decrease", o.sufficient_decrease},
            {"max_coordinate_step", o.max_coordinate_step},
            {"max_backtracks", o.max_backtracks},
            {"restarts", o.restarts},
            {"seed", o.seed},
            {"fix_noise", o.fix_noise}};
}

inline nlohmann::json to_json(const CagConfig& c) {
    return {{"sampling", to_json(c.sampling)},
            {"reduced_rank", c.reduced_rank},
            {"k_knn", c.k_knn},
            {"optimizer", to_json(c.optimizer)}};
}

inline void update_from_json(KMeansOptions& k, const nlohmann::json& j) {
    const std::string where = "config.sampling.kmeans";
    detail::reject_unknown_keys(j, {"tol", "max_iter", "restarts"}, where);
    if (j.contains("tol")) {
        if (j.at("tol").is_null()) {
            k.tol.reset();
        } else {
            double t = 0.0;
            detail::read_key(j, "tol", t, where);
            k.tol = t;
        }
    }
    detail::read_key(j, "max_iter", k.max_iter, where);
    detail::read_key(j, "restarts", k.restarts, where);
}

inline void update_from_json(SamplingConfig& s, const nlohmann::json& j) {
    const std::string where = "config.sampling";
    detail::reject_unknown_keys(j, {"chi_min", "chi_max", "m0", "k", "q_min", "kmeans", "outer_max_iter", "seed"}, where);
    detail::read_key(j, "chi_min", s.chi_min, where);
    detail::read_key(j, "chi_max", s.chi_max, where);
    detail::read_key(j, "m0", s.initial_samples, where);
    detail::read_key(j, "k", s.clusters, where);
    detail::read_key(j, "q_min", s.min_cluster_size, where);
    detail::read_key(j, "outer_max_iter", s.outer_max_iter, where);
    detail::read_key(j, "seed", s.seed, where);
    if (j.contains("kmeans")) update_from_json(s.kmeans, j.at("kmeans"));
}

inline void update_from_json(OptimizerConfig& o, const nlohmann::json& j) {
    const std::string where = "config.optimizer";
    detail::reject_unknown_keys(j,
                                {"max_iter", "grad_tol", "f_tol", "initial_step", "backtrack", "sufficient_decrease",
                                 "max_coordinate_step", "max_backtracks", "restarts", "seed", "fix_noise"},
                                where);
    detail::read_key(j, "max_iter", o.max_iter, where);
    detail::read_key(j, "grad_tol", o.grad_tol, where);
    detail::read_key(j, "f_tol", o.f_tol, where);
    detail::read_key(j, "initial_step", o.initial_step, where);
    detail::read_key(j, "backtrack", o.backtrack, where);
    detail::read_key(j, "sufficient_decrease", o.sufficient_decrease, where);
    detail::read_key(j, "max_coordinate_step", o.max_coordinate_step, where);
    detail::read_key(j, "max_backtracks", o.max_backtracks, where);
    detail::read_key(j, "restarts", o.restarts, where);
    detail::read_key(j, "seed", o.seed, where);
    detail::read_key(j, "fix_noise", o.fix_noise, where);
}

inline void update_from_json(CagConfig& c, const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"sampling", "reduced_rank", "k_knn", "optimizer"}, "config");
    if (j.contains("sampling")) update_from_json(c.sampling, j.at("sampling"));
    if (j.contains("optimizer")) update_from_json(c.optimizer, j.at("optimizer"));
    detail::read_key(j, "reduced_rank", c.reduced_rank, "config");
    detail::read_key(j, "k_knn", c.k_knn, "config");
}

/// Named built-in solver plus its parameters.
struct SolverSpec {
    std::string name = "spring";
    SpringConfig spring;

    void validate() const {
        if (name != "wavelet" && name != "spring") {
            throw InvalidParameter("solver: unknown name '" + name + "' (expected wavelet or spring)");
        }
        if (name == "spring") spring.validate();
    }
};

inline nlohmann::json to_json(const SolverSpec& s) {
    nlohmann::json j = {{"name", s.name}};
    if (s.name == "spring") {
        j["mass"] = s.spring.mass;
        j["stiffness"] = s.spring.stiffness;
        j["initial_displacement"] = s.spring.initial_displacement;
        j["horizon"] = s.spring.horizon;
        j["time_samples"] = s.spring.time_samples;
    }
    return j;
}

inline void update_from_json(SolverSpec& s, const nlohmann::json& j) {
    const std::string where = "config.solver";
    detail::reject_unknown_keys(j, {"name", "mass", "stiffness", "initial_displacement", "horizon", "time_samples"},
                                where);
    detail::read_key(j, "name", s.name, where);
    detail::read_key(j, "mass", s.spring.mass, where);
    detail::read_key(j, "stiffness", s.spring.stiffness, where);
    detail::read_key(j, "initial_displacement", s.spring.initial_displacement, where);
    detail::read_key(j, "horizon", s.spring.horizon, where);
    detail::read_key(j, "time_samples", s.spring.time_samples, where);
}

inline Solver make_solver(const SolverSpec& s) {
    s.validate();
    if (s.name == "wavelet") return make_wavelet_solver();
    return make_spring_solver(s.spring);
}

/// The wavelet setup: chi in [-15, 15], K = 3, Q_min = 5, M0 = 5.
inline CagConfig wavelet_defaults() {
    CagConfig c;
    c.sampling.chi_min = -15.0;
    c.sampling.chi_max = 15.0;
    c.sampling.initial_samples = 5;
    c.sampling.clusters = 3;
    c.sampling.min_cluster_size = 5;
    c.reduced_rank = 1;
    return c;
}

/// The damped-spring setup: zeta in [0, 2], K = 3, Q_min = 4, M0 = 5, R = 50.
inline CagConfig spring_defaults() {
    CagConfig c;
    c.sampling.chi_min = 0.0;
    c.sampling.chi_max = 2.0;
    c.sampling.initial_samples = 5;
    c.sampling.clusters = 3;
    c.sampling.min_cluster_size = 4;
    c.reduced_rank = 50;
    return c;
}

} // namespace cag

#endif // CAG_CONFIG_HPP
