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

#ifndef CAG_GPR_HPP
#define CAG_GPR_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "cag/dataset.hpp"
#include "cag/error.hpp"
#include "cag/optimize.hpp"
#include "cag/reduction.hpp"
#include "cag/sampling.hpp"

namespace cag {

/// SE kernel hyperparameters theta = (l, sigma_f, sigma_n).
struct Hyperparams {
    double length_scale = 1.0;
    double signal_sd = 1.0;
    double noise_sd = 1e-3;

    /// sigma_n may be zero (jitter only); the optimizer itself always returns it positive.
    void validate() const {
        if (!(length_scale > 0.0) || !std::isfinite(length_scale)) throw InvalidParameter("gpr: length scale must be positive");
        if (!(signal_sd > 0.0) || !std::isfinite(signal_sd)) throw InvalidParameter("gpr: signal sd must be positive");
        if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw InvalidParameter("gpr: noise sd must be non-negative");
    }

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

inline double kernel(double a, double b, const Hyperparams& h) noexcept {
    const double r = (a - b) / h.length_scale;
    return h.signal_sd * h.signal_sd * std::exp(-0.5 * r * r);
}

inline Eigen::MatrixXd cov_matrix(std::span<const double> xa, std::span<const double> xb, const Hyperparams& h) {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(xa.size()), static_cast<Eigen::Index>(xb.size()));
    for (std::size_t j = 0; j < xb.size(); ++j) {
        for (std::size_t i = 0; i < xa.size(); ++i) {
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kernel(xa[i], xb[j], h);
        }
    }
    return k;
}

/// Diagonal jitter, as a fraction of sigma_f^2, starts here and grows tenfold up to the ceiling.
inline constexpr double jitter_floor = 1e-10;
inline constexpr double jitter_ceiling = 1e-6;

/// Cholesky factor of G = K + (sigma_n^2 + jitter sigma_f^2) I.
struct CovarianceFactor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = jitter_floor;
};

inline CovarianceFactor factorize_covariance(const Eigen::MatrixXd& k, const Hyperparams& h) {
    const double sf2 = h.signal_sd * h.signal_sd;
    const double sn2 = h.noise_sd * h.noise_sd;
    CovarianceFactor f;
    for (double jitter = jitter_floor; jitter <= jitter_ceiling * 1.0000001; jitter *= 10.0) {
        Eigen::MatrixXd g = k;
        g.diagonal().array() += sn2 + jitter * sf2;
        f.llt.compute(g);
        if (f.llt.info() == Eigen::Success && f.llt.matrixLLT().diagonal().minCoeff() > 0.0
            && f.llt.matrixLLT().allFinite()) {
            f.jitter = jitter;
            return f;
        }
    }
    throw NumericalFailure("gpr: covariance matrix not positive definite even with jitter "
                           + std::to_string(jitter_ceiling));
}

struct NlmlEvaluation {
    double value = 0.0;
    Eigen::Vector3d gradient = Eigen::Vector3d::Zero();  ///< d/d(l, sigma_f, sigma_n)
    double jitter = jitter_floor;
};

/// Summed negative log marginal likelihood over the latent rows of `latent` (R x M),
/// all rows sharing one theta, plus its analytic gradient when requested.
inline NlmlEvaluation nlml_evaluate(const Hyperparams& h, std::span<const double> xs, const Eigen::MatrixXd& latent,
                                    bool with_gradient) {
    h.validate();
    const auto m = static_cast<Eigen::Index>(xs.size());
    if (m == 0) throw InvalidParameter("nlml: no training inputs");
    if (latent.cols() != m) throw DimensionMismatch("nlml: latent column count differs from input count");
    const auto rows = static_cast<double>(latent.rows());

    const Eigen::MatrixXd k = cov_matrix(xs, xs, h);
    const CovarianceFactor f = factorize_covariance(k, h);
    const auto& llt = f.llt;

    NlmlEvaluation out;
    out.jitter = f.jitter;
    const Eigen::MatrixXd half = llt.matrixL().solve(latent.transpose());  // L^{-1} Phi^T
    const double data = half.squaredNorm();
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    out.value = 0.5 * data + 0.5 * rows * logdet + 0.5 * rows * static_cast<double>(m) * std::log(2.0 * std::numbers::pi);
    if (!with_gradient) return out;

    // dQ/dtheta = 1/2 tr((R G^{-1} - A A^T) dG/dtheta), A = G^{-1} Phi^T
    const Eigen::MatrixXd alpha = llt.solve(latent.transpose());
    const Eigen::MatrixXd g_inv = llt.solve(Eigen::MatrixXd::Identity(m, m));
    const Eigen::MatrixXd w = rows * g_inv - alpha * alpha.transpose();

    const double ell = h.length_scale;
    const double sf = h.signal_sd;
    double d_ell = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const double dx = xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(j)];
            d_ell += w(i, j) * k(i, j) * dx * dx;
        }
    }
    out.gradient[0] = 0.5 * d_ell / (ell * ell * ell);
    // dG/dsigma_f = 2 (K + jitter sigma_f^2 I) / sigma_f
    out.gradient[1] = ((w.cwiseProduct(k)).sum() + f.jitter * sf * sf * w.trace()) / sf;
    // dG/dsigma_n = 2 sigma_n I
    out.gradient[2] = h.noise_sd * w.trace();
    return out;
}

inline double nlml(const Hyperparams& h, std::span<const double> xs, const Eigen::MatrixXd& latent) {
    return nlml_evaluate(h, xs, latent, false).value;
}

inline Eigen::Vector3d nlml_grad(const Hyperparams& h, std::span<const double> xs, const Eigen::MatrixXd& latent) {
    return nlml_evaluate(h, xs, latent, true).gradient;
}

namespace detail {

inline Hyperparams from_log(const Eigen::VectorXd& u) { return {std::exp(u[0]), std::exp(u[1]), std::exp(u[2])}; }

inline Eigen::VectorXd to_log(const Hyperparams& h) {
    Eigen::VectorXd u(3);
    u << std::log(h.length_scale), std::log(h.signal_sd), std::log(h.noise_sd);
    return u;
}

/// NLML over u = log(theta); dQ/du = theta * dQ/dtheta.
/// Smallest gap between distinct sorted inputs; `fallback` when there is none.
inline double min_spacing(std::span<const double> xs, double fallback) {
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double d = v[i] - v[i - 1];
        if (d > 0.0) best = std::min(best, d);
    }
    return std::isfinite(best) ? best : fallback;
}

struct LogNlmlProblem {
    std::span<const double> xs;
    const Eigen::MatrixXd& latent;
    std::optional<double> fixed_noise;  ///< when set, u holds only (log l, log sigma_f)
    /// Upper bound on log sigma_f. With sigma_n pinned, the jitter (relative to sigma_f^2) would
    /// otherwise act as noise once sigma_f grows without limit.
    double log_signal_max = std::numeric_limits<double>::infinity();

    Hyperparams params(const Eigen::VectorXd& u) const {
        if (fixed_noise) return {std::exp(u[0]), std::exp(u[1]), *fixed_noise};
        return from_log(u);
    }

    Eigen::VectorXd start(const Hyperparams& h) const {
        if (!fixed_noise) return to_log(h);
        return Eigen::Vector2d(std::log(h.length_scale), std::log(h.signal_sd));
    }

    double value(const Eigen::VectorXd& u) const {
        if (u[1] > log_signal_max) return std::numeric_limits<double>::infinity();
        return nlml_evaluate(params(u), xs, latent, false).value;
    }

    double value_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
        if (u[1] > log_signal_max) throw NumericalFailure("nlml: sigma_f above its bound");
        const Hyperparams h = params(u);
        const auto e = nlml_evaluate(h, xs, latent, true);
        grad.resize(u.size());
        grad[0] = e.gradient[0] * h.length_scale;
        grad[1] = e.gradient[1] * h.signal_sd;
        if (!fixed_noise) grad[2] = e.gradient[2] * h.noise_sd;
        return e.value;
    }
};

} // namespace detail

/// Data-driven starting point: l0 = span / sqrt(M), sigma_f0 = sd of latent entries, sigma_n0 = 1e-3 sigma_f0.
inline Hyperparams default_initial_hyperparams(std::span<const double> xs, const Eigen::MatrixXd& latent) {
    Hyperparams h;
    if (xs.empty()) throw InvalidParameter("gpr: no training inputs");
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    const double span = *hi - *lo;
    h.length_scale = span > 0.0 ? span / std::sqrt(static_cast<double>(xs.size())) : std::max(std::abs(*lo), 1.0);
    double sd = 0.0;
    if (latent.size() > 0) {
        const double mean = latent.mean();
        sd = std::sqrt((latent.array() - mean).square().mean());
    }
    h.signal_sd = std::max(sd, 1e-8);
    h.noise_sd = 1e-3 * h.signal_sd;
    return h;
}

/// One optimization run from one starting point.
struct OptimizationRun {
    Hyperparams start;
    Hyperparams result;
    double start_value = 0.0;
    double value = 0.0;
    std::size_t iterations = 0;
    StopReason reason = StopReason::max_iter;
    std::vector<double> trace;
};

struct HyperparamFit {
    Hyperparams params;
    double value = 0.0;
    double initial_value = 0.0;
    std::size_t best_run = 0;
    std::vector<OptimizationRun> runs;
};

/// Minimizes the summed NLML in log-parameter space, from `init` plus `restarts - 1`
/// seeded perturbations of up to +-1 in each log coordinate; keeps the lowest objective.
inline HyperparamFit optimize_hyperparams(std::span<const double> xs, const Eigen::MatrixXd& latent,
                                          const Hyperparams& init, const OptimizerConfig& cfg) {
    init.validate();
    if (!cfg.fix_noise && !(init.noise_sd > 0.0)) {
        throw InvalidParameter("optimize_hyperparams: initial sigma_n must be positive");
    }
    cfg.validate();
    detail::LogNlmlProblem problem{xs, latent, {}};
    if (cfg.fix_noise) {
        problem.fixed_noise = init.noise_sd;
        const double scale = latent.size() ? latent.cwiseAbs().maxCoeff() : 0.0;
        problem.log_signal_max = std::log(1e3 * std::max({scale, init.signal_sd, 1e-300}));
    }
    HyperparamFit fit;
    fit.initial_value = problem.value(problem.start(init));
    fit.params = init;
    fit.value = fit.initial_value;
    if (cfg.max_iter == 0) return fit;

    std::mt19937_64 rng(derive_seed(cfg.seed, 77));
    std::uniform_real_distribution<double> jiggle(-1.0, 1.0);
    const std::size_t restarts = std::max<std::size_t>(cfg.restarts, 1);
    const double log_ell_floor = std::log(detail::min_spacing(xs, init.length_scale));
    for (std::size_t r = 0; r < restarts; ++r) {
        Eigen::VectorXd u0 = problem.start(init);
        if (r > 0) {
            // Length-scale ladder from init down to the finest input spacing; jiggle the rest.
            const double frac = static_cast<double>(r) / static_cast<double>(restarts - 1);
            u0[0] += frac * std::min(0.0, log_ell_floor - u0[0]);
            for (Eigen::Index c = 1; c < u0.size(); ++c) u0[c] += jiggle(rng);
        }
        OptimizationRun run;
        run.start = problem.params(u0);
        try {
            auto res = minimize_cg(problem, u0, cfg);
            run.result = problem.params(res.x);
            run.start_value = res.trace.front();
            run.value = res.value;
            run.iterations = res.iterations;
            run.reason = res.reason;
            run.trace = std::move(res.trace);
        } catch (const NumericalFailure&) {
            if (r == 0) throw;
            continue;  // a perturbed start may be infeasible
        }
        if (run.value < fit.value) {
            fit.value = run.value;
            fit.params = run.result;
            fit.best_run = fit.runs.size();
        }
        fit.runs.push_back(std::move(run));
    }
    return fit;
}

/// Posterior mean of every latent row and the shared per-query variance.
struct LatentPrediction {
    Eigen::MatrixXd mean;      ///< R_eff x M*
    Eigen::VectorXd variance;  ///< M*, clamped to >= 0
};

/// Trained GP for one cluster: inputs, latent targets, theta, cached factorization, basis.
class SubRegressor {
public:
    SubRegressor() = default;

    /// Builds the posterior for a fixed theta.
    SubRegressor(ParameterGrid inputs, ReducedBasis basis, Eigen::MatrixXd latent, const Hyperparams& params)
        : inputs_(std::move(inputs)), basis_(std::move(basis)), latent_(std::move(latent)), params_(params) {
        params_.validate();
        if (inputs_.empty()) throw InvalidParameter("sub-regressor: no training inputs");
        if (latent_.cols() != static_cast<Eigen::Index>(inputs_.size())) {
            throw DimensionMismatch("sub-regressor: latent columns differ from input count");
        }
        if (latent_.rows() != static_cast<Eigen::Index>(basis_.rank())) {
            throw DimensionMismatch("sub-regressor: latent rows differ from basis rank");
        }
        const Eigen::MatrixXd k = cov_matrix(inputs_, inputs_, params_);
        factor_ = factorize_covariance(k, params_);
        alpha_ = factor_.llt.solve(latent_.transpose());
    }

    [[nodiscard]] const ParameterGrid& inputs() const noexcept { return inputs_; }
    [[nodiscard]] const ReducedBasis& basis() const noexcept { return basis_; }
    [[nodiscard]] const Eigen::MatrixXd& latent() const noexcept { return latent_; }
    [[nodiscard]] const Hyperparams& params() const noexcept { return params_; }
    [[nodiscard]] double jitter() const noexcept { return factor_.jitter; }
    [[nodiscard]] std::size_t size() const noexcept { return inputs_.size(); }

    [[nodiscard]] LatentPrediction predict(std::span<const double> queries) const {
        LatentPrediction out;
        const auto q = static_cast<Eigen::Index>(queries.size());
        out.mean.resize(latent_.rows(), q);
        out.variance.resize(q);
        if (q == 0) return out;
        const Eigen::MatrixXd ks = cov_matrix(inputs_, queries, params_);  // M x M*
        out.mean = (ks.transpose() * alpha_).transpose();
        const Eigen::MatrixXd v = factor_.llt.matrixL().solve(ks);
        const double sf2 = params_.signal_sd * params_.signal_sd;
        out.variance = (sf2 - v.colwise().squaredNorm().array()).cwiseMax(0.0).matrix().transpose();
        return out;
    }

private:
    ParameterGrid inputs_;
    ReducedBasis basis_;
    Eigen::MatrixXd latent_;
    Hyperparams params_;
    CovarianceFactor factor_;
    Eigen::MatrixXd alpha_;  // G^{-1} Phi^T, M x R
};

struct TrainedSubRegressor {
    SubRegressor regressor;
    HyperparamFit fit;
};

/// Optimizes one theta jointly over every latent row, then caches the factorization.
inline TrainedSubRegressor train_subregressor(ParameterGrid inputs, ReducedBasis basis, Eigen::MatrixXd latent,
                                              const OptimizerConfig& cfg) {
    Hyperparams init = default_initial_hyperparams(inputs, latent);
    if (cfg.fix_noise) init.noise_sd = 0.0;  // jitter floor only
    auto fit = optimize_hyperparams(inputs, latent, init, cfg);
    SubRegressor sub(std::move(inputs), std::move(basis), std::move(latent), fit.params);
    return {std::move(sub), std::move(fit)};
}

inline LatentPrediction predict(const SubRegressor& sub, std::span<const double> queries) {
    return sub.predict(queries);
}

} // namespace cag

#endif // CAG_GPR_HPP
