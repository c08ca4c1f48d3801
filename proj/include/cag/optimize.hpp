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

#ifndef CAG_OPTIMIZE_HPP
#define CAG_OPTIMIZE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cag/error.hpp"

namespace cag {

struct OptimizerConfig {
    std::size_t max_iter = 200;
    double grad_tol = 1e-6;
    double f_tol = 1e-9;
    double initial_step = 1.0;
    double backtrack = 0.5;
    double sufficient_decrease = 1e-4;
    /// Largest move of any coordinate tried by one line search.
    double max_coordinate_step = 2.0;
    std::size_t max_backtracks = 50;
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
    /// Hold sigma_n at its initial value (which may be 0) and optimize only l and sigma_f.
    bool fix_noise = false;

    void validate() const {
        if (!(grad_tol > 0.0) || !(f_tol > 0.0)) throw InvalidParameter("optimizer: tolerances must be positive");
        if (!(backtrack > 0.0 && backtrack < 1.0)) throw InvalidParameter("optimizer: backtrack factor must be in (0, 1)");
        if (!(initial_step > 0.0)) throw InvalidParameter("optimizer: initial step must be positive");
        if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0)) {
            throw InvalidParameter("optimizer: sufficient-decrease constant must be in (0, 1)");
        }
        if (!(max_coordinate_step > 0.0)) throw InvalidParameter("optimizer: max coordinate step must be positive");
    }
};

enum class StopReason { gradient, objective, max_iter, line_search };

inline const char* to_string(StopReason r) noexcept {
    switch (r) {
        case StopReason::gradient: return "gradient";
        case StopReason::objective: return "objective";
        case StopReason::max_iter: return "max_iter";
        case StopReason::line_search: return "line_search";
    }
    return "unknown";
}

struct MinimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    StopReason reason = StopReason::max_iter;
    std::vector<double> trace;  ///< accepted objective values, starting with f(x0)
};

/// Nonlinear conjugate gradient with the Polak-Ribiere+ update and Armijo backtracking.
///
/// `Problem` provides `double value(const VectorXd&)` and
/// `double value_gradient(const VectorXd&, VectorXd& grad)`. A trial point whose value
/// is not finite, or whose evaluation throws NumericalFailure, is treated as +inf.
/// The direction resets to steepest descent every 3n iterations or when beta < 0.
template <typename Problem>
MinimizeResult minimize_cg(Problem& problem, const Eigen::VectorXd& x0, const OptimizerConfig& cfg) {
    cfg.validate();
    const auto n = x0.size();
    MinimizeResult res;
    res.x = x0;
    res.gradient.resize(n);
    res.value = problem.value_gradient(res.x, res.gradient);
    res.evaluations = 1;
    res.trace.push_back(res.value);
    if (!std::isfinite(res.value)) throw NumericalFailure("optimizer: objective not finite at the initial point");
    if (cfg.max_iter == 0) {
        res.reason = StopReason::max_iter;
        return res;
    }

    auto safe_value = [&](const Eigen::VectorXd& x) {
        ++res.evaluations;
        try {
            const double v = problem.value(x);
            return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        } catch (const NumericalFailure&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Eigen::VectorXd dir = -res.gradient;
    Eigen::VectorXd grad_new(n);
    const std::size_t reset_every = 3 * static_cast<std::size_t>(n);
    std::size_t since_reset = 0;
    res.reason = StopReason::max_iter;

    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        if (res.gradient.norm() < cfg.grad_tol) {
            res.reason = StopReason::gradient;
            break;
        }
        double slope = res.gradient.dot(dir);
        if (!(slope < 0.0)) {
            dir = -res.gradient;
            slope = -res.gradient.squaredNorm();
            since_reset = 0;
        }

        double step = cfg.initial_step;
        const double biggest = dir.cwiseAbs().maxCoeff();
        if (biggest * step > cfg.max_coordinate_step) step = cfg.max_coordinate_step / biggest;

        bool accepted = false;
        Eigen::VectorXd trial;
        double trial_value = 0.0;
        for (std::size_t bt = 0; bt <= cfg.max_backtracks; ++bt) {
            trial = res.x + step * dir;
            trial_value = safe_value(trial);
            if (trial_value <= res.value + cfg.sufficient_decrease * step * slope) {
                accepted = true;
                break;
            }
            step *= cfg.backtrack;
        }
        if (!accepted) {
            if (since_reset == 0) {
                res.reason = StopReason::line_search;
                break;
            }
            dir = -res.gradient;  // retry once along steepest descent
            since_reset = 0;
            continue;
        }

        const double new_value = problem.value_gradient(trial, grad_new);
        ++res.evaluations;
        const double change = res.value - new_value;
        res.x = trial;
        res.value = new_value;
        res.trace.push_back(new_value);
        res.iterations = it + 1;

        const double denom = res.gradient.squaredNorm();
        double beta = denom > 0.0 ? grad_new.dot(grad_new - res.gradient) / denom : 0.0;
        ++since_reset;
        if (beta < 0.0 || since_reset >= reset_every) {
            beta = 0.0;
            since_reset = 0;
        }
        dir = -grad_new + beta * dir;
        res.gradient = grad_new;

        if (std::abs(change) < cfg.f_tol) {
            res.reason = res.gradient.norm() < cfg.grad_tol ? StopReason::gradient : StopReason::objective;
            break;
        }
    }
    if (res.reason == StopReason::max_iter && res.gradient.norm() < cfg.grad_tol) res.reason = StopReason::gradient;
    return res;
}

} // namespace cag

#endif // CAG_OPTIMIZE_HPP
