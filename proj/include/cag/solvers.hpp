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

#ifndef CAG_SOLVERS_HPP
#define CAG_SOLVERS_HPP

#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "cag/dataset.hpp"
#include "cag/error.hpp"

namespace cag {

/// Maps one control parameter to its response field.
using Solver = std::function<PhysicalField(ControlParameter)>;

/// w(t) = 1 + sin(6t) exp(-t^2/2). The +1 keeps the function away from zero.
inline double wavelet_solve(double t) noexcept { return 1.0 + std::sin(6.0 * t) * std::exp(-0.5 * t * t); }

/// Free vibration of a mass-spring-damper released from rest at d0.
struct SpringConfig {
    double mass = 0.1;                  // kg
    double stiffness = 200.0;           // N/m
    double initial_displacement = 0.1;  // m
    double horizon = 1.0;               // s
    Eigen::Index time_samples = 200;

    void validate() const {
        if (!(mass > 0.0)) throw InvalidParameter("spring: mass must be positive");
        if (!(stiffness > 0.0)) throw InvalidParameter("spring: stiffness must be positive");
        if (!(horizon > 0.0)) throw InvalidParameter("spring: horizon must be positive");
        if (time_samples < 2) throw InvalidParameter("spring: need at least two time samples");
        if (!std::isfinite(initial_displacement)) throw InvalidParameter("spring: non-finite initial displacement");
    }

    [[nodiscard]] double natural_frequency() const { return std::sqrt(stiffness / mass); }
};

/// Half-width of the band around zeta = 1 that uses the critically damped formula.
inline constexpr double critical_damping_band = 1e-9;

/// Displacement at a single time for damping ratio zeta.
inline double spring_displacement(double zeta, double t, const SpringConfig& cfg) {
    const double wn = cfg.natural_frequency();
    const double d0 = cfg.initial_displacement;
    if (std::abs(zeta - 1.0) < critical_damping_band) {
        return std::exp(-wn * t) * (d0 + d0 * wn * t);
    }
    if (zeta < 1.0) {
        const double wd = wn * std::sqrt(1.0 - zeta * zeta);
        return std::exp(-zeta * wn * t) * (d0 * std::cos(wd * t) + zeta * wn * d0 / wd * std::sin(wd * t));
    }
    const double root = std::sqrt(zeta * zeta - 1.0);
    const double slow = (zeta - root) * wn;  // |varpi_1|
    const double fast = (zeta + root) * wn;  // |varpi_2|
    return (-fast * d0 * std::exp(-slow * t) + slow * d0 * std::exp(-fast * t)) / (slow - fast);
}

/// d(t) sampled on N uniform times covering [0, T] inclusive.
inline PhysicalField spring_solve(double zeta, const SpringConfig& cfg = {}) {
    cfg.validate();
    if (!(zeta >= 0.0) || !std::isfinite(zeta)) throw InvalidParameter("spring: damping ratio must be >= 0");
    PhysicalField d(cfg.time_samples);
    const double dt = cfg.horizon / static_cast<double>(cfg.time_samples - 1);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        d[i] = spring_displacement(zeta, dt * static_cast<double>(i), cfg);
    }
    return d;
}

inline Solver make_wavelet_solver() {
    return [](ControlParameter t) {
        if (!std::isfinite(t)) throw InvalidParameter("wavelet: non-finite input");
        PhysicalField out(1);
        out[0] = wavelet_solve(t);
        return out;
    };
}

inline Solver make_spring_solver(SpringConfig cfg = {}) {
    cfg.validate();
    return [cfg](ControlParameter zeta) { return spring_solve(zeta, cfg); };
}

/// Column i of the result is solver(X[i]); the dataset comes back sorted by chi.
inline LabeledDataset label_samples(const Solver& solver, const ParameterGrid& xs) {
    if (xs.empty()) return {};
    FieldMatrix ys;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        PhysicalField eta = solver(xs[i]);
        if (i == 0) ys.resize(eta.size(), static_cast<Eigen::Index>(xs.size()));
        if (eta.size() != ys.rows()) throw DimensionMismatch("solver returned fields of varying length");
        ys.col(static_cast<Eigen::Index>(i)) = eta;
    }
    return {xs, std::move(ys)};
}

} // namespace cag

#endif // CAG_SOLVERS_HPP
