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

#ifndef CAG_REDUCTION_HPP
#define CAG_REDUCTION_HPP

#include <algorithm>
#include <cstddef>

#include <Eigen/SVD>

#include "cag/dataset.hpp"
#include "cag/error.hpp"

namespace cag {

/// Singular values at or below this fraction of the largest count as zero.
inline constexpr double rank_tolerance = 1e-12;

/// Truncated left singular basis of one cluster's field matrix.
struct ReducedBasis {
    Eigen::MatrixXd vectors;          ///< N x R_eff, orthonormal columns
    Eigen::VectorXd singular_values;  ///< all min(N, M) values, descending
    std::size_t requested = 0;

    [[nodiscard]] std::size_t rank() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
    [[nodiscard]] Eigen::Index field_size() const noexcept { return vectors.rows(); }
};

struct Reduction {
    ReducedBasis basis;
    Eigen::MatrixXd latent;  ///< R_eff x M, rows are latent variables
};

/// Latent coordinates Lambda^T Y of fields in an existing basis.
inline Eigen::MatrixXd project(const ReducedBasis& basis, const FieldMatrix& ys) {
    if (ys.rows() != basis.field_size()) throw DimensionMismatch("project: field length differs from basis");
    return basis.vectors.transpose() * ys;
}

/// Thin SVD of Y, keeping min(R, numerical rank) leading left singular vectors (at least one).
/// Each kept vector is flipped so its largest-magnitude entry is positive.
inline Reduction fit_reduce(const FieldMatrix& ys, std::size_t requested) {
    if (ys.rows() == 0 || ys.cols() == 0) throw InvalidParameter("fit_reduce: empty field matrix");
    if (requested == 0) throw InvalidParameter("fit_reduce: requested rank must be positive");
    if (!ys.allFinite()) throw NumericalFailure("fit_reduce: non-finite field entries");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ys, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success) throw NumericalFailure("fit_reduce: SVD did not converge");
    const Eigen::VectorXd& sv = svd.singularValues();

    std::size_t rank = 0;
    const double cutoff = rank_tolerance * (sv.size() ? sv[0] : 0.0);
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > cutoff) ++rank;
    }
    const std::size_t keep = std::max<std::size_t>(1, std::min(requested, rank));

    Reduction out;
    out.basis.requested = requested;
    out.basis.singular_values = sv;
    out.basis.vectors = svd.matrixU().leftCols(static_cast<Eigen::Index>(keep));
    for (Eigen::Index c = 0; c < out.basis.vectors.cols(); ++c) {
        Eigen::Index at = 0;
        out.basis.vectors.col(c).cwiseAbs().maxCoeff(&at);
        if (out.basis.vectors(at, c) < 0.0) out.basis.vectors.col(c) *= -1.0;
    }
    out.latent = project(out.basis, ys);
    return out;
}

/// Fields Lambda Y_latent expanded back to length N.
inline FieldMatrix restore(const ReducedBasis& basis, const Eigen::MatrixXd& latent) {
    if (latent.rows() != basis.vectors.cols()) {
        throw DimensionMismatch("restore: latent rows " + std::to_string(latent.rows()) + " != basis rank "
                                + std::to_string(basis.vectors.cols()));
    }
    return basis.vectors * latent;
}

} // namespace cag

#endif // CAG_REDUCTION_HPP
