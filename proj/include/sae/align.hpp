#pragma once

#include <Eigen/Core>

namespace sae::align {

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// `rcond * sigma_max` are treated as zero.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rcond = 1e-12);

struct AlignmentResult {
    Eigen::MatrixXd rotation;  ///< m x m
    double residual = 0.0;     ///< |Zc - R Z*|_F with Zc the mean-centered latents
    int rank_used = 0;
    bool degenerate = false;   ///< Z* was all zero; rotation is the identity
};

/// Rotation that carries the MDS targets onto the current latents.
///
/// Forms P = Zc * pinv(Z*), takes its SVD U S V^T, flattens the singular
/// values above 1e-8 * sigma_max to one and returns U S* V^T. When P is rank
/// deficient the rotation is completed on the orthogonal complements with
/// the orthogonal map nearest to the identity, so R is always orthogonal.
/// Reflections are allowed.
AlignmentResult ideal_rotation(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& targets);

/// R * Z*.
Eigen::MatrixXd place_targets(const Eigen::MatrixXd& rotation, const Eigen::MatrixXd& targets);

} // namespace sae::align
