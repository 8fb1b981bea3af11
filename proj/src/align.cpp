#include "sae/align.hpp"

#include "sae/error.hpp"

#include <Eigen/SVD>

#include <string>

namespace sae::align {

Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rcond) {
    if (!m.allFinite()) throw NumericError("pinv: matrix has non-finite entries");
    if (m.size() == 0) return Eigen::MatrixXd(m.cols(), m.rows());

    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cutoff = rcond * (s.size() ? s(0) : 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

/// Orthogonal matrix Q maximizing trace(Q) with Q mapping span(from) onto
/// span(to), both given as orthonormal column bases of equal width.
Eigen::MatrixXd nearest_identity_map(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to) {
    if (from.cols() == 0) return Eigen::MatrixXd::Zero(from.rows(), from.rows());
    // Q = to * W * from^T with W orthogonal; trace(Q) = trace(W * from^T to).
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to.transpose() * from, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd w = svd.matrixU() * svd.matrixV().transpose();
    return to * w * from.transpose();
}

} // namespace

AlignmentResult ideal_rotation(const Eigen::MatrixXd& latents, const Eigen::MatrixXd& targets) {
    const Eigen::Index m = latents.rows();
    const Eigen::Index n = latents.cols();
    if (targets.rows() != m || targets.cols() != n)
        throw ShapeError("latents and targets must have the same shape");
    if (n <= m)
        throw PreconditionError("alignment needs more samples (" + std::to_string(n) +
                                ") than latent dimensions (" + std::to_string(m) + ")");
    if (!latents.allFinite() || !targets.allFinite()) throw NumericError("alignment input is not finite");

    Eigen::MatrixXd centered = latents;
    centered.colwise() -= latents.rowwise().mean();

    AlignmentResult out;
    if (targets.isZero(0.0)) {
        out.rotation = Eigen::MatrixXd::Identity(m, m);
        out.degenerate = true;
        out.residual = (centered - targets).norm();
        return out;
    }

    const Eigen::MatrixXd projection = centered * pinv(targets);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(projection, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cutoff = 1e-8 * s(0);
    int rank = 0;
    while (rank < s.size() && s(rank) > cutoff) ++rank;

    const Eigen::MatrixXd& u = svd.matrixU();
    const Eigen::MatrixXd& v = svd.matrixV();
    Eigen::MatrixXd r = u.leftCols(rank) * v.leftCols(rank).transpose();
    if (rank < m) r += nearest_identity_map(v.rightCols(m - rank), u.rightCols(m - rank));

    out.rotation = std::move(r);
    out.rank_used = rank;
    out.residual = (centered - out.rotation * targets).norm();
    return out;
}

Eigen::MatrixXd place_targets(const Eigen::MatrixXd& rotation, const Eigen::MatrixXd& targets) {
    if (rotation.rows() != rotation.cols() || rotation.cols() != targets.rows())
        throw ShapeError("rotation and targets do not conform");
    return rotation * targets;
}

} // namespace sae::align
