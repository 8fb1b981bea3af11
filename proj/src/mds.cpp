#include "sae/mds.hpp"

#include "sae/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>
#include <string>

namespace sae::mds {

DistanceSpec::DistanceSpec(Eigen::MatrixXd d) : d_(std::move(d)) {
    if (d_.rows() != d_.cols()) throw ShapeError("distance matrix must be square");
    if (d_.rows() < 1) throw PreconditionError("distance matrix needs at least one class");
    if (!d_.allFinite()) throw NumericError("distance matrix has non-finite entries");
    for (Eigen::Index i = 0; i < d_.rows(); ++i) {
        if (d_(i, i) != 0.0) throw PreconditionError("distance matrix diagonal must be zero");
        for (Eigen::Index j = 0; j < d_.cols(); ++j) {
            if (d_(i, j) < 0.0) throw PreconditionError("distances must be non-negative");
            if (d_(i, j) != d_(j, i)) throw PreconditionError("distance matrix must be symmetric");
        }
    }
}

DistanceSpec DistanceSpec::uniform(int k, double inter) {
    if (k < 1) throw PreconditionError("uniform distance spec needs K >= 1");
    if (!(inter > 0.0)) throw PreconditionError("inter-class distance must be positive");
    Eigen::MatrixXd d = Eigen::MatrixXd::Constant(k, k, inter);
    d.diagonal().setZero();
    return DistanceSpec(std::move(d));
}

Eigen::VectorXd CenterConfiguration::weighted_centroid() const {
    return centers * weights / weights.sum();
}

namespace {

/// Pairwise problem: points are columns of x, w(i,j) pair weights, delta(i,j)
/// prescribed distances.
double raw_stress(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd& delta) {
    double s = 0.0;
    const Eigen::Index n = x.cols();
    for (Eigen::Index j = 1; j < n; ++j)
        for (Eigen::Index i = 0; i < j; ++i) {
            if (w(i, j) == 0.0) continue;
            const double r = (x.col(i) - x.col(j)).norm() - delta(i, j);
            s += w(i, j) * r * r;
        }
    return s;
}

void guard_coincident(Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd& delta,
                      std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    const Eigen::Index n = x.cols();
    for (Eigen::Index j = 1; j < n; ++j)
        for (Eigen::Index i = 0; i < j; ++i) {
            if (w(i, j) == 0.0 || delta(i, j) <= 0.0) continue;
            if ((x.col(i) - x.col(j)).norm() > 0.0) continue;
            Eigen::VectorXd dir(x.rows());
            do {
                for (Eigen::Index r = 0; r < dir.size(); ++r) dir(r) = normal(rng);
            } while (dir.norm() == 0.0);
            x.col(j) += 1e-6 * dir.normalized();
        }
}

std::pair<Eigen::MatrixXd, StressReport> smacof_core(Eigen::MatrixXd x, const Eigen::MatrixXd& w,
                                                     const Eigen::MatrixXd& delta,
                                                     const SmacofOptions& opts) {
    const Eigen::Index n = x.cols();
    StressReport report;
    std::mt19937_64 rng(opts.seed);

    if (n <= 1) {
        report.history.push_back(0.0);
        return {std::move(x), report};
    }

    // V = sum_{i<j} w_ij (e_i - e_j)(e_i - e_j)^T has the ones vector in its
    // null space; adding a multiple of 11^T makes it invertible without
    // changing the solution on the centered subspace.
    Eigen::MatrixXd v = -w;
    v.diagonal().setZero();
    v.diagonal() = -v.rowwise().sum();
    const double shift = v.diagonal().mean() / static_cast<double>(n);
    Eigen::LLT<Eigen::MatrixXd> solver(v + Eigen::MatrixXd::Constant(n, n, shift));
    if (solver.info() != Eigen::Success)
        throw NumericError("SMACOF weight matrix is not positive definite on the centered subspace");

    double scale = 0.0;
    for (Eigen::Index j = 1; j < n; ++j)
        for (Eigen::Index i = 0; i < j; ++i) scale += w(i, j) * delta(i, j) * delta(i, j);

    guard_coincident(x, w, delta, rng);
    double current = raw_stress(x, w, delta);
    report.initial_stress = current;
    report.history.push_back(current);

    Eigen::MatrixXd b(n, n);
    for (int it = 0; it < opts.max_iter && current > 0.0; ++it) {
        guard_coincident(x, w, delta, rng);
        b.setZero();
        for (Eigen::Index j = 1; j < n; ++j)
            for (Eigen::Index i = 0; i < j; ++i) {
                const double d = (x.col(i) - x.col(j)).norm();
                if (d > 0.0 && w(i, j) != 0.0) {
                    b(i, j) = b(j, i) = -w(i, j) * delta(i, j) / d;
                }
            }
        b.diagonal() = -b.rowwise().sum();

        // Guttman transform, points as rows: X' = V^+ B X.
        Eigen::MatrixXd next = solver.solve(b * x.transpose()).transpose();
        const double next_stress = raw_stress(next, w, delta);
        x = std::move(next);
        report.history.push_back(next_stress);
        report.iterations = it + 1;

        const double previous = current;
        current = next_stress;
        if (current <= 1e-28 * scale) break;
        if (previous - current < opts.tol * previous) break;
    }
    report.final_stress = current;
    return {std::move(x), report};
}

} // namespace

double stress(const CenterConfiguration& config, const DistanceSpec& spec) {
    if (config.size() != spec.size())
        throw ShapeError("configuration has " + std::to_string(config.size()) + " points, spec has " +
                         std::to_string(spec.size()));
    if (config.weights.size() != config.centers.cols()) throw ShapeError("weight count mismatch");
    return raw_stress(config.centers, config.weights * config.weights.transpose(), spec.matrix());
}

std::pair<CenterConfiguration, StressReport> smacof_solve(const CenterConfiguration& init,
                                                          const DistanceSpec& spec,
                                                          const SmacofOptions& opts) {
    if (init.size() != spec.size()) throw ShapeError("configuration and spec sizes differ");
    if (init.weights.size() != init.centers.cols()) throw ShapeError("weight count mismatch");
    if (!init.centers.allFinite()) throw NumericError("initial configuration is not finite");
    if (opts.max_iter < 1) throw PreconditionError("max_iter must be at least 1");
    if ((init.weights.array() <= 0.0).any()) throw PreconditionError("weights must be positive");

    auto [x, report] = smacof_core(init.centers, init.weights * init.weights.transpose(),
                                   spec.matrix(), opts);
    CenterConfiguration out{std::move(x), init.weights};
    out.centers.colwise() -= out.weighted_centroid();
    return {std::move(out), std::move(report)};
}

namespace {

void check_labels(const Eigen::MatrixXd& latents, std::span<const int> labels, const DistanceSpec& spec) {
    if (static_cast<Eigen::Index>(labels.size()) != latents.cols())
        throw ShapeError("one label per latent column required");
    for (int l : labels)
        if (l < 0 || l >= spec.size()) throw PreconditionError("label outside the distance spec");
}

} // namespace

TargetPlacement per_sample_targets(const Eigen::MatrixXd& latents, std::span<const int> labels,
                                   const DistanceSpec& spec, const SmacofOptions& opts) {
    check_labels(latents, labels, spec);
    const int k = spec.size();
    const Eigen::Index m = latents.rows();

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(m, k);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (std::size_t j = 0; j < labels.size(); ++j) {
        sums.col(labels[j]) += latents.col(static_cast<Eigen::Index>(j));
        counts(labels[j]) += 1.0;
    }

    TargetPlacement out;
    std::vector<int> present;
    for (int c = 0; c < k; ++c) {
        if (counts(c) > 0) present.push_back(c);
        else out.empty_classes.push_back(c);
    }

    const int kp = static_cast<int>(present.size());
    CenterConfiguration init{Eigen::MatrixXd(m, kp), Eigen::VectorXd(kp)};
    Eigen::MatrixXd sub(kp, kp);
    for (int a = 0; a < kp; ++a) {
        init.centers.col(a) = sums.col(present[a]) / counts(present[a]);
        init.weights(a) = counts(present[a]);
        for (int b = 0; b < kp; ++b) sub(a, b) = spec(present[a], present[b]);
    }

    out.centers = Eigen::MatrixXd::Zero(m, k);
    out.targets.resize(m, latents.cols());
    if (kp == 0) return out;

    auto [solved, report] = smacof_solve(init, DistanceSpec(sub), opts);
    out.report = std::move(report);
    for (int a = 0; a < kp; ++a) out.centers.col(present[a]) = solved.centers.col(a);
    for (std::size_t j = 0; j < labels.size(); ++j)
        out.targets.col(static_cast<Eigen::Index>(j)) = out.centers.col(labels[j]);
    return out;
}

TargetPlacement per_sample_targets_exact(const Eigen::MatrixXd& latents,
                                         std::span<const int> labels, const DistanceSpec& spec,
                                         const SmacofOptions& opts) {
    check_labels(latents, labels, spec);
    const Eigen::Index n = latents.cols();
    if (n > 2000) throw PreconditionError("exact per-sample MDS is limited to 2000 samples");

    Eigen::MatrixXd delta(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) delta(i, j) = spec(labels[i], labels[j]);
    const Eigen::MatrixXd w = Eigen::MatrixXd::Ones(n, n);

    auto [x, report] = smacof_core(latents, w, delta, opts);
    x.colwise() -= x.rowwise().mean();

    TargetPlacement out;
    out.targets = std::move(x);
    out.report = std::move(report);
    out.centers = Eigen::MatrixXd::Zero(latents.rows(), spec.size());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(spec.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        out.centers.col(labels[j]) += out.targets.col(j);
        counts(labels[j]) += 1.0;
    }
    for (int c = 0; c < spec.size(); ++c) {
        if (counts(c) > 0) out.centers.col(c) /= counts(c);
        else out.empty_classes.push_back(c);
    }
    return out;
}

} // namespace sae::mds
