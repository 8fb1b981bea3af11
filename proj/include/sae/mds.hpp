#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace sae::mds {

/// Prescribed inter-class distances: symmetric, zero diagonal, non-negative.
class DistanceSpec {
public:
    DistanceSpec() = default;
    explicit DistanceSpec(Eigen::MatrixXd d);

    static DistanceSpec uniform(int k, double inter);

    int size() const { return static_cast<int>(d_.rows()); }
    double operator()(int i, int j) const { return d_(i, j); }
    const Eigen::MatrixXd& matrix() const { return d_; }

    bool operator==(const DistanceSpec& o) const { return d_ == o.d_; }

private:
    Eigen::MatrixXd d_;
};

/// K points (columns) in latent dimension m, each with a positive weight.
struct CenterConfiguration {
    Eigen::MatrixXd centers;
    Eigen::VectorXd weights;

    int size() const { return static_cast<int>(centers.cols()); }
    Eigen::VectorXd weighted_centroid() const;
};

struct StressReport {
    double initial_stress = 0.0;
    double final_stress = 0.0;
    int iterations = 0;
    /// Stress before the first and after every Guttman step.
    std::vector<double> history;
};

struct SmacofOptions {
    int max_iter = 300;
    double tol = 1e-9;
    std::uint64_t seed = 0;
};

/// Weighted raw stress: sum over i<j of w_i w_j (|c_i - c_j| - d_ij)^2.
double stress(const CenterConfiguration& config, const DistanceSpec& spec);

/// Stress majorization from the given start. The result is re-centered so
/// that its weighted centroid is the origin.
std::pair<CenterConfiguration, StressReport> smacof_solve(const CenterConfiguration& init,
                                                          const DistanceSpec& spec,
                                                          const SmacofOptions& opts = {});

struct TargetPlacement {
    Eigen::MatrixXd targets;        ///< m x n, column j = solved center of labels[j]
    Eigen::MatrixXd centers;        ///< m x K solved centers (zero for empty classes)
    StressReport report;
    std::vector<int> empty_classes; ///< classes skipped for lack of samples
};

/// Collapses each class to its latent mean, solves the K-point weighted
/// problem warm-started from those means and broadcasts the solution back
/// to every sample.
TargetPlacement per_sample_targets(const Eigen::MatrixXd& latents, std::span<const int> labels,
                                   const DistanceSpec& spec, const SmacofOptions& opts = {});

/// Reference mode: SMACOF over every sample with unit weights and the
/// class-level distances expanded per sample. Limited to n <= 2000.
TargetPlacement per_sample_targets_exact(const Eigen::MatrixXd& latents,
                                         std::span<const int> labels, const DistanceSpec& spec,
                                         const SmacofOptions& opts = {});

} // namespace sae::mds
