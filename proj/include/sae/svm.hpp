#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace sae::svm {

/// Linear decision function for classes a < b; positive values point
/// towards b.
struct PairModel {
    int a = 0;
    int b = 1;
    Eigen::VectorXd w;
    double bias = 0.0;
    /// Primal objective of the running iterate after each epoch (not persisted).
    std::vector<double> objective_history;
};

/// One-vs-one linear SVM over the latent space plus the class centers used
/// to normalize scores.
struct SvmModel {
    int n_classes = 0;
    double lambda = 1e-3;
    std::vector<PairModel> pairs; ///< (0,1), (0,2), ..., (K-2,K-1)
    Eigen::MatrixXd centers;      ///< m x K latent class means

    Eigen::Index dim() const { return centers.rows(); }
    const PairModel& pair(int a, int b) const;
};

struct SvmOptions {
    double lambda = 1e-3;
    int epochs = 50;
    std::uint64_t seed = 0;
};

/// Pegasos stochastic subgradient descent per class pair with step
/// 1/(lambda t). The bias is learned as the weight of a constant feature.
/// The returned weights average the iterates of the second half of training.
SvmModel svm_fit(const Eigen::MatrixXd& latents, std::span<const int> labels, int n_classes,
                 const SvmOptions& opts = {});

/// lambda/2 |w|^2 + mean hinge loss of one pair on its samples.
double pair_objective(const PairModel& p, double lambda, const Eigen::MatrixXd& latents,
                      std::span<const int> labels);

double decision_value(const SvmModel& model, int a, int b, const Eigen::Ref<const Eigen::VectorXd>& z);

/// One-vs-one majority vote. Ties go to the class with the larger summed
/// |decision value| over its won pairs, then to the lowest index.
int predict(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& z);
std::vector<int> predict_all(const SvmModel& model, const Eigen::MatrixXd& latents);

/// (f(z) - f(c_a)) / (f(c_b) - f(c_a)) clamped into [0,1].
double normalized_score(const SvmModel& model, int a, int b, const Eigen::Ref<const Eigen::VectorXd>& z);
/// Same without clamping.
double normalized_score_unclamped(const SvmModel& model, int a, int b,
                                  const Eigen::Ref<const Eigen::VectorXd>& z);

/// Per-class confidence: the best class-side normalized score over every
/// pair involving the class (s for b, 1 - s for a).
std::vector<double> class_scores(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& z);

struct CalibrationBin {
    double score_lo = 0.0;
    double score_hi = 0.0;
    std::size_t count = 0;
    std::optional<double> precision; ///< fraction of positives; empty bins have none
};

/// Equal-width bins over [0,1]; the last bin includes 1.
std::vector<CalibrationBin> calibration_curve(std::span<const double> scores, std::span<const int> truths,
                                              int n_bins);
std::vector<std::size_t> score_histogram(std::span<const double> scores, int n_bins);

/// Weighted pool-adjacent-violators fit; the result is non-decreasing.
std::vector<double> isotonic_fit(std::span<const double> values, std::span<const double> weights);

void write_calibration_csv(const std::filesystem::path& path, const std::vector<CalibrationBin>& bins);
void write_histogram_csv(const std::filesystem::path& path, const std::vector<std::size_t>& counts);

} // namespace sae::svm
