#pragma once

#include "sae/data.hpp"
#include "sae/network.hpp"
#include "sae/optimizer.hpp"

#include <vector>

namespace sae::nn {

/// Baseline: the SAE encoder architecture followed by a dense softmax layer,
/// trained with cross-entropy on labeled samples only.
class SoftmaxClassifier {
public:
    SoftmaxClassifier() = default;
    SoftmaxClassifier(const MlpSpec& encoder_spec, int n_classes, std::uint64_t seed);

    int n_classes() const { return static_cast<int>(layers_.back().out()); }
    std::vector<Layer<float>>& layers() { return layers_; }
    const std::vector<Layer<float>>& layers() const { return layers_; }

    /// Column-wise class probabilities.
    Eigen::MatrixXf probabilities(const Eigen::MatrixXf& x) const;
    std::vector<int> predict(const Eigen::MatrixXf& x) const;

    /// Mean cross-entropy and its gradient for one batch.
    std::pair<std::vector<Layer<float>>, double> gradients(const Eigen::MatrixXf& x,
                                                           std::span<const int> labels) const;

private:
    std::vector<Layer<float>> layers_;
};

struct ClassifierConfig {
    int epochs = 50;
    int batch_size = 64;
    std::uint64_t seed = 0;
    OptimizerSettings optimizer{Optimizer::Adam, 1e-3};
};

/// Trains on the labeled samples of `ds`.
SoftmaxClassifier train_classifier(const MlpSpec& encoder_spec, const data::Dataset& ds,
                                   const ClassifierConfig& cfg);

/// Probabilities for the given samples.
Eigen::MatrixXf classifier_probabilities(const SoftmaxClassifier& clf, const data::Dataset& ds);

} // namespace sae::nn
