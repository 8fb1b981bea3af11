#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sae::nn {

enum class Activation { Relu, Sigmoid, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Encoder layer sizes from input to latent; the decoder mirrors them.
struct MlpSpec {
    std::vector<int> layer_dims;
    Activation output = Activation::Sigmoid;

    int input_dim() const { return layer_dims.front(); }
    int latent_dim() const { return layer_dims.back(); }
    void validate() const;
    bool operator==(const MlpSpec&) const = default;
};

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct Layer {
    Matrix<T> weight; ///< out x in
    Vector<T> bias;
    Activation activation = Activation::Identity;

    Eigen::Index in() const { return weight.cols(); }
    Eigen::Index out() const { return weight.rows(); }
    /// activation(W x + b), column per sample.
    Matrix<T> forward(const Matrix<T>& x) const;
};

/// Encoder and decoder parameter sets. The same type doubles as a
/// parameter-shaped gradient container.
template <typename T>
class BasicSaeModel {
public:
    BasicSaeModel() = default;
    explicit BasicSaeModel(MlpSpec spec);

    const MlpSpec& spec() const { return spec_; }
    Eigen::Index input_dim() const { return spec_.input_dim(); }
    Eigen::Index latent_dim() const { return spec_.latent_dim(); }

    std::vector<Layer<T>>& encoder() { return encoder_; }
    std::vector<Layer<T>>& decoder() { return decoder_; }
    const std::vector<Layer<T>>& encoder() const { return encoder_; }
    const std::vector<Layer<T>>& decoder() const { return decoder_; }

    Matrix<T> encode(const Matrix<T>& x) const;
    Matrix<T> decode(const Matrix<T>& z) const;
    Matrix<T> reconstruct(const Matrix<T>& x) const { return decode(encode(x)); }

    std::size_t parameter_count() const;
    /// Parameters in declaration order: encoder layers then decoder layers,
    /// each weight (column-major) followed by its bias.
    std::vector<T> flatten() const;
    void unflatten(std::span<const T> params);

    bool all_finite() const;
    void set_zero();

    template <typename U>
    BasicSaeModel<U> cast() const {
        BasicSaeModel<U> out(spec_);
        for (std::size_t l = 0; l < encoder_.size(); ++l) {
            out.encoder()[l].weight = encoder_[l].weight.template cast<U>();
            out.encoder()[l].bias = encoder_[l].bias.template cast<U>();
        }
        for (std::size_t l = 0; l < decoder_.size(); ++l) {
            out.decoder()[l].weight = decoder_[l].weight.template cast<U>();
            out.decoder()[l].bias = decoder_[l].bias.template cast<U>();
        }
        return out;
    }

    bool operator==(const BasicSaeModel& o) const;

private:
    MlpSpec spec_;
    std::vector<Layer<T>> encoder_;
    std::vector<Layer<T>> decoder_;
};

using SaeModel = BasicSaeModel<float>;

/// Glorot-uniform weights, zero biases; deterministic per seed and
/// identical across scalar types up to rounding.
template <typename T = float>
BasicSaeModel<T> init_model(const MlpSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Losses

/// |x - xhat|^2.
double loss_ae(std::span<const double> x, std::span<const double> xhat);
/// |z - ztilde|^2.
double loss_structural(std::span<const double> z, std::span<const double> ztilde);
/// gamma * L_S + (1 - gamma) * L_AE when a target is given, L_AE otherwise.
double loss_combined(std::span<const double> x, std::span<const double> xhat,
                     std::span<const double> z, std::optional<std::span<const double>> ztilde,
                     double gamma);

/// Batch means. `structural` averages over labeled columns only;
/// `combined` averages the per-sample combined loss over the whole batch.
struct BatchLoss {
    double recon = 0.0;
    double structural = 0.0;
    double combined = 0.0;
    double recon_sq_sum = 0.0; ///< sum of squared reconstruction residuals
    Eigen::Index n = 0;
    Eigen::Index n_labeled = 0;
};

/// Targets for a batch: column j of `positions` is used when `mask[j]`.
template <typename T>
struct BatchTargets {
    Matrix<T> positions;
    std::vector<bool> mask;
};

/// Exact gradients of the batch-mean combined loss with respect to every
/// parameter. Without targets the loss is the plain reconstruction loss.
template <typename T>
std::pair<BasicSaeModel<T>, BatchLoss> gradients(const BasicSaeModel<T>& model, const Matrix<T>& x,
                                                 const BatchTargets<T>* targets, double gamma);

/// Loss value only, for finite-difference checks.
template <typename T>
BatchLoss batch_loss(const BasicSaeModel<T>& model, const Matrix<T>& x,
                     const BatchTargets<T>* targets, double gamma);

} // namespace sae::nn
