#include "sae/network.hpp"

#include "sae/error.hpp"

#include <cmath>
#include <random>

namespace sae::nn {

std::string to_string(Activation a) {
    switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + s + "'");
}

void MlpSpec::validate() const {
    if (layer_dims.size() < 2) throw ConfigError("layer_dims needs at least input and latent sizes");
    for (int d : layer_dims)
        if (d <= 0) throw ConfigError("layer sizes must be positive");
    if (output == Activation::Relu) throw ConfigError("output activation must be sigmoid or identity");
}

namespace {

template <typename T>
void apply_activation(Matrix<T>& m, Activation a) {
    switch (a) {
    case Activation::Relu: m = m.cwiseMax(T(0)); break;
    case Activation::Sigmoid: m = (T(1) + (-m.array()).exp()).inverse().matrix(); break;
    case Activation::Identity: break;
    }
}

/// Multiplies `grad` in place by the activation derivative, expressed
/// through the activation output `y`.
template <typename T>
void apply_activation_grad(Matrix<T>& grad, const Matrix<T>& y, Activation a) {
    switch (a) {
    case Activation::Relu: grad = (y.array() > T(0)).select(grad.array(), T(0)).matrix(); break;
    case Activation::Sigmoid: grad.array() *= y.array() * (T(1) - y.array()); break;
    case Activation::Identity: break;
    }
}

} // namespace

template <typename T>
Matrix<T> Layer<T>::forward(const Matrix<T>& x) const {
    Matrix<T> y = weight * x;
    y.colwise() += bias;
    apply_activation(y, activation);
    return y;
}

template <typename T>
BasicSaeModel<T>::BasicSaeModel(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const auto& dims = spec_.layer_dims;
    const std::size_t n = dims.size() - 1;
    for (std::size_t l = 0; l < n; ++l) {
        Layer<T> layer;
        layer.weight = Matrix<T>::Zero(dims[l + 1], dims[l]);
        layer.bias = Vector<T>::Zero(dims[l + 1]);
        layer.activation = (l + 1 == n) ? Activation::Identity : Activation::Relu;
        encoder_.push_back(std::move(layer));
    }
    for (std::size_t l = 0; l < n; ++l) {
        const int in = dims[n - l];
        const int out = dims[n - l - 1];
        Layer<T> layer;
        layer.weight = Matrix<T>::Zero(out, in);
        layer.bias = Vector<T>::Zero(out);
        layer.activation = (l + 1 == n) ? spec_.output : Activation::Relu;
        decoder_.push_back(std::move(layer));
    }
}

template <typename T>
Matrix<T> BasicSaeModel<T>::encode(const Matrix<T>& x) const {
    if (x.rows() != input_dim())
        throw ShapeError("encode: input has " + std::to_string(x.rows()) + " rows, model expects " +
                         std::to_string(input_dim()));
    Matrix<T> h = x;
    for (const auto& layer : encoder_) h = layer.forward(h);
    return h;
}

template <typename T>
Matrix<T> BasicSaeModel<T>::decode(const Matrix<T>& z) const {
    if (z.rows() != latent_dim())
        throw ShapeError("decode: latent has " + std::to_string(z.rows()) + " rows, model expects " +
                         std::to_string(latent_dim()));
    Matrix<T> h = z;
    for (const auto& layer : decoder_) h = layer.forward(h);
    return h;
}

template <typename T>
std::size_t BasicSaeModel<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto* side : {&encoder_, &decoder_})
        for (const auto& l : *side) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

template <typename T>
std::vector<T> BasicSaeModel<T>::flatten() const {
    std::vector<T> out;
    out.reserve(parameter_count());
    for (const auto* side : {&encoder_, &decoder_})
        for (const auto& l : *side) {
            out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
            out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
        }
    return out;
}

template <typename T>
void BasicSaeModel<T>::unflatten(std::span<const T> params) {
    if (params.size() != parameter_count())
        throw ShapeError("parameter blob has " + std::to_string(params.size()) + " values, model needs " +
                         std::to_string(parameter_count()));
    std::size_t pos = 0;
    for (auto* side : {&encoder_, &decoder_})
        for (auto& l : *side) {
            std::copy_n(params.data() + pos, l.weight.size(), l.weight.data());
            pos += static_cast<std::size_t>(l.weight.size());
            std::copy_n(params.data() + pos, l.bias.size(), l.bias.data());
            pos += static_cast<std::size_t>(l.bias.size());
        }
}

template <typename T>
bool BasicSaeModel<T>::all_finite() const {
    for (const auto* side : {&encoder_, &decoder_})
        for (const auto& l : *side)
            if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

template <typename T>
void BasicSaeModel<T>::set_zero() {
    for (auto* side : {&encoder_, &decoder_})
        for (auto& l : *side) {
            l.weight.setZero();
            l.bias.setZero();
        }
}

template <typename T>
bool BasicSaeModel<T>::operator==(const BasicSaeModel& o) const {
    if (!(spec_ == o.spec_)) return false;
    auto same = [](const std::vector<Layer<T>>& a, const std::vector<Layer<T>>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i].weight != b[i].weight || a[i].bias != b[i].bias) return false;
        return true;
    };
    return same(encoder_, o.encoder_) && same(decoder_, o.decoder_);
}

template <typename T>
BasicSaeModel<T> init_model(const MlpSpec& spec, std::uint64_t seed) {
    BasicSaeModel<T> model(spec);
    std::mt19937_64 rng(seed);
    for (auto* side : {&model.encoder(), &model.decoder()})
        for (auto& l : *side) {
            const double a = std::sqrt(6.0 / static_cast<double>(l.in() + l.out()));
            std::uniform_real_distribution<double> dist(-a, a);
            for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = static_cast<T>(dist(rng));
        }
    return model;
}

// ---------------------------------------------------------------------------
// Losses

double loss_ae(std::span<const double> x, std::span<const double> xhat) {
    if (x.size() != xhat.size()) throw ShapeError("loss_ae: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - xhat[i]) * (x[i] - xhat[i]);
    return s;
}

double loss_structural(std::span<const double> z, std::span<const double> ztilde) {
    if (z.size() != ztilde.size()) throw ShapeError("loss_structural: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] - ztilde[i]) * (z[i] - ztilde[i]);
    return s;
}

double loss_combined(std::span<const double> x, std::span<const double> xhat, std::span<const double> z,
                     std::optional<std::span<const double>> ztilde, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw PreconditionError("gamma must lie in [0,1]");
    const double ae = loss_ae(x, xhat);
    if (!ztilde) return ae;
    return gamma * loss_structural(z, *ztilde) + (1.0 - gamma) * ae;
}

// ---------------------------------------------------------------------------
// Backpropagation

namespace {

template <typename T>
struct Forward {
    std::vector<Matrix<T>> enc; ///< enc[0] = x, enc[l+1] = output of encoder layer l
    std::vector<Matrix<T>> dec; ///< dec[0] = z, dec[l+1] = output of decoder layer l
};

template <typename T>
Forward<T> run_forward(const BasicSaeModel<T>& model, const Matrix<T>& x) {
    if (x.rows() != model.input_dim()) throw ShapeError("batch row count does not match the model input");
    Forward<T> f;
    f.enc.reserve(model.encoder().size() + 1);
    f.enc.push_back(x);
    for (const auto& l : model.encoder()) f.enc.push_back(l.forward(f.enc.back()));
    f.dec.reserve(model.decoder().size() + 1);
    f.dec.push_back(f.enc.back());
    for (const auto& l : model.decoder()) f.dec.push_back(l.forward(f.dec.back()));
    return f;
}

template <typename T>
BatchLoss compute_loss(const Forward<T>& f, const Matrix<T>& x, const BatchTargets<T>* targets, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw PreconditionError("gamma must lie in [0,1]");
    const Matrix<T>& xhat = f.dec.back();
    const Matrix<T>& z = f.enc.back();
    BatchLoss loss;
    loss.n = x.cols();
    double structural_sum = 0.0;
    double combined_sum = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double ae = (x.col(j) - xhat.col(j)).template cast<double>().squaredNorm();
        loss.recon_sq_sum += ae;
        if (targets && targets->mask[static_cast<std::size_t>(j)]) {
            const double s = (z.col(j) - targets->positions.col(j)).template cast<double>().squaredNorm();
            structural_sum += s;
            combined_sum += gamma * s + (1.0 - gamma) * ae;
            ++loss.n_labeled;
        } else {
            combined_sum += ae;
        }
    }
    const double n = static_cast<double>(std::max<Eigen::Index>(loss.n, 1));
    loss.recon = loss.recon_sq_sum / n;
    loss.structural = loss.n_labeled ? structural_sum / static_cast<double>(loss.n_labeled) : 0.0;
    loss.combined = combined_sum / n;
    return loss;
}

template <typename T>
void check_targets(const Matrix<T>& x, Eigen::Index latent, const BatchTargets<T>* targets) {
    if (!targets) return;
    if (targets->positions.cols() != x.cols() || targets->positions.rows() != latent ||
        targets->mask.size() != static_cast<std::size_t>(x.cols()))
        throw ShapeError("batch targets do not conform to the batch");
}

} // namespace

template <typename T>
BatchLoss batch_loss(const BasicSaeModel<T>& model, const Matrix<T>& x, const BatchTargets<T>* targets,
                     double gamma) {
    check_targets(x, model.latent_dim(), targets);
    return compute_loss(run_forward(model, x), x, targets, gamma);
}

template <typename T>
std::pair<BasicSaeModel<T>, BatchLoss> gradients(const BasicSaeModel<T>& model, const Matrix<T>& x,
                                                 const BatchTargets<T>* targets, double gamma) {
    check_targets(x, model.latent_dim(), targets);
    const Forward<T> f = run_forward(model, x);
    BatchLoss loss = compute_loss(f, x, targets, gamma);
    if (!std::isfinite(loss.combined)) throw NumericError("non-finite loss in forward pass");

    const Eigen::Index batch = x.cols();
    const T scale = T(2) / static_cast<T>(batch);
    const T recon_labeled = static_cast<T>(1.0 - gamma);
    const T structural_weight = static_cast<T>(gamma);

    BasicSaeModel<T> grad(model.spec());

    // d loss / d xhat
    Matrix<T> delta = scale * (f.dec.back() - x);
    if (targets) {
        for (Eigen::Index j = 0; j < batch; ++j)
            if (targets->mask[static_cast<std::size_t>(j)]) delta.col(j) *= recon_labeled;
    }

    const auto& dec = model.decoder();
    for (std::size_t l = dec.size(); l-- > 0;) {
        apply_activation_grad(delta, f.dec[l + 1], dec[l].activation);
        grad.decoder()[l].weight.noalias() = delta * f.dec[l].transpose();
        grad.decoder()[l].bias = delta.rowwise().sum();
        delta = dec[l].weight.transpose() * delta;
    }

    if (targets) {
        const Matrix<T>& z = f.enc.back();
        for (Eigen::Index j = 0; j < batch; ++j)
            if (targets->mask[static_cast<std::size_t>(j)])
                delta.col(j) += scale * structural_weight * (z.col(j) - targets->positions.col(j));
    }

    const auto& enc = model.encoder();
    for (std::size_t l = enc.size(); l-- > 0;) {
        apply_activation_grad(delta, f.enc[l + 1], enc[l].activation);
        grad.encoder()[l].weight.noalias() = delta * f.enc[l].transpose();
        grad.encoder()[l].bias = delta.rowwise().sum();
        if (l > 0) delta = enc[l].weight.transpose() * delta;
    }
    return {std::move(grad), loss};
}

template struct Layer<float>;
template struct Layer<double>;
template class BasicSaeModel<float>;
template class BasicSaeModel<double>;
template BasicSaeModel<float> init_model<float>(const MlpSpec&, std::uint64_t);
template BasicSaeModel<double> init_model<double>(const MlpSpec&, std::uint64_t);
template std::pair<BasicSaeModel<float>, BatchLoss> gradients(const BasicSaeModel<float>&, const Matrix<float>&,
                                                              const BatchTargets<float>*, double);
template std::pair<BasicSaeModel<double>, BatchLoss> gradients(const BasicSaeModel<double>&, const Matrix<double>&,
                                                               const BatchTargets<double>*, double);
template BatchLoss batch_loss(const BasicSaeModel<float>&, const Matrix<float>&, const BatchTargets<float>*, double);
template BatchLoss batch_loss(const BasicSaeModel<double>&, const Matrix<double>&, const BatchTargets<double>*,
                              double);

} // namespace sae::nn
