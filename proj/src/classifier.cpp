#include "sae/classifier.hpp"

#include "sae/error.hpp"
#include "sae/train.hpp"

#include <cmath>
#include <random>

namespace sae::nn {

SoftmaxClassifier::SoftmaxClassifier(const MlpSpec& encoder_spec, int n_classes, std::uint64_t seed) {
    encoder_spec.validate();
    if (n_classes < 2) throw PreconditionError("classifier needs at least two classes");
    // Encoder layers initialized exactly like an SAE encoder with the same seed.
    auto sae = init_model<float>(encoder_spec, seed);
    layers_ = sae.encoder();

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const int in = encoder_spec.latent_dim();
    const double a = std::sqrt(6.0 / static_cast<double>(in + n_classes));
    std::uniform_real_distribution<double> dist(-a, a);
    Layer<float> head{Matrix<float>(n_classes, in), Vector<float>::Zero(n_classes), Activation::Identity};
    for (Eigen::Index i = 0; i < head.weight.size(); ++i) head.weight.data()[i] = static_cast<float>(dist(rng));
    layers_.push_back(std::move(head));
}

namespace {

void softmax_inplace(Eigen::MatrixXf& logits) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        auto col = logits.col(j);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
    }
}

} // namespace

Eigen::MatrixXf SoftmaxClassifier::probabilities(const Eigen::MatrixXf& x) const {
    Eigen::MatrixXf h = x;
    for (const auto& l : layers_) h = l.forward(h);
    softmax_inplace(h);
    return h;
}

std::vector<int> SoftmaxClassifier::predict(const Eigen::MatrixXf& x) const {
    const Eigen::MatrixXf p = probabilities(x);
    std::vector<int> out(static_cast<std::size_t>(p.cols()));
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        Eigen::Index arg = 0;
        p.col(j).maxCoeff(&arg);
        out[j] = static_cast<int>(arg);
    }
    return out;
}

std::pair<std::vector<Layer<float>>, double> SoftmaxClassifier::gradients(const Eigen::MatrixXf& x,
                                                                          std::span<const int> labels) const {
    if (static_cast<Eigen::Index>(labels.size()) != x.cols()) throw ShapeError("one label per column required");
    std::vector<Eigen::MatrixXf> acts{x};
    for (const auto& l : layers_) acts.push_back(l.forward(acts.back()));
    Eigen::MatrixXf p = acts.back();
    softmax_inplace(p);

    const float inv_n = 1.0f / static_cast<float>(x.cols());
    double loss = 0.0;
    Eigen::MatrixXf delta = p;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const int y = labels[static_cast<std::size_t>(j)];
        loss -= std::log(std::max(static_cast<double>(p(y, j)), 1e-30));
        delta(y, j) -= 1.0f;
    }
    delta *= inv_n;

    std::vector<Layer<float>> grads(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        if (layers_[l].activation == Activation::Relu)
            delta = (acts[l + 1].array() > 0.0f).select(delta.array(), 0.0f).matrix();
        grads[l].weight.noalias() = delta * acts[l].transpose();
        grads[l].bias = delta.rowwise().sum();
        grads[l].activation = layers_[l].activation;
        if (l > 0) delta = layers_[l].weight.transpose() * delta;
    }
    return {std::move(grads), loss / static_cast<double>(x.cols())};
}

SoftmaxClassifier train_classifier(const MlpSpec& encoder_spec, const data::Dataset& ds, const ClassifierConfig& cfg) {
    const auto& ids = ds.labeled_ids();
    if (ids.empty()) throw PreconditionError("classifier needs labeled samples");
    SoftmaxClassifier clf(encoder_spec, ds.n_classes(), cfg.seed);
    LayerOptimizer opt(cfg.optimizer);

    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    Eigen::MatrixXf x;
    std::vector<int> y;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(static_cast<data::Index>(ids.size()), cfg.seed, epoch);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t len = std::min(bs, order.size() - start);
            x.resize(ds.dim(), static_cast<Eigen::Index>(len));
            y.resize(len);
            for (std::size_t j = 0; j < len; ++j) {
                const data::Index id = ids[order[start + j]];
                x.col(static_cast<Eigen::Index>(j)) = ds.feature(id);
                y[j] = *ds.superclass(id);
            }
            auto [grads, loss] = clf.gradients(x, y);
            if (!std::isfinite(loss)) throw DivergenceError("classifier training diverged");
            opt.step(clf.layers(), grads);
        }
    }
    return clf;
}

Eigen::MatrixXf classifier_probabilities(const SoftmaxClassifier& clf, const data::Dataset& ds) {
    constexpr data::Index kChunk = 2048;
    Eigen::MatrixXf out(clf.n_classes(), ds.size());
    for (data::Index start = 0; start < ds.size(); start += kChunk) {
        const data::Index len = std::min(kChunk, ds.size() - start);
        out.middleCols(start, len) = clf.probabilities(ds.features().middleCols(start, len));
    }
    return out;
}

} // namespace sae::nn
