#include "sae/optimizer.hpp"

#include "sae/error.hpp"

#include <cmath>

namespace sae::nn {

std::string to_string(Optimizer o) {
    switch (o) {
    case Optimizer::Sgd: return "sgd";
    case Optimizer::Momentum: return "momentum";
    case Optimizer::Adam: return "adam";
    }
    return "sgd";
}

Optimizer optimizer_from_string(const std::string& s) {
    if (s == "sgd") return Optimizer::Sgd;
    if (s == "momentum") return Optimizer::Momentum;
    if (s == "adam") return Optimizer::Adam;
    throw ConfigError("unknown optimizer '" + s + "'");
}

void LayerOptimizer::reset() {
    steps_ = 0;
    m1_.clear();
    m2_.clear();
}

void LayerOptimizer::step(std::vector<Layer<float>>& params, const std::vector<Layer<float>>& grads) {
    if (params.size() != grads.size()) throw ShapeError("gradient does not match the parameter stack");
    if (m1_.size() != params.size()) {
        m1_.clear();
        m2_.clear();
        for (const auto& p : params) {
            Layer<float> z{Matrix<float>::Zero(p.weight.rows(), p.weight.cols()), Vector<float>::Zero(p.bias.size()),
                           p.activation};
            m1_.push_back(z);
            m2_.push_back(z);
        }
    }
    ++steps_;
    const auto& s = settings_;
    const float lr = static_cast<float>(s.learning_rate);
    const float c1 = static_cast<float>(1.0 - std::pow(s.beta1, static_cast<double>(steps_)));
    const float c2 = static_cast<float>(1.0 - std::pow(s.beta2, static_cast<double>(steps_)));

    auto update = [&](auto& param, const auto& g, auto& m1, auto& m2) {
        switch (s.kind) {
        case Optimizer::Sgd:
            param -= lr * g;
            break;
        case Optimizer::Momentum:
            m1 = static_cast<float>(s.momentum) * m1 + g;
            param -= lr * m1;
            break;
        case Optimizer::Adam: {
            const float b1 = static_cast<float>(s.beta1);
            const float b2 = static_cast<float>(s.beta2);
            m1 = b1 * m1 + (1.0f - b1) * g;
            m2 = b2 * m2 + (1.0f - b2) * g.cwiseAbs2();
            param.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + static_cast<float>(s.epsilon));
            break;
        }
        }
    };
    for (std::size_t l = 0; l < params.size(); ++l) {
        update(params[l].weight, grads[l].weight, m1_[l].weight, m2_[l].weight);
        update(params[l].bias, grads[l].bias, m1_[l].bias, m2_[l].bias);
    }
}

} // namespace sae::nn
