#pragma once

#include "sae/network.hpp"

#include <string>
#include <vector>

namespace sae::nn {

enum class Optimizer { Sgd, Momentum, Adam };

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

struct OptimizerSettings {
    Optimizer kind = Optimizer::Sgd;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First-order update rule over a stack of layers, holding its own moments.
class LayerOptimizer {
public:
    explicit LayerOptimizer(OptimizerSettings settings = {}) : settings_(settings) {}

    void step(std::vector<Layer<float>>& params, const std::vector<Layer<float>>& grads);
    void reset();
    const OptimizerSettings& settings() const { return settings_; }
    void set_learning_rate(double lr) { settings_.learning_rate = lr; }

private:
    OptimizerSettings settings_;
    long long steps_ = 0;
    std::vector<Layer<float>> m1_;
    std::vector<Layer<float>> m2_;
};

} // namespace sae::nn
