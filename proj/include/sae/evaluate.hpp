#pragma once

#include "sae/data.hpp"
#include "sae/network.hpp"
#include "sae/svm.hpp"

#include <vector>

namespace sae {

/// Fits the latent SVM on the labeled samples of `ds`.
svm::SvmModel fit_latent_svm(const nn::SaeModel& model, const data::Dataset& ds, const svm::SvmOptions& opts);

/// Fraction of samples carrying a superclass that the SVM gets wrong.
double classification_error(const nn::SaeModel& model, const svm::SvmModel& svm, const data::Dataset& ds);

/// Root mean squared reconstruction residual per feature over every sample.
double reconstruction_rmse(const nn::SaeModel& model, const data::Dataset& ds);

struct EvalReport {
    double error = 0.0;
    double recon_rmse = 0.0;
    std::vector<double> scores; ///< winning class score per classified sample
    std::vector<int> correct;   ///< 1 when the prediction matches
    std::size_t n_classified = 0;
};

/// Error, reconstruction and per-sample top scores in one pass.
EvalReport evaluate(const nn::SaeModel& model, const svm::SvmModel& svm, const data::Dataset& ds);

} // namespace sae
