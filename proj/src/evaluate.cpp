#include "sae/evaluate.hpp"

#include "sae/error.hpp"
#include "sae/train.hpp"

#include <algorithm>
#include <cmath>

namespace sae {

svm::SvmModel fit_latent_svm(const nn::SaeModel& model, const data::Dataset& ds, const svm::SvmOptions& opts) {
    if (ds.labeled_ids().empty()) throw PreconditionError("no labeled samples to fit the SVM on");
    const Eigen::MatrixXd z = nn::encode_ids(model, ds, ds.labeled_ids()).cast<double>();
    const auto labels = ds.labeled_classes();
    return svm::svm_fit(z, labels, ds.n_classes(), opts);
}

EvalReport evaluate(const nn::SaeModel& model, const svm::SvmModel& svm, const data::Dataset& ds) {
    EvalReport r;
    constexpr data::Index kChunk = 2048;
    double sq = 0.0;
    std::size_t wrong = 0;
    for (data::Index start = 0; start < ds.size(); start += kChunk) {
        const data::Index len = std::min(kChunk, ds.size() - start);
        const Eigen::MatrixXf x = ds.features().middleCols(start, len);
        const Eigen::MatrixXf z = model.encode(x);
        sq += (model.decode(z) - x).cast<double>().squaredNorm();
        const Eigen::MatrixXd zd = z.cast<double>();
        for (data::Index j = 0; j < len; ++j) {
            const auto& truth = ds.superclass(start + j);
            if (!truth) continue;
            const int p = svm::predict(svm, zd.col(j));
            const auto scores = svm::class_scores(svm, zd.col(j));
            r.scores.push_back(scores[static_cast<std::size_t>(p)]);
            r.correct.push_back(p == *truth ? 1 : 0);
            if (p != *truth) ++wrong;
        }
    }
    r.n_classified = r.correct.size();
    r.error = r.n_classified ? static_cast<double>(wrong) / static_cast<double>(r.n_classified) : 0.0;
    const double cells = static_cast<double>(ds.size()) * static_cast<double>(ds.dim());
    r.recon_rmse = cells > 0 ? std::sqrt(sq / cells) : 0.0;
    return r;
}

double classification_error(const nn::SaeModel& model, const svm::SvmModel& svm, const data::Dataset& ds) {
    const Eigen::MatrixXd z = nn::encode_all(model, ds).cast<double>();
    std::size_t n = 0, wrong = 0;
    for (data::Index j = 0; j < ds.size(); ++j) {
        const auto& truth = ds.superclass(j);
        if (!truth) continue;
        ++n;
        if (svm::predict(svm, z.col(j)) != *truth) ++wrong;
    }
    if (n == 0) throw PreconditionError("no classified samples to evaluate");
    return static_cast<double>(wrong) / static_cast<double>(n);
}

double reconstruction_rmse(const nn::SaeModel& model, const data::Dataset& ds) {
    constexpr data::Index kChunk = 2048;
    double sq = 0.0;
    for (data::Index start = 0; start < ds.size(); start += kChunk) {
        const data::Index len = std::min(kChunk, ds.size() - start);
        const Eigen::MatrixXf x = ds.features().middleCols(start, len);
        sq += (model.reconstruct(x) - x).cast<double>().squaredNorm();
    }
    return std::sqrt(sq / (static_cast<double>(ds.size()) * static_cast<double>(ds.dim())));
}

} // namespace sae
