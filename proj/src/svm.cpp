#include "sae/svm.hpp"

#include "sae/csv.hpp"
#include "sae/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace sae::svm {

const PairModel& SvmModel::pair(int a, int b) const {
    if (a > b) std::swap(a, b);
    if (a < 0 || b >= n_classes || a == b)
        throw PreconditionError("unknown class pair (" + std::to_string(a) + "," + std::to_string(b) + ")");
    // pairs are stored in lexicographic order
    const int index = a * (2 * n_classes - a - 1) / 2 + (b - a - 1);
    return pairs.at(static_cast<std::size_t>(index));
}

double pair_objective(const PairModel& p, double lambda, const Eigen::MatrixXd& latents,
                      std::span<const int> labels) {
    double hinge = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (labels[j] != p.a && labels[j] != p.b) continue;
        const double y = labels[j] == p.b ? 1.0 : -1.0;
        const double f = p.w.dot(latents.col(static_cast<Eigen::Index>(j))) + p.bias;
        hinge += std::max(0.0, 1.0 - y * f);
        ++n;
    }
    const double reg = 0.5 * lambda * (p.w.squaredNorm() + p.bias * p.bias);
    return reg + (n ? hinge / static_cast<double>(n) : 0.0);
}

SvmModel svm_fit(const Eigen::MatrixXd& latents, std::span<const int> labels, int n_classes,
                 const SvmOptions& opts) {
    if (static_cast<Eigen::Index>(labels.size()) != latents.cols())
        throw ShapeError("one label per latent column required");
    if (!(opts.lambda > 0.0)) throw PreconditionError("lambda must be positive");
    if (opts.epochs < 1) throw PreconditionError("epochs must be positive");
    if (n_classes < 2) throw FitError("SVM needs at least two classes");
    if (!latents.allFinite()) throw NumericError("latents are not finite");

    const Eigen::Index m = latents.rows();
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n_classes));
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (labels[j] < 0 || labels[j] >= n_classes) throw FitError("label out of range");
        members[labels[j]].push_back(static_cast<Eigen::Index>(j));
    }

    SvmModel model;
    model.n_classes = n_classes;
    model.lambda = opts.lambda;
    model.centers.resize(m, n_classes);
    for (int c = 0; c < n_classes; ++c) {
        if (members[c].empty()) throw FitError("class " + std::to_string(c) + " has no samples");
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(m);
        for (Eigen::Index j : members[c]) sum += latents.col(j);
        model.centers.col(c) = sum / static_cast<double>(members[c].size());
    }

    const double lambda = opts.lambda;
    const double radius = 1.0 / std::sqrt(lambda);
    for (int a = 0; a < n_classes; ++a)
        for (int b = a + 1; b < n_classes; ++b) {
            std::vector<Eigen::Index> ids = members[a];
            ids.insert(ids.end(), members[b].begin(), members[b].end());
            std::sort(ids.begin(), ids.end());

            std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                              static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
            std::mt19937_64 rng(seq);

            // Augmented weight vector: last entry is the bias.
            Eigen::VectorXd w = Eigen::VectorXd::Zero(m + 1);
            Eigen::VectorXd avg = Eigen::VectorXd::Zero(m + 1);
            Eigen::VectorXd x(m + 1);
            long long averaged = 0;
            long long t = 0;
            const int avg_from = opts.epochs / 2;

            PairModel p;
            p.a = a;
            p.b = b;
            for (int epoch = 0; epoch < opts.epochs; ++epoch) {
                std::shuffle(ids.begin(), ids.end(), rng);
                for (Eigen::Index j : ids) {
                    ++t;
                    const double eta = 1.0 / (lambda * static_cast<double>(t));
                    x.head(m) = latents.col(j);
                    x(m) = 1.0;
                    const double y = labels[static_cast<std::size_t>(j)] == b ? 1.0 : -1.0;
                    const bool violated = y * w.dot(x) < 1.0;
                    w *= (1.0 - eta * lambda);
                    if (violated) w += eta * y * x;
                    const double norm = w.norm();
                    if (norm > radius) w *= radius / norm;
                    if (epoch >= avg_from) {
                        ++averaged;
                        avg += (w - avg) / static_cast<double>(averaged);
                    }
                }
                PairModel snapshot{a, b, w.head(m), w(m), {}};
                p.objective_history.push_back(pair_objective(snapshot, lambda, latents, labels));
            }
            p.w = avg.head(m);
            p.bias = avg(m);
            model.pairs.push_back(std::move(p));
        }
    return model;
}

double decision_value(const SvmModel& model, int a, int b, const Eigen::Ref<const Eigen::VectorXd>& z) {
    const PairModel& p = model.pair(a, b);
    if (z.size() != p.w.size()) throw ShapeError("latent dimension does not match the SVM");
    return p.w.dot(z) + p.bias;
}

int predict(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
    std::vector<int> votes(static_cast<std::size_t>(model.n_classes), 0);
    std::vector<double> strength(static_cast<std::size_t>(model.n_classes), 0.0);
    for (const auto& p : model.pairs) {
        if (z.size() != p.w.size()) throw ShapeError("latent dimension does not match the SVM");
        const double f = p.w.dot(z) + p.bias;
        const int winner = f > 0.0 ? p.b : p.a;
        votes[winner] += 1;
        strength[winner] += std::abs(f);
    }
    int best = 0;
    for (int c = 1; c < model.n_classes; ++c) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && strength[c] > strength[best])) best = c;
    }
    return best;
}

std::vector<int> predict_all(const SvmModel& model, const Eigen::MatrixXd& latents) {
    std::vector<int> out(static_cast<std::size_t>(latents.cols()));
    for (Eigen::Index j = 0; j < latents.cols(); ++j) out[j] = predict(model, latents.col(j));
    return out;
}

double normalized_score_unclamped(const SvmModel& model, int a, int b, const Eigen::Ref<const Eigen::VectorXd>& z) {
    if (a > b) throw PreconditionError("normalized_score expects a < b");
    const double fa = decision_value(model, a, b, model.centers.col(a));
    const double fb = decision_value(model, a, b, model.centers.col(b));
    if (fb == fa || !std::isfinite(fb - fa))
        throw ScoringError("class centers " + std::to_string(a) + " and " + std::to_string(b) +
                           " have equal decision values");
    return (decision_value(model, a, b, z) - fa) / (fb - fa);
}

double normalized_score(const SvmModel& model, int a, int b, const Eigen::Ref<const Eigen::VectorXd>& z) {
    return std::clamp(normalized_score_unclamped(model, a, b, z), 0.0, 1.0);
}

std::vector<double> class_scores(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
    std::vector<double> scores(static_cast<std::size_t>(model.n_classes), 0.0);
    for (const auto& p : model.pairs) {
        const double s = normalized_score(model, p.a, p.b, z);
        scores[p.b] = std::max(scores[p.b], s);
        scores[p.a] = std::max(scores[p.a], 1.0 - s);
    }
    return scores;
}

namespace {

std::size_t bin_of(double s, int n_bins) {
    const double clamped = std::clamp(s, 0.0, 1.0);
    auto i = static_cast<std::size_t>(clamped * n_bins);
    return std::min(i, static_cast<std::size_t>(n_bins - 1));
}

} // namespace

std::vector<CalibrationBin> calibration_curve(std::span<const double> scores, std::span<const int> truths,
                                              int n_bins) {
    if (scores.size() != truths.size()) throw ShapeError("scores and truths differ in length");
    if (scores.empty()) throw PreconditionError("calibration needs at least one score");
    if (n_bins < 2) throw PreconditionError("calibration needs at least two bins");

    std::vector<CalibrationBin> bins(static_cast<std::size_t>(n_bins));
    std::vector<std::size_t> positives(bins.size(), 0);
    for (int i = 0; i < n_bins; ++i) {
        bins[i].score_lo = static_cast<double>(i) / n_bins;
        bins[i].score_hi = static_cast<double>(i + 1) / n_bins;
    }
    for (std::size_t j = 0; j < scores.size(); ++j) {
        const std::size_t b = bin_of(scores[j], n_bins);
        bins[b].count += 1;
        if (truths[j] != 0) positives[b] += 1;
    }
    for (std::size_t b = 0; b < bins.size(); ++b)
        if (bins[b].count > 0)
            bins[b].precision = static_cast<double>(positives[b]) / static_cast<double>(bins[b].count);
    return bins;
}

std::vector<std::size_t> score_histogram(std::span<const double> scores, int n_bins) {
    if (n_bins < 1) throw PreconditionError("histogram needs at least one bin");
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_bins), 0);
    for (double s : scores) counts[bin_of(s, n_bins)] += 1;
    return counts;
}

std::vector<double> isotonic_fit(std::span<const double> values, std::span<const double> weights) {
    if (values.size() != weights.size()) throw ShapeError("values and weights differ in length");
    struct Block {
        double mean;
        double weight;
        std::size_t len;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < values.size(); ++i) {
        blocks.push_back({values[i], weights[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
            Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            const double w = prev.weight + top.weight;
            prev.mean = w > 0.0 ? (prev.mean * prev.weight + top.mean * top.weight) / w
                                : 0.5 * (prev.mean + top.mean);
            prev.weight = w;
            prev.len += top.len;
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& b : blocks) out.insert(out.end(), b.len, b.mean);
    return out;
}

void write_calibration_csv(const std::filesystem::path& path, const std::vector<CalibrationBin>& bins) {
    csv::Writer w(path, {"bin_lo", "bin_hi", "count", "precision"});
    for (const auto& b : bins)
        w.row({csv::format_number(b.score_lo), csv::format_number(b.score_hi), std::to_string(b.count),
               b.precision ? csv::format_number(*b.precision) : std::string{}});
}

void write_histogram_csv(const std::filesystem::path& path, const std::vector<std::size_t>& counts) {
    csv::Writer w(path, {"bin_lo", "bin_hi", "count"});
    const double n = static_cast<double>(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        w.row({csv::format_number(static_cast<double>(i) / n), csv::format_number(static_cast<double>(i + 1) / n),
               std::to_string(counts[i])});
}

} // namespace sae::svm
