#include "sae/train.hpp"

#include "sae/align.hpp"
#include "sae/error.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace sae::nn {

void TrainConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0,1]");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (mds.max_iter < 1) throw ConfigError("mds.max_iter must be positive");
    if (!(mds.tol > 0.0)) throw ConfigError("mds.tol must be positive");
}

OptimizerSettings TrainConfig::optimizer_settings() const {
    return {optimizer, learning_rate, momentum, adam_beta1, adam_beta2, adam_epsilon};
}

bool TrainConfig::operator==(const TrainConfig& o) const {
    return gamma == o.gamma && learning_rate == o.learning_rate && batch_size == o.batch_size &&
           epochs == o.epochs && seed == o.seed && optimizer == o.optimizer && momentum == o.momentum &&
           adam_beta1 == o.adam_beta1 && adam_beta2 == o.adam_beta2 && adam_epsilon == o.adam_epsilon &&
           mds.max_iter == o.mds.max_iter && mds.tol == o.mds.tol && mds.seed == o.mds.seed;
}

std::vector<data::Index> epoch_order(data::Index n, std::uint64_t seed, int epoch) {
    std::vector<data::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), data::Index{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

Eigen::MatrixXf encode_ids(const SaeModel& model, const data::Dataset& ds, const std::vector<data::Index>& ids) {
    constexpr std::size_t kChunk = 1024;
    Eigen::MatrixXf out(model.latent_dim(), static_cast<Eigen::Index>(ids.size()));
    Eigen::MatrixXf batch;
    for (std::size_t start = 0; start < ids.size(); start += kChunk) {
        const std::size_t len = std::min(kChunk, ids.size() - start);
        batch.resize(ds.dim(), static_cast<Eigen::Index>(len));
        for (std::size_t j = 0; j < len; ++j) batch.col(static_cast<Eigen::Index>(j)) = ds.feature(ids[start + j]);
        out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) = model.encode(batch);
    }
    return out;
}

Eigen::MatrixXf encode_all(const SaeModel& model, const data::Dataset& ds) {
    std::vector<data::Index> ids(static_cast<std::size_t>(ds.size()));
    std::iota(ids.begin(), ids.end(), data::Index{0});
    return encode_ids(model, ds, ids);
}

LatentFrame compute_frame(const SaeModel& model, const data::Dataset& ds, const mds::DistanceSpec& spec,
                          const mds::SmacofOptions& opts) {
    LatentFrame frame;
    frame.ids = ds.labeled_ids();
    frame.latents = encode_ids(model, ds, frame.ids).cast<double>();
    const auto labels = ds.labeled_classes();
    auto placement = mds::per_sample_targets(frame.latents, labels, spec, opts);
    frame.mds = std::move(placement.targets);
    frame.stress = placement.report.final_stress;

    const Eigen::Index m = frame.latents.rows();
    if (frame.latents.cols() > m) {
        auto aligned = align::ideal_rotation(frame.latents, frame.mds);
        frame.rotation = std::move(aligned.rotation);
        frame.rank_used = aligned.rank_used;
    } else {
        frame.rotation = Eigen::MatrixXd::Identity(m, m);
        frame.alignment_skipped = true;
    }
    frame.targets = align::place_targets(frame.rotation, frame.mds);
    return frame;
}

Trainer::Trainer(SaeModel model, mds::DistanceSpec spec, TrainConfig cfg)
    : model_(std::move(model)), spec_(std::move(spec)), cfg_(cfg) {
    cfg_.validate();
    reset_optimizer();
}

void Trainer::reset_optimizer() {
    enc_opt_ = LayerOptimizer(cfg_.optimizer_settings());
    dec_opt_ = LayerOptimizer(cfg_.optimizer_settings());
}

EpochMetrics Trainer::run_epoch(const data::Dataset& ds) {
    if (ds.dim() != model_.input_dim()) throw ShapeError("dataset dimension does not match the model input");
    const int epoch = epoch_;

    const bool structured = cfg_.gamma > 0.0 && !ds.labeled_ids().empty();
    EpochMetrics metrics;
    metrics.epoch = epoch;
    std::vector<int> target_col;
    if (structured) {
        frame_ = compute_frame(model_, ds, spec_, cfg_.mds);
        target_col.assign(static_cast<std::size_t>(ds.size()), -1);
        for (std::size_t j = 0; j < frame_->ids.size(); ++j) target_col[frame_->ids[j]] = static_cast<int>(j);
        metrics.align_residual = (frame_->latents.colwise() - frame_->latents.rowwise().mean() - frame_->targets).norm();
        metrics.mds_stress = frame_->stress;
    } else {
        frame_.reset();
    }

    const auto order = epoch_order(ds.size(), cfg_.seed, epoch);
    const std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
    Eigen::MatrixXf x;
    BatchTargets<float> targets;

    double recon_sum = 0.0, recon_sq = 0.0, structural_sum = 0.0, combined_sum = 0.0;
    Eigen::Index seen = 0, seen_labeled = 0;
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += bs, ++batch_no) {
        const std::size_t len = std::min(bs, order.size() - start);
        x.resize(ds.dim(), static_cast<Eigen::Index>(len));
        for (std::size_t j = 0; j < len; ++j) x.col(static_cast<Eigen::Index>(j)) = ds.feature(order[start + j]);

        const BatchTargets<float>* tp = nullptr;
        if (structured) {
            targets.positions.resize(model_.latent_dim(), static_cast<Eigen::Index>(len));
            targets.mask.assign(len, false);
            bool any = false;
            for (std::size_t j = 0; j < len; ++j) {
                const int col = target_col[order[start + j]];
                if (col < 0) {
                    targets.positions.col(static_cast<Eigen::Index>(j)).setZero();
                    continue;
                }
                targets.positions.col(static_cast<Eigen::Index>(j)) = frame_->targets.col(col).cast<float>();
                targets.mask[j] = true;
                any = true;
            }
            if (any) tp = &targets;
        }

        std::pair<SaeModel, BatchLoss> gl;
        try {
            gl = gradients(model_, x, tp, cfg_.gamma);
        } catch (const NumericError& e) {
            throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(batch_no) + ": " + e.what());
        }
        const BatchLoss& loss = gl.second;
        if (observer_) observer_(loss);
        enc_opt_.step(model_.encoder(), gl.first.encoder());
        dec_opt_.step(model_.decoder(), gl.first.decoder());

        recon_sum += loss.recon * static_cast<double>(loss.n);
        recon_sq += loss.recon_sq_sum;
        structural_sum += loss.structural * static_cast<double>(loss.n_labeled);
        combined_sum += loss.combined * static_cast<double>(loss.n);
        seen += loss.n;
        seen_labeled += loss.n_labeled;
    }
    if (!model_.all_finite())
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": parameters not finite");

    const double n = static_cast<double>(std::max<Eigen::Index>(seen, 1));
    metrics.recon_loss = recon_sum / n;
    metrics.recon_rmse = std::sqrt(recon_sq / (n * static_cast<double>(ds.dim())));
    metrics.structural_loss = seen_labeled ? structural_sum / static_cast<double>(seen_labeled) : 0.0;
    metrics.combined_loss = combined_sum / n;
    ++epoch_;
    history_.push_back(metrics);
    return metrics;
}

TrainResult train(SaeModel model, const data::Dataset& ds, const mds::DistanceSpec& spec, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks) {
    Trainer trainer(std::move(model), spec, cfg);
    if (callbacks.on_batch) trainer.set_batch_observer(callbacks.on_batch);
    for (int e = 0; e < cfg.epochs; ++e) {
        const EpochMetrics m = trainer.run_epoch(ds);
        if (callbacks.on_epoch && !callbacks.on_epoch(m, trainer.model())) break;
    }
    return {trainer.model(), trainer.history()};
}

} // namespace sae::nn
