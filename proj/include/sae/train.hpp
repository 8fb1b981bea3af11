#pragma once

#include "sae/data.hpp"
#include "sae/mds.hpp"
#include "sae/network.hpp"
#include "sae/optimizer.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace sae::nn {

struct TrainConfig {
    double gamma = 0.5;
    double learning_rate = 0.05;
    int batch_size = 64;
    int epochs = 10;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Sgd;
    double momentum = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    mds::SmacofOptions mds;

    void validate() const;
    OptimizerSettings optimizer_settings() const;
    bool operator==(const TrainConfig& o) const;
};

struct EpochMetrics {
    int epoch = 0;
    double recon_rmse = 0.0;      ///< sqrt of the mean squared residual per feature
    double recon_loss = 0.0;      ///< mean L_AE over all samples
    double structural_loss = 0.0; ///< mean L_S over labeled samples
    double combined_loss = 0.0;   ///< mean per-sample L_SAE
    double mds_stress = 0.0;
    double align_residual = 0.0;
};

/// Target geometry for one epoch. Columns follow `ids`.
struct LatentFrame {
    std::vector<data::Index> ids;
    Eigen::MatrixXd latents;  ///< Z
    Eigen::MatrixXd mds;      ///< Z*
    Eigen::MatrixXd rotation; ///< R
    Eigen::MatrixXd targets;  ///< R Z*
    double stress = 0.0;     ///< final MDS stress of the collapsed problem
    int rank_used = 0;
    bool alignment_skipped = false; ///< too few labeled samples for a rotation
};

/// Seeded permutation of 0..n-1 used for the mini-batches of one epoch.
std::vector<data::Index> epoch_order(data::Index n, std::uint64_t seed, int epoch);

/// Encodes the given samples, in order, in chunks.
Eigen::MatrixXf encode_ids(const SaeModel& model, const data::Dataset& ds,
                           const std::vector<data::Index>& ids);
Eigen::MatrixXf encode_all(const SaeModel& model, const data::Dataset& ds);

/// Computes MDS targets aligned to the current latent configuration of the
/// labeled samples.
LatentFrame compute_frame(const SaeModel& model, const data::Dataset& ds, const mds::DistanceSpec& spec,
                          const mds::SmacofOptions& opts);

/// Stateful training loop: model, optimizer state and epoch counter. Each
/// call to run_epoch refreshes the targets and then makes one pass of
/// mini-batch descent over every sample.
class Trainer {
public:
    using BatchObserver = std::function<void(const BatchLoss&)>;

    Trainer(SaeModel model, mds::DistanceSpec spec, TrainConfig cfg);

    EpochMetrics run_epoch(const data::Dataset& ds);

    const SaeModel& model() const { return model_; }
    const TrainConfig& config() const { return cfg_; }
    TrainConfig& config() { return cfg_; }
    const mds::DistanceSpec& distance_spec() const { return spec_; }
    int epoch() const { return epoch_; }
    const std::optional<LatentFrame>& frame() const { return frame_; }
    const std::vector<EpochMetrics>& history() const { return history_; }

    void set_batch_observer(BatchObserver obs) { observer_ = std::move(obs); }
    /// Forgets momentum / Adam moments.
    void reset_optimizer();

private:
    SaeModel model_;
    mds::DistanceSpec spec_;
    TrainConfig cfg_;
    int epoch_ = 0;
    LayerOptimizer enc_opt_;
    LayerOptimizer dec_opt_;
    std::optional<LatentFrame> frame_;
    std::vector<EpochMetrics> history_;
    BatchObserver observer_;
};

struct TrainCallbacks {
    /// Called after each epoch; returning false stops training.
    std::function<bool(const EpochMetrics&, const SaeModel&)> on_epoch;
    Trainer::BatchObserver on_batch;
};

struct TrainResult {
    SaeModel model;
    std::vector<EpochMetrics> metrics;
};

TrainResult train(SaeModel model, const data::Dataset& ds, const mds::DistanceSpec& spec,
                  const TrainConfig& cfg, const TrainCallbacks& callbacks = {});

} // namespace sae::nn
