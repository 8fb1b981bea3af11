#pragma once

#include "sae/active.hpp"
#include "sae/checkpoint.hpp"
#include "sae/config.hpp"
#include "sae/evaluate.hpp"
#include "sae/morph.hpp"
#include "sae/train.hpp"

#include <filesystem>
#include <vector>

namespace sae::commands {

struct TrainOutcome {
    Checkpoint checkpoint;
    std::vector<nn::EpochMetrics> metrics;
    std::filesystem::path checkpoint_path, metrics_path, latent_path;
};

/// Trains from scratch, fits the SVM and writes model.sae, metrics.csv and
/// latent2d.csv into the output directory.
TrainOutcome train(const config::RunConfig& cfg);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<nn::EpochMetrics>& metrics);

/// First two latent axes (or a seeded random projection when m > 2 and
/// `random_projection` is set) with the class of labeled samples.
void write_latent_csv(const std::filesystem::path& path, const nn::SaeModel& model, const data::Dataset& ds,
                      bool random_projection = false, std::uint64_t seed = 0);

struct EvalOutcome {
    EvalReport report;
    std::filesystem::path calibration_path, histogram_path;
};

/// Test error, reconstruction RMSE, calibration and histogram CSVs.
EvalOutcome eval(const config::RunConfig& cfg, const Checkpoint& ckpt, const data::Dataset& test);

struct SweepRow {
    double gamma = 0.0;
    double recon_rmse = 0.0;
    double class_error = 0.0;
};

/// One independent run per gamma; writes gamma_sweep.csv.
std::vector<SweepRow> sweep_gamma(const config::RunConfig& cfg, const std::vector<double>& gammas);

struct GuidedOutcome {
    double pre_error = 0.0;
    std::vector<active::RoundRecord> records;
};

/// Trains on the initial labels, then runs the guided and the random arm
/// from the same state with the same seeds. Unlabeled classes of `train`
/// are hidden from training and serve as the replay oracle unless
/// `oracle` is given.
GuidedOutcome guided_experiment(const config::RunConfig& cfg, data::Dataset train, const data::Dataset& test,
                                active::Oracle* oracle = nullptr);

/// Loads data, runs guided_experiment and appends every round to guided.csv.
GuidedOutcome guided(const config::RunConfig& cfg);

/// Morphs one sample and writes one file per step into output_dir/morph.
morph::MorphTrack morph_sample(const config::RunConfig& cfg, const Checkpoint& ckpt, const data::Dataset& ds,
                               data::Index id, int from, int to, int n_steps);

/// Ranks the unlabeled samples and writes ranking.csv (id, margin, score_k...).
active::UncertaintyRanking rank(const config::RunConfig& cfg, const Checkpoint& ckpt, const data::Dataset& ds,
                                std::size_t k);

} // namespace sae::commands
