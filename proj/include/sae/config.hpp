#pragma once

#include "sae/data.hpp"
#include "sae/mds.hpp"
#include "sae/network.hpp"
#include "sae/svm.hpp"
#include "sae/train.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sae::config {

struct DataConfig {
    std::string format = "idx"; ///< "idx" or "csv"
    std::filesystem::path train_images, train_labels, test_images, test_labels; // idx
    std::filesystem::path train_csv, test_csv;                                  // csv
    bool csv_has_labels = true;
    std::size_t max_train = 0; ///< 0 keeps every training sample
    std::size_t max_test = 0;

    bool operator==(const DataConfig&) const = default;
};

struct ActiveConfig {
    std::size_t initial_labels = 600;
    std::uint64_t split_seed = 0;
    std::size_t k = 100;
    int rounds = 1;
    int round_epochs = 5;
    bool cold_restart = false;
    std::filesystem::path oracle; ///< replay oracle CSV (id,label)

    bool operator==(const ActiveConfig&) const = default;
};

struct RunConfig {
    DataConfig data;
    /// "mnist_abc", "fashion_seasons", "identity" or "custom"
    std::string decomposition = "mnist_abc";
    std::map<int, int> custom_groups;
    /// Either a uniform inter-class distance or an explicit matrix.
    double inter_class_distance = 1.0;
    std::optional<Eigen::MatrixXd> distance_matrix;
    nn::MlpSpec network{{784, 256, 64, 10}, nn::Activation::Sigmoid};
    nn::TrainConfig train;
    svm::SvmOptions svm;
    ActiveConfig active;
    std::filesystem::path output_dir = "out";

    /// Field-path messages for every problem; empty when valid.
    std::vector<std::string> problems(bool check_files = true) const;
    /// Throws ConfigError listing every problem.
    void validate(bool check_files = true) const;

    /// "identity" keeps the distinct raw labels in `raw_labels`, or the
    /// digits 0-9 when none are given.
    data::Decomposition make_decomposition(const std::vector<int>& raw_labels = {}) const;
    mds::DistanceSpec make_distance_spec(int n_classes) const;

    bool operator==(const RunConfig& o) const;
};

std::string to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys and mistyped values raise
/// ConfigError naming the field path.
RunConfig from_json(const std::string& text);
RunConfig load(const std::filesystem::path& path);
void save(const RunConfig& c, const std::filesystem::path& path);

/// Applies "a.b=value" overrides, value parsed as JSON when possible and as
/// a string otherwise.
RunConfig with_overrides(const RunConfig& c, const std::vector<std::string>& overrides);

/// Training and test data as the config describes them, decomposed, with
/// the training set split by the active schedule. Unlabeled training
/// samples keep their true class so that a replay oracle can be built from
/// them; training only ever reads labeled classes.
struct LoadedData {
    data::Dataset train;
    data::Dataset test;
};
LoadedData load_data(const RunConfig& c);

} // namespace sae::config
