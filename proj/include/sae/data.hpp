#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sae::data {

using Index = Eigen::Index;

enum class FeatureKind {
    Image,  ///< pixel intensities scaled into [0,1]
    Vector, ///< raw real values
};

struct ImageShape {
    int rows = 0;
    int cols = 0;
};

struct Sample {
    Index id = 0;
    Eigen::VectorXf features;
    std::optional<int> raw_label;
    std::optional<int> superclass;
};

/// Mapping from raw dataset labels to superclass indices 0..K-1.
struct Decomposition {
    std::string name;
    std::map<int, int> groups;

    /// Number of superclasses. Throws DecompositionError unless the group
    /// indices are exactly 0..K-1.
    int n_groups() const;

    static Decomposition identity(const std::vector<int>& alphabet);
    /// MNIST digits into A=(0,1,9), B=(4,6,8), C=(2,3,5,7).
    static Decomposition mnist_abc();
    /// Fashion-MNIST items into summer, winter and all-year clothes.
    static Decomposition fashion_seasons();
};

/// Column-per-sample feature matrix with labels and a labeled/unlabeled
/// partition. Features are shared between copies and never mutated.
class Dataset {
public:
    Dataset() = default;
    Dataset(Eigen::MatrixXf features, std::vector<std::optional<int>> raw_labels,
            FeatureKind kind, ImageShape shape = {});

    Index size() const { return features_ ? features_->cols() : 0; }
    Index dim() const { return features_ ? features_->rows() : 0; }
    FeatureKind kind() const { return kind_; }
    ImageShape image_shape() const { return shape_; }

    const Eigen::MatrixXf& features() const { return *features_; }
    auto feature(Index id) const { return features_->col(id); }
    Sample sample(Index id) const;

    const std::optional<int>& raw_label(Index id) const { return raw_labels_.at(id); }
    const std::optional<int>& superclass(Index id) const { return superclass_.at(id); }
    const std::vector<std::optional<int>>& raw_labels() const { return raw_labels_; }
    const std::vector<std::optional<int>>& superclasses() const { return superclass_; }
    /// Number of superclasses K (0 before any decomposition is applied).
    int n_classes() const { return n_classes_; }

    void set_superclasses(std::vector<std::optional<int>> superclass, int n_classes);

    /// Ascending id lists; disjoint and together covering every sample.
    const std::vector<Index>& labeled_ids() const { return labeled_; }
    const std::vector<Index>& unlabeled_ids() const { return unlabeled_; }
    bool is_labeled(Index id) const { return labeled_mask_.at(id); }

    /// Replaces the partition. Every labeled id must carry a superclass.
    void set_labeled(std::vector<Index> labeled);
    /// Moves an unlabeled sample to the labeled side with the given class.
    void assign_label(Index id, int superclass);
    /// Drops superclass information from unlabeled samples.
    void hide_unlabeled_classes();

    /// Features and classes of the labeled samples, in labeled-id order.
    Eigen::MatrixXf labeled_features() const;
    std::vector<int> labeled_classes() const;

    /// Sub-dataset with the given ids renumbered 0..ids.size()-1, all unlabeled.
    Dataset subset(const std::vector<Index>& ids) const;

private:
    std::shared_ptr<const Eigen::MatrixXf> features_;
    std::vector<std::optional<int>> raw_labels_;
    std::vector<std::optional<int>> superclass_;
    int n_classes_ = 0;
    FeatureKind kind_ = FeatureKind::Vector;
    ImageShape shape_{};
    std::vector<Index> labeled_;
    std::vector<Index> unlabeled_;
    std::vector<bool> labeled_mask_;
};

/// Reads an IDX image file (magic 0x00000803) and its label file
/// (magic 0x00000801). Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Reads a rectangular numeric CSV. With `has_labels` the last column is an
/// integer raw label. A non-numeric first row is treated as a header.
Dataset load_csv(const std::filesystem::path& path, bool has_labels);

/// Writes features (and raw labels, when every sample has one) so that
/// load_csv reads them back exactly.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

Dataset apply_decomposition(const Dataset& ds, const Decomposition& d);

/// Seeded stratified choice of `n_labeled` samples; the rest become unlabeled.
Dataset split_labeled(const Dataset& ds, Index n_labeled, std::uint64_t seed);

} // namespace sae::data
