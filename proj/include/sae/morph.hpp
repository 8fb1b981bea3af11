#pragma once

#include "sae/data.hpp"
#include "sae/network.hpp"
#include "sae/svm.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace sae::morph {

/// Per-class mean of latent columns; every class in 0..n_classes-1 must occur.
Eigen::MatrixXd class_centers(const Eigen::MatrixXd& latents, std::span<const int> labels, int n_classes);

/// c_to - c_from.
Eigen::VectorXd deformation_vector(const Eigen::Ref<const Eigen::VectorXd>& c_from,
                                   const Eigen::Ref<const Eigen::VectorXd>& c_to);

/// decode(encode(x) + alpha v).
Eigen::VectorXf morph(const nn::SaeModel& sae, const Eigen::Ref<const Eigen::VectorXf>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& v, double alpha);

struct MorphTrack {
    data::Index source = 0;
    int from = 0;
    int to = 1;
    std::vector<double> alphas;
    std::vector<Eigen::VectorXf> outputs;
    /// Normalized score of the shifted latent toward `to` (0 at from's center).
    std::vector<double> scores;
    std::vector<Eigen::VectorXd> latents;
};

/// Morphs x along the vector from class `from`'s center to class `to`'s at
/// n_steps equally spaced alphas in [0,1].
MorphTrack morph_track(const nn::SaeModel& sae, const svm::SvmModel& svm, const Eigen::Ref<const Eigen::VectorXf>& x,
                       int from, int to, int n_steps, data::Index source = 0);

/// Binary PGM (P5) of values in [0,1].
void write_pgm(const std::filesystem::path& path, const Eigen::Ref<const Eigen::VectorXf>& pixels, int rows,
               int cols);

/// One file per step: PGM for image data, a single-row CSV otherwise.
std::vector<std::filesystem::path> write_track(const MorphTrack& t, const std::filesystem::path& dir,
                                               data::FeatureKind kind, data::ImageShape shape);

} // namespace sae::morph
