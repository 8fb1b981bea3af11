#include "sae/morph.hpp"

#include "sae/csv.hpp"
#include "sae/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace sae::morph {

Eigen::MatrixXd class_centers(const Eigen::MatrixXd& latents, std::span<const int> labels, int n_classes) {
    if (static_cast<Eigen::Index>(labels.size()) != latents.cols()) throw ShapeError("one label per latent column");
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(latents.rows(), n_classes);
    std::vector<int> count(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const int c = labels[j];
        if (c < 0 || c >= n_classes) throw PreconditionError("label out of range");
        sum.col(c) += latents.col(static_cast<Eigen::Index>(j));
        ++count[c];
    }
    for (int c = 0; c < n_classes; ++c) {
        if (count[c] == 0) throw PreconditionError("class " + std::to_string(c) + " has no samples");
        sum.col(c) /= static_cast<double>(count[c]);
    }
    return sum;
}

Eigen::VectorXd deformation_vector(const Eigen::Ref<const Eigen::VectorXd>& c_from,
                                   const Eigen::Ref<const Eigen::VectorXd>& c_to) {
    if (c_from.size() != c_to.size()) throw ShapeError("centers differ in dimension");
    return c_to - c_from;
}

namespace {

Eigen::VectorXd shifted_latent(const nn::SaeModel& sae, const Eigen::Ref<const Eigen::VectorXf>& x,
                               const Eigen::Ref<const Eigen::VectorXd>& v, double alpha) {
    if (x.size() != sae.input_dim()) throw ShapeError("input does not match the model");
    if (v.size() != sae.latent_dim()) throw ShapeError("deformation does not match the latent dimension");
    const Eigen::MatrixXf z = sae.encode(Eigen::MatrixXf(x));
    return z.col(0).cast<double>() + alpha * v;
}

} // namespace

Eigen::VectorXf morph(const nn::SaeModel& sae, const Eigen::Ref<const Eigen::VectorXf>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& v, double alpha) {
    if (x.size() != sae.input_dim()) throw ShapeError("input does not match the model");
    if (v.size() != sae.latent_dim()) throw ShapeError("deformation does not match the latent dimension");
    Eigen::MatrixXf z = sae.encode(Eigen::MatrixXf(x));
    // alpha = 0 must reproduce the plain reconstruction exactly
    if (alpha != 0.0) z = (z.cast<double>() + alpha * v).cast<float>();
    return sae.decode(z).col(0);
}

MorphTrack morph_track(const nn::SaeModel& sae, const svm::SvmModel& svm, const Eigen::Ref<const Eigen::VectorXf>& x,
                       int from, int to, int n_steps, data::Index source) {
    if (n_steps < 2) throw PreconditionError("a morph track needs at least two steps");
    if (from == to || from < 0 || to < 0 || from >= svm.n_classes || to >= svm.n_classes)
        throw PreconditionError("invalid class pair for morphing");
    const Eigen::VectorXd v = deformation_vector(svm.centers.col(from), svm.centers.col(to));

    MorphTrack t;
    t.source = source;
    t.from = from;
    t.to = to;
    const int a = std::min(from, to), b = std::max(from, to);
    for (int i = 0; i < n_steps; ++i) {
        const double alpha = static_cast<double>(i) / (n_steps - 1);
        t.alphas.push_back(alpha);
        t.outputs.push_back(morph(sae, x, v, alpha));
        const Eigen::VectorXd z = shifted_latent(sae, x, v, alpha);
        const double s = svm::normalized_score(svm, a, b, z);
        t.scores.push_back(to == b ? s : 1.0 - s);
        t.latents.push_back(z);
    }
    return t;
}

void write_pgm(const std::filesystem::path& path, const Eigen::Ref<const Eigen::VectorXf>& pixels, int rows,
               int cols) {
    if (rows <= 0 || cols <= 0 || pixels.size() != static_cast<Eigen::Index>(rows) * cols)
        throw ShapeError("pixel count does not match the image shape");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << cols << ' ' << rows << "\n255\n";
    for (Eigen::Index i = 0; i < pixels.size(); ++i) {
        const float p = std::clamp(pixels[i], 0.0f, 1.0f);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(p * 255.0f))));
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::filesystem::path> write_track(const MorphTrack& t, const std::filesystem::path& dir,
                                               data::FeatureKind kind, data::ImageShape shape) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> files;
    for (std::size_t i = 0; i < t.outputs.size(); ++i) {
        char name[64];
        const bool image = kind == data::FeatureKind::Image;
        std::snprintf(name, sizeof name, "morph_%lld_%d_%d_step%03zu.%s", static_cast<long long>(t.source), t.from,
                      t.to, i, image ? "pgm" : "csv");
        const auto path = dir / name;
        if (image) {
            write_pgm(path, t.outputs[i], shape.rows, shape.cols);
        } else {
            std::vector<std::string> header, row;
            for (Eigen::Index d = 0; d < t.outputs[i].size(); ++d) {
                header.push_back("x" + std::to_string(d));
                row.push_back(csv::format_number(t.outputs[i][d]));
            }
            csv::Writer w(path, header);
            w.row(row);
        }
        files.push_back(path);
    }
    return files;
}

} // namespace sae::morph
