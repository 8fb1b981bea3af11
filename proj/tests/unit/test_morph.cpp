#include "sae/error.hpp"
#include "sae/morph.hpp"
#include "sae/train.hpp"

#include "toy.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>

using namespace sae;

namespace {

struct Fixture {
    data::Dataset ds;
    nn::SaeModel sae;
    svm::SvmModel svm;

    Fixture() : ds(data::split_labeled(toy::blobs(120, 6, 3, 3.0, 0.5, 1), 60, 2)),
                sae(nn::init_model<float>({{6, 8, 2}, nn::Activation::Sigmoid}, 3)) {
        const auto z = nn::encode_ids(sae, ds, ds.labeled_ids()).cast<double>();
        svm = svm::svm_fit(z, ds.labeled_classes(), 3, {1e-2, 20, 0});
    }
};

} // namespace

TEST_CASE("class_centers averages each class") {
    Eigen::MatrixXd z(2, 5);
    z << 0, 2, 10, 4, 12, 0, 2, 10, 4, 14;
    const std::vector<int> labels{0, 0, 1, 0, 1};
    const auto c = morph::class_centers(z, labels, 2);
    CHECK(c(0, 0) == 2.0);
    CHECK(c(1, 0) == 2.0);
    CHECK(c(0, 1) == 11.0);
    CHECK(c(1, 1) == 12.0);
    CHECK_THROWS_AS(morph::class_centers(z, labels, 3), PreconditionError);
    CHECK_THROWS_AS(morph::class_centers(z, std::vector<int>{0, 1}, 2), ShapeError);
}

TEST_CASE("deformation vectors are antisymmetric") {
    const Eigen::Vector3d a(1, 2, 3), b(-1, 0, 5);
    CHECK(morph::deformation_vector(a, b) == -morph::deformation_vector(b, a));
    CHECK(morph::deformation_vector(a, b) == b - a);
    CHECK_THROWS_AS(morph::deformation_vector(a, Eigen::Vector2d(0, 0)), ShapeError);
}

TEST_CASE("alpha 0 reproduces the reconstruction bit for bit") {
    Fixture f;
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(2, 0.123456789);
    for (data::Index id : {0, 7, 50}) {
        const Eigen::VectorXf x = f.ds.feature(id);
        const Eigen::VectorXf recon = f.sae.decode(f.sae.encode(Eigen::MatrixXf(x))).col(0);
        const Eigen::VectorXf out = morph::morph(f.sae, x, v, 0.0);
        CHECK(out.size() == recon.size());
        CHECK(std::memcmp(out.data(), recon.data(), sizeof(float) * out.size()) == 0);
    }
}

TEST_CASE("morph_track moves the score affinely toward the target") {
    Fixture f;
    const Eigen::VectorXf x = f.ds.feature(3);
    for (auto [from, to] : {std::pair{0, 2}, std::pair{2, 0}, std::pair{1, 2}}) {
        const auto t = morph::morph_track(f.sae, f.svm, x, from, to, 5, 3);
        REQUIRE(t.outputs.size() == 5);
        CHECK(t.alphas.front() == 0.0);
        CHECK(t.alphas.back() == 1.0);
        const Eigen::VectorXd v = f.svm.centers.col(to) - f.svm.centers.col(from);
        CHECK((t.latents[4] - t.latents[0] - v).norm() < 1e-9);
        // the unclamped decision value is affine in alpha
        const int a = std::min(from, to), b = std::max(from, to);
        const double d0 = svm::decision_value(f.svm, a, b, t.latents[0]);
        const double d2 = svm::decision_value(f.svm, a, b, t.latents[2]);
        const double d4 = svm::decision_value(f.svm, a, b, t.latents[4]);
        CHECK(d2 == doctest::Approx(0.5 * (d0 + d4)).epsilon(1e-9));
        for (double s : t.scores) CHECK((s >= 0.0 && s <= 1.0));
    }
    CHECK_THROWS_AS(morph::morph_track(f.sae, f.svm, x, 1, 1, 5), PreconditionError);
    CHECK_THROWS_AS(morph::morph_track(f.sae, f.svm, x, 0, 1, 1), PreconditionError);
    CHECK_THROWS_AS(morph::morph_track(f.sae, f.svm, x, 0, 3, 5), PreconditionError);
}

TEST_CASE("write_pgm writes a P5 image") {
    toy::TempDir dir("pgm");
    Eigen::VectorXf px(6);
    px << 0.0f, 1.0f, 0.5f, 2.0f, -1.0f, 0.2f;
    morph::write_pgm(dir / "a.pgm", px, 2, 3);
    std::ifstream in(dir / "a.pgm", std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), {});
    const std::string header = "P5\n3 2\n255\n";
    REQUIRE(bytes.size() == header.size() + 6);
    CHECK(bytes.substr(0, header.size()) == header);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + header.size());
    CHECK(p[0] == 0);
    CHECK(p[1] == 255);
    CHECK(p[2] == 128);
    CHECK(p[3] == 255);
    CHECK(p[4] == 0);
    CHECK(p[5] == 51);
    CHECK_THROWS_AS(morph::write_pgm(dir / "b.pgm", px, 2, 2), ShapeError);
}

TEST_CASE("write_track names one file per step") {
    Fixture f;
    toy::TempDir dir("track");
    const auto t = morph::morph_track(f.sae, f.svm, f.ds.feature(9), 0, 1, 3, 9);
    const auto files = morph::write_track(t, dir / "out", data::FeatureKind::Vector, {});
    REQUIRE(files.size() == 3);
    CHECK(files[0].filename() == "morph_9_0_1_step000.csv");
    CHECK(files[2].filename() == "morph_9_0_1_step002.csv");
    for (const auto& p : files) CHECK(std::filesystem::exists(p));
}
