#include "sae/data.hpp"
#include "sae/error.hpp"

#include "toy.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <numeric>
#include <set>

using namespace sae;
using data::Index;

namespace {

void put_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

struct IdxPair {
    std::filesystem::path images, labels;
};

IdxPair write_idx(const toy::TempDir& dir, const std::vector<std::vector<unsigned char>>& images, int rows, int cols,
                  const std::vector<unsigned char>& labels, std::uint32_t image_magic = 0x803,
                  std::uint32_t label_magic = 0x801) {
    IdxPair p{dir / "images.idx", dir / "labels.idx"};
    std::ofstream im(p.images, std::ios::binary);
    put_be32(im, image_magic);
    put_be32(im, static_cast<std::uint32_t>(images.size()));
    put_be32(im, static_cast<std::uint32_t>(rows));
    put_be32(im, static_cast<std::uint32_t>(cols));
    for (const auto& img : images) im.write(reinterpret_cast<const char*>(img.data()), img.size());
    std::ofstream lb(p.labels, std::ios::binary);
    put_be32(lb, label_magic);
    put_be32(lb, static_cast<std::uint32_t>(labels.size()));
    lb.write(reinterpret_cast<const char*>(labels.data()), labels.size());
    return p;
}

// Independent reader: sums the raw pixel bytes of image `index` straight from
// the file, skipping the 16-byte header.
double byte_checksum(const std::filesystem::path& path, std::size_t index, std::size_t dim) {
    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(16 + index * dim));
    std::vector<unsigned char> buf(dim);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
    REQUIRE(in.gcount() == static_cast<std::streamsize>(dim));
    return std::accumulate(buf.begin(), buf.end(), 0.0) / 255.0;
}

} // namespace

TEST_CASE("load_idx reads a small synthetic pair") {
    toy::TempDir dir("idx");
    std::vector<std::vector<unsigned char>> images{{0, 255, 128, 1, 2, 3}, {10, 20, 30, 40, 50, 60}};
    const auto p = write_idx(dir, images, 2, 3, {7, 4});
    const auto ds = data::load_idx(p.images, p.labels);
    REQUIRE(ds.size() == 2);
    CHECK(ds.dim() == 6);
    CHECK(ds.kind() == data::FeatureKind::Image);
    CHECK(ds.image_shape().rows == 2);
    CHECK(ds.image_shape().cols == 3);
    CHECK(*ds.raw_label(0) == 7);
    CHECK(*ds.raw_label(1) == 4);
    // row-major flattening, scaled by 1/255
    CHECK(ds.feature(0)(1) == doctest::Approx(1.0));
    CHECK(ds.feature(0)(2) == doctest::Approx(128.0 / 255.0));
    CHECK(ds.feature(1)(5) == doctest::Approx(60.0 / 255.0));
    CHECK(ds.features().minCoeff() >= 0.0f);
    CHECK(ds.features().maxCoeff() <= 1.0f);
    CHECK(ds.labeled_ids().empty());
    CHECK(ds.unlabeled_ids().size() == 2);
}

TEST_CASE("load_idx errors") {
    toy::TempDir dir("idx_err");
    std::vector<std::vector<unsigned char>> images{{1, 2, 3, 4}};
    SUBCASE("bad image magic") {
        const auto p = write_idx(dir, images, 2, 2, {1}, 0x804);
        CHECK_THROWS_AS(data::load_idx(p.images, p.labels), FormatError);
    }
    SUBCASE("bad label magic") {
        const auto p = write_idx(dir, images, 2, 2, {1}, 0x803, 0x803);
        CHECK_THROWS_AS(data::load_idx(p.images, p.labels), FormatError);
    }
    SUBCASE("count mismatch") {
        const auto p = write_idx(dir, images, 2, 2, {1, 2});
        CHECK_THROWS_AS(data::load_idx(p.images, p.labels), ConsistencyError);
    }
    SUBCASE("truncated pixels") {
        const auto p = write_idx(dir, images, 2, 2, {1});
        std::filesystem::resize_file(p.images, 16 + 2);
        CHECK_THROWS_AS(data::load_idx(p.images, p.labels), IoError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(data::load_idx(dir / "nope", dir / "nope2"), IoError);
    }
}

TEST_CASE("MNIST training files match an independent byte reader") {
    const std::filesystem::path root = SAE_DATA_DIR;
    const auto images = root / "train-images-idx3-ubyte";
    const auto labels = root / "train-labels-idx1-ubyte";
    if (!std::filesystem::exists(images)) {
        MESSAGE("MNIST not found under " << root.string() << "; skipped");
        return;
    }
    const auto ds = data::load_idx(images, labels);
    CHECK(ds.size() == 60000);
    CHECK(ds.dim() == 784);
    CHECK(ds.features().minCoeff() >= 0.0f);
    CHECK(ds.features().maxCoeff() <= 1.0f);
    for (std::size_t i : {std::size_t{0}, std::size_t{1}, std::size_t{59999}}) {
        const double expect = byte_checksum(images, i, 784);
        CHECK(ds.feature(static_cast<Index>(i)).cast<double>().sum() == doctest::Approx(expect).epsilon(1e-6));
    }
    // label byte of the first sample, read directly
    std::ifstream in(labels, std::ios::binary);
    in.seekg(8);
    const int first = in.get();
    CHECK(*ds.raw_label(0) == first);
}

TEST_CASE("load_csv shapes, labels and errors") {
    toy::TempDir dir("csv_data");
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream(dir / name) << text;
        return dir / name;
    };
    SUBCASE("3 rows, 4 columns, no labels") {
        const auto ds = data::load_csv(write("a.csv", "1,2,3,4\n5,6,7,8\n9,10,11,12\n"), false);
        CHECK(ds.size() == 3);
        CHECK(ds.dim() == 4);
        CHECK(ds.kind() == data::FeatureKind::Vector);
        CHECK(!ds.raw_label(0).has_value());
        CHECK(ds.feature(2)(3) == 12.0f);
    }
    SUBCASE("label column and header") {
        const auto ds = data::load_csv(write("b.csv", "x,y,label\n0.5,1.5,0\n2.5,3.5,1\n"), true);
        CHECK(ds.size() == 2);
        CHECK(ds.dim() == 2);
        CHECK(*ds.raw_label(0) == 0);
        CHECK(*ds.raw_label(1) == 1);
    }
    SUBCASE("ragged rows") {
        CHECK_THROWS_AS(data::load_csv(write("c.csv", "1,2,3\n4,5\n"), false), FormatError);
    }
    SUBCASE("non-numeric cell") {
        CHECK_THROWS_AS(data::load_csv(write("d.csv", "1,2\n3,abc\n"), false), ParseError);
    }
}

TEST_CASE("write_csv then load_csv reproduces the dataset") {
    toy::TempDir dir("csv_rt");
    const auto ds = toy::blobs(50, 5, 3, 2.0, 0.7, 11);
    data::write_csv(ds, dir / "rt.csv");
    const auto back = data::load_csv(dir / "rt.csv", true);
    REQUIRE(back.size() == ds.size());
    CHECK(back.features() == ds.features());
    for (Index i = 0; i < ds.size(); ++i) CHECK(back.raw_label(i) == ds.raw_label(i));
}

TEST_CASE("apply_decomposition follows the superclass tables") {
    std::vector<std::optional<int>> raw;
    for (int d = 0; d < 10; ++d) raw.push_back(d);
    data::Dataset ds(Eigen::MatrixXf::Zero(2, 10), raw, data::FeatureKind::Vector);
    const auto abc = data::apply_decomposition(ds, data::Decomposition::mnist_abc());
    CHECK(abc.n_classes() == 3);
    const std::map<int, int> expect{{0, 0}, {1, 0}, {9, 0}, {4, 1}, {6, 1}, {8, 1}, {2, 2}, {3, 2}, {5, 2}, {7, 2}};
    for (auto [digit, cls] : expect) CHECK(*abc.superclass(digit) == cls);

    const auto seasons = data::apply_decomposition(ds, data::Decomposition::fashion_seasons());
    CHECK(seasons.n_classes() == 3);

    data::Decomposition partial{"partial", {{0, 0}, {1, 1}}};
    CHECK_THROWS_AS(data::apply_decomposition(ds, partial), DecompositionError);
    data::Decomposition gap{"gap", {{0, 0}, {1, 2}}};
    CHECK_THROWS_AS(gap.n_groups(), DecompositionError);
}

TEST_CASE("split_labeled is stratified, seeded and a partition") {
    auto ds = toy::blobs(1000, 4, 3, 1.0, 1.0, 5);
    // uneven class sizes
    std::vector<std::optional<int>> sup(1000);
    for (Index i = 0; i < 1000; ++i) sup[i] = i < 500 ? 0 : (i < 800 ? 1 : 2);
    ds.set_superclasses(sup, 3);

    const auto a = data::split_labeled(ds, 100, 42);
    const auto b = data::split_labeled(ds, 100, 42);
    const auto c = data::split_labeled(ds, 100, 43);
    CHECK(a.labeled_ids() == b.labeled_ids());
    CHECK(a.labeled_ids() != c.labeled_ids());
    CHECK(a.labeled_ids().size() == 100);

    std::map<int, int> per_class;
    for (Index id : a.labeled_ids()) per_class[*a.superclass(id)]++;
    CHECK(per_class[0] == 50);
    CHECK(per_class[1] == 30);
    CHECK(per_class[2] == 20);

    std::set<Index> all(a.labeled_ids().begin(), a.labeled_ids().end());
    for (Index id : a.unlabeled_ids()) CHECK(all.insert(id).second);
    CHECK(all.size() == 1000);
    CHECK(std::is_sorted(a.labeled_ids().begin(), a.labeled_ids().end()));

    CHECK_THROWS_AS(data::split_labeled(ds, 1001, 0), SplitError);
}

TEST_CASE("assign_label moves a sample and refuses to relabel") {
    auto ds = data::split_labeled(toy::blobs(20, 2, 2, 1.0, 0.1, 1), 4, 0);
    const Index id = ds.unlabeled_ids().front();
    ds.assign_label(id, 1);
    CHECK(ds.is_labeled(id));
    CHECK(ds.labeled_ids().size() == 5);
    CHECK(ds.unlabeled_ids().size() == 15);
    CHECK_THROWS_AS(ds.assign_label(id, 0), ConsistencyError);
    CHECK_THROWS_AS(ds.assign_label(ds.unlabeled_ids().front(), 5), ConsistencyError);
}

TEST_CASE("hide_unlabeled_classes keeps labeled classes only") {
    auto ds = data::split_labeled(toy::blobs(30, 2, 3, 1.0, 0.1, 1), 6, 0);
    ds.hide_unlabeled_classes();
    for (Index id : ds.unlabeled_ids()) CHECK(!ds.superclass(id).has_value());
    for (Index id : ds.labeled_ids()) CHECK(ds.superclass(id).has_value());
}
