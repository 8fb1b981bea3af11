#include "sae/data.hpp"

#include "sae/csv.hpp"
#include "sae/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace sae::data {

// ---------------------------------------------------------------------------
// Decomposition

int Decomposition::n_groups() const {
    if (groups.empty()) throw DecompositionError("decomposition '" + name + "' has no groups");
    std::set<int> ids;
    for (const auto& [raw, g] : groups) ids.insert(g);
    int k = static_cast<int>(ids.size());
    if (*ids.begin() != 0 || *ids.rbegin() != k - 1)
        throw DecompositionError("decomposition '" + name + "' group indices must be 0..K-1");
    return k;
}

Decomposition Decomposition::identity(const std::vector<int>& alphabet) {
    Decomposition d{"identity", {}};
    std::set<int> sorted(alphabet.begin(), alphabet.end());
    int g = 0;
    for (int raw : sorted) d.groups[raw] = g++;
    return d;
}

Decomposition Decomposition::mnist_abc() {
    Decomposition d{"mnist_abc", {}};
    for (int r : {0, 1, 9}) d.groups[r] = 0;
    for (int r : {4, 6, 8}) d.groups[r] = 1;
    for (int r : {2, 3, 5, 7}) d.groups[r] = 2;
    return d;
}

Decomposition Decomposition::fashion_seasons() {
    // 0 top, 1 trouser, 2 pullover, 3 dress, 4 coat, 5 sandal, 6 shirt,
    // 7 sneaker, 8 bag, 9 ankle boot
    Decomposition d{"fashion_seasons", {}};
    for (int r : {0, 5, 3, 6}) d.groups[r] = 0;
    for (int r : {2, 4, 9}) d.groups[r] = 1;
    for (int r : {7, 1, 8}) d.groups[r] = 2;
    return d;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(Eigen::MatrixXf features, std::vector<std::optional<int>> raw_labels,
                 FeatureKind kind, ImageShape shape)
    : raw_labels_(std::move(raw_labels)), kind_(kind), shape_(shape) {
    if (features.cols() != static_cast<Index>(raw_labels_.size()))
        throw ConsistencyError("label count does not match sample count");
    if (features.cols() > 0 && features.rows() == 0)
        throw ConsistencyError("dataset dimension must be positive");
    if (kind == FeatureKind::Image) {
        if (!((features.array() >= 0.0f) && (features.array() <= 1.0f)).all())
            throw FormatError("image features must lie in [0,1]");
    }
    if (!features.allFinite()) throw NumericError("dataset contains non-finite features");
    superclass_.assign(raw_labels_.size(), std::nullopt);
    features_ = std::make_shared<const Eigen::MatrixXf>(std::move(features));
    set_labeled({});
}

Sample Dataset::sample(Index id) const {
    return Sample{id, features_->col(id), raw_labels_.at(id), superclass_.at(id)};
}

void Dataset::set_superclasses(std::vector<std::optional<int>> superclass, int n_classes) {
    if (superclass.size() != raw_labels_.size())
        throw ConsistencyError("superclass vector length does not match sample count");
    for (const auto& s : superclass)
        if (s && (*s < 0 || *s >= n_classes))
            throw ConsistencyError("superclass index out of range");
    superclass_ = std::move(superclass);
    n_classes_ = n_classes;
    for (Index id : labeled_)
        if (!superclass_[id]) throw ConsistencyError("labeled sample lost its superclass");
}

void Dataset::set_labeled(std::vector<Index> labeled) {
    std::sort(labeled.begin(), labeled.end());
    if (std::adjacent_find(labeled.begin(), labeled.end()) != labeled.end())
        throw ConsistencyError("duplicate labeled id");
    std::vector<bool> mask(static_cast<std::size_t>(size()), false);
    for (Index id : labeled) {
        if (id < 0 || id >= size()) throw ConsistencyError("labeled id out of range");
        if (!superclass_[id]) throw ConsistencyError("labeled sample without superclass");
        mask[id] = true;
    }
    std::vector<Index> unlabeled;
    unlabeled.reserve(static_cast<std::size_t>(size()) - labeled.size());
    for (Index id = 0; id < size(); ++id)
        if (!mask[id]) unlabeled.push_back(id);
    labeled_ = std::move(labeled);
    unlabeled_ = std::move(unlabeled);
    labeled_mask_ = std::move(mask);
}

void Dataset::assign_label(Index id, int superclass) {
    if (id < 0 || id >= size()) throw ConsistencyError("id out of range");
    if (labeled_mask_[id]) throw ConsistencyError("sample " + std::to_string(id) + " is already labeled");
    if (superclass < 0 || superclass >= n_classes_) throw ConsistencyError("class index out of range");
    superclass_[id] = superclass;
    labeled_mask_[id] = true;
    labeled_.insert(std::lower_bound(labeled_.begin(), labeled_.end(), id), id);
    unlabeled_.erase(std::lower_bound(unlabeled_.begin(), unlabeled_.end(), id));
}

void Dataset::hide_unlabeled_classes() {
    for (Index id : unlabeled_) superclass_[id].reset();
}

Eigen::MatrixXf Dataset::labeled_features() const {
    Eigen::MatrixXf out(dim(), static_cast<Index>(labeled_.size()));
    for (std::size_t j = 0; j < labeled_.size(); ++j) out.col(static_cast<Index>(j)) = features_->col(labeled_[j]);
    return out;
}

std::vector<int> Dataset::labeled_classes() const {
    std::vector<int> out;
    out.reserve(labeled_.size());
    for (Index id : labeled_) out.push_back(*superclass_[id]);
    return out;
}

Dataset Dataset::subset(const std::vector<Index>& ids) const {
    Eigen::MatrixXf f(dim(), static_cast<Index>(ids.size()));
    std::vector<std::optional<int>> raw, sup;
    for (std::size_t j = 0; j < ids.size(); ++j) {
        f.col(static_cast<Index>(j)) = features_->col(ids[j]);
        raw.push_back(raw_labels_.at(ids[j]));
        sup.push_back(superclass_.at(ids[j]));
    }
    Dataset out(std::move(f), std::move(raw), kind_, shape_);
    if (n_classes_ > 0) out.set_superclasses(std::move(sup), n_classes_);
    return out;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
    if (offset + 4 > buf.size()) throw IoError("truncated IDX header in " + path.string());
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

} // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
    const auto img = read_file(images_path);
    const auto lbl = read_file(labels_path);

    if (read_be32(img, 0, images_path) != kIdxImageMagic)
        throw FormatError("bad IDX image magic in " + images_path.string());
    if (read_be32(lbl, 0, labels_path) != kIdxLabelMagic)
        throw FormatError("bad IDX label magic in " + labels_path.string());

    const std::uint32_t n = read_be32(img, 4, images_path);
    const std::uint32_t rows = read_be32(img, 8, images_path);
    const std::uint32_t cols = read_be32(img, 12, images_path);
    const std::uint32_t n_labels = read_be32(lbl, 4, labels_path);
    if (n != n_labels)
        throw ConsistencyError("IDX image count " + std::to_string(n) + " != label count " +
                               std::to_string(n_labels));

    const std::size_t dim = std::size_t{rows} * cols;
    if (img.size() < 16 + std::size_t{n} * dim) throw IoError("truncated IDX image file " + images_path.string());
    if (lbl.size() < 8 + std::size_t{n}) throw IoError("truncated IDX label file " + labels_path.string());

    Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> bytes =
        Eigen::Map<const Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic>>(
            img.data() + 16, static_cast<Index>(dim), static_cast<Index>(n));
    Eigen::MatrixXf features = bytes.cast<float>() * (1.0f / 255.0f);

    std::vector<std::optional<int>> labels(n);
    for (std::uint32_t i = 0; i < n; ++i) labels[i] = static_cast<int>(lbl[8 + i]);

    return Dataset(std::move(features), std::move(labels), FeatureKind::Image,
                   ImageShape{static_cast<int>(rows), static_cast<int>(cols)});
}

// ---------------------------------------------------------------------------
// CSV

namespace {

bool parse_double(const std::string& cell, double& out) {
    const char* b = cell.data();
    const char* e = b + cell.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && e[-1] == ' ') --e;
    if (b < e && *b == '+') ++b;
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e && b != e;
}

} // namespace

Dataset load_csv(const std::filesystem::path& path, bool has_labels) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = csv::split_record(line);
        std::vector<double> values(cells.size());
        bool numeric = true;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (!parse_double(cells[i], values[i])) {
                numeric = false;
                if (rows.empty() && line_no == 1) break;
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": non-numeric cell '" + cells[i] + "'");
            }
        }
        if (!numeric) {
            width = cells.size();
            continue; // header
        }
        if (width == 0) width = values.size();
        if (values.size() != width)
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(width) + " columns, found " + std::to_string(values.size()));
        rows.push_back(std::move(values));
    }

    const std::size_t feat_cols = has_labels ? width - 1 : width;
    if (has_labels && width < 2) throw FormatError("labeled CSV needs at least two columns");

    Eigen::MatrixXf features(static_cast<Index>(feat_cols), static_cast<Index>(rows.size()));
    std::vector<std::optional<int>> labels(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (std::size_t i = 0; i < feat_cols; ++i)
            features(static_cast<Index>(i), static_cast<Index>(j)) = static_cast<float>(rows[j][i]);
        if (has_labels) {
            double l = rows[j].back();
            if (l != static_cast<double>(static_cast<int>(l)))
                throw ParseError(path.string() + ": label column must be integral");
            labels[j] = static_cast<int>(l);
        }
    }
    return Dataset(std::move(features), std::move(labels), FeatureKind::Vector);
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    bool with_labels = ds.size() > 0;
    for (const auto& l : ds.raw_labels()) with_labels = with_labels && l.has_value();

    std::vector<std::string> header;
    for (Index i = 0; i < ds.dim(); ++i) header.push_back("f" + std::to_string(i));
    if (with_labels) header.push_back("label");
    csv::Writer w(path, header);
    for (Index j = 0; j < ds.size(); ++j) {
        std::vector<std::string> row;
        row.reserve(header.size());
        for (Index i = 0; i < ds.dim(); ++i) row.push_back(csv::format_number(ds.features()(i, j)));
        if (with_labels) row.push_back(std::to_string(*ds.raw_label(j)));
        w.row(row);
    }
}

// ---------------------------------------------------------------------------
// Decomposition and split

Dataset apply_decomposition(const Dataset& ds, const Decomposition& d) {
    const int k = d.n_groups();
    std::vector<std::optional<int>> sup(static_cast<std::size_t>(ds.size()));
    for (Index id = 0; id < ds.size(); ++id) {
        const auto& raw = ds.raw_label(id);
        if (!raw) continue;
        auto it = d.groups.find(*raw);
        if (it == d.groups.end())
            throw DecompositionError("raw label " + std::to_string(*raw) + " is not mapped by '" +
                                     d.name + "'");
        sup[id] = it->second;
    }
    Dataset out = ds;
    out.set_superclasses(std::move(sup), k);
    return out;
}

Dataset split_labeled(const Dataset& ds, Index n_labeled, std::uint64_t seed) {
    const int k = ds.n_classes();
    if (n_labeled < 0 || n_labeled > ds.size())
        throw SplitError("n_labeled must lie in [0, n]");

    std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(std::max(k, 0)));
    for (Index id = 0; id < ds.size(); ++id)
        if (const auto& s = ds.superclass(id)) by_class[*s].push_back(id);
    Index available = 0;
    for (const auto& c : by_class) available += static_cast<Index>(c.size());
    if (n_labeled > available)
        throw SplitError("requested " + std::to_string(n_labeled) + " labels but only " +
                         std::to_string(available) + " samples carry a class");

    // Largest-remainder allocation proportional to class sizes.
    std::vector<Index> quota(by_class.size());
    std::vector<std::pair<double, int>> remainders;
    Index assigned = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        double exact = available > 0 ? static_cast<double>(n_labeled) * static_cast<double>(by_class[c].size()) /
                                           static_cast<double>(available)
                                     : 0.0;
        quota[c] = static_cast<Index>(exact);
        assigned += quota[c];
        remainders.emplace_back(exact - static_cast<double>(quota[c]), static_cast<int>(c));
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n_labeled; ++r, ++assigned) quota[remainders[r].second] += 1;

    std::mt19937_64 rng(seed);
    std::vector<Index> labeled;
    labeled.reserve(static_cast<std::size_t>(n_labeled));
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (quota[c] > static_cast<Index>(by_class[c].size()))
            throw SplitError("class " + std::to_string(c) + " has too few samples for its quota");
        auto ids = by_class[c];
        std::shuffle(ids.begin(), ids.end(), rng);
        labeled.insert(labeled.end(), ids.begin(), ids.begin() + quota[c]);
    }

    Dataset out = ds;
    out.set_labeled(std::move(labeled));
    return out;
}

} // namespace sae::data
