#include "sae/checkpoint.hpp"

#include "sae/csv.hpp"
#include "sae/error.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sae {

namespace {

constexpr const char* kMagic = "SAE1";

std::string join_numbers(const Eigen::Ref<const Eigen::VectorXd>& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += ' ';
        s += csv::format_number(v[i]);
    }
    return s;
}

std::vector<double> parse_numbers(const std::string& s, const std::string& what) {
    std::vector<double> out;
    const char* p = s.data();
    const char* end = s.data() + s.size();
    while (p < end) {
        while (p < end && *p == ' ') ++p;
        if (p == end) break;
        double v = 0.0;
        auto r = std::from_chars(p, end, v);
        if (r.ec != std::errc{}) throw FormatError("checkpoint: bad number in " + what);
        out.push_back(v);
        p = r.ptr;
    }
    return out;
}

long long parse_int(const std::string& s, const std::string& what) {
    long long v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw FormatError("checkpoint: bad integer in " + what);
    return v;
}

void put_f32(std::ostream& out, float f) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                          static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::pair<std::string, std::string> split_kv(const std::string& line) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint: expected key=value, got '" + line + "'");
    return {line.substr(0, eq), line.substr(eq + 1)};
}

} // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");

    const auto& spec = c.model.spec();
    out << kMagic << '\n';
    out << "layers=";
    for (std::size_t i = 0; i < spec.layer_dims.size(); ++i) out << (i ? "," : "") << spec.layer_dims[i];
    out << "\noutput=" << nn::to_string(spec.output) << '\n';
    out << "epoch=" << c.epoch << '\n';
    if (c.distance) {
        const auto& d = c.distance->matrix();
        out << "distance=" << d.rows() << ' '
            << join_numbers(Eigen::Map<const Eigen::VectorXd>(d.data(), d.size())) << '\n';
    }
    for (const auto& [k, v] : c.meta) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw PreconditionError("checkpoint metadata may not contain '=' in keys or line breaks");
        out << "meta." << k << '=' << v << '\n';
    }
    const auto params = c.model.flatten();
    out << "params=" << params.size() << '\n';
    for (float f : params) put_f32(out, f);

    if (c.svm) {
        const auto& s = *c.svm;
        out << "svm\n";
        out << "n_classes=" << s.n_classes << '\n';
        out << "lambda=" << csv::format_number(s.lambda) << '\n';
        out << "dim=" << s.dim() << '\n';
        for (int k = 0; k < s.n_classes; ++k) out << "center=" << join_numbers(s.centers.col(k)) << '\n';
        for (const auto& p : s.pairs)
            out << "pair=" << p.a << ' ' << p.b << ' ' << csv::format_number(p.bias) << ' ' << join_numbers(p.w)
                << '\n';
        out << "end\n";
    }
    if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMagic) throw FormatError("checkpoint: bad magic in " + path.string());

    Checkpoint c;
    nn::MlpSpec spec;
    bool have_layers = false;
    long long n_params = -1;
    while (std::getline(in, line)) {
        auto [k, v] = split_kv(line);
        if (k == "layers") {
            std::stringstream ss(v);
            std::string tok;
            while (std::getline(ss, tok, ',')) spec.layer_dims.push_back(static_cast<int>(parse_int(tok, "layers")));
            have_layers = true;
        } else if (k == "output") {
            spec.output = nn::activation_from_string(v);
        } else if (k == "epoch") {
            c.epoch = static_cast<int>(parse_int(v, "epoch"));
        } else if (k == "distance") {
            const auto nums = parse_numbers(v, "distance");
            if (nums.empty()) throw FormatError("checkpoint: empty distance entry");
            const auto n = static_cast<Eigen::Index>(nums[0]);
            if (static_cast<Eigen::Index>(nums.size()) != 1 + n * n) throw FormatError("checkpoint: distance size");
            Eigen::MatrixXd d = Eigen::Map<const Eigen::MatrixXd>(nums.data() + 1, n, n);
            c.distance = mds::DistanceSpec(d);
        } else if (k.rfind("meta.", 0) == 0) {
            c.meta[k.substr(5)] = v;
        } else if (k == "params") {
            n_params = parse_int(v, "params");
            break;
        } else {
            throw FormatError("checkpoint: unknown manifest key '" + k + "'");
        }
    }
    if (!have_layers || n_params < 0) throw FormatError("checkpoint: incomplete manifest");
    spec.validate();

    std::vector<unsigned char> blob(static_cast<std::size_t>(n_params) * 4);
    in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (in.gcount() != static_cast<std::streamsize>(blob.size())) throw IoError("checkpoint: truncated parameters");
    std::vector<float> params(static_cast<std::size_t>(n_params));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const unsigned char* b = blob.data() + 4 * i;
        const std::uint32_t u = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
                                std::uint32_t(b[3]) << 24;
        params[i] = std::bit_cast<float>(u);
    }
    c.model = nn::SaeModel(spec);
    if (params.size() != c.model.parameter_count())
        throw FormatError("checkpoint: parameter count does not match the architecture");
    c.model.unflatten(params);

    if (std::getline(in, line)) {
        if (line != "svm") throw FormatError("checkpoint: unexpected section '" + line + "'");
        svm::SvmModel s;
        long long dim = -1;
        std::vector<Eigen::VectorXd> centers;
        bool closed = false;
        while (std::getline(in, line)) {
            if (line == "end") {
                closed = true;
                break;
            }
            auto [k, v] = split_kv(line);
            if (k == "n_classes") {
                s.n_classes = static_cast<int>(parse_int(v, "n_classes"));
            } else if (k == "lambda") {
                const auto n = parse_numbers(v, "lambda");
                if (n.size() != 1) throw FormatError("checkpoint: bad lambda");
                s.lambda = n[0];
            } else if (k == "dim") {
                dim = parse_int(v, "dim");
            } else if (k == "center") {
                const auto n = parse_numbers(v, "center");
                centers.push_back(Eigen::Map<const Eigen::VectorXd>(n.data(), static_cast<Eigen::Index>(n.size())));
            } else if (k == "pair") {
                const auto n = parse_numbers(v, "pair");
                if (static_cast<long long>(n.size()) != 3 + dim) throw FormatError("checkpoint: pair size");
                svm::PairModel p;
                p.a = static_cast<int>(n[0]);
                p.b = static_cast<int>(n[1]);
                p.bias = n[2];
                p.w = Eigen::Map<const Eigen::VectorXd>(n.data() + 3, dim);
                s.pairs.push_back(std::move(p));
            } else {
                throw FormatError("checkpoint: unknown svm key '" + k + "'");
            }
        }
        if (!closed) throw IoError("checkpoint: truncated svm section");
        if (dim < 0 || static_cast<int>(centers.size()) != s.n_classes ||
            static_cast<int>(s.pairs.size()) != s.n_classes * (s.n_classes - 1) / 2)
            throw FormatError("checkpoint: inconsistent svm section");
        s.centers.resize(dim, s.n_classes);
        for (int k = 0; k < s.n_classes; ++k) {
            if (centers[k].size() != dim) throw FormatError("checkpoint: center size");
            s.centers.col(k) = centers[k];
        }
        c.svm = std::move(s);
    }
    return c;
}

} // namespace sae
