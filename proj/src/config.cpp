#include "sae/config.hpp"

#include "sae/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace sae::config {

using json = nlohmann::ordered_json;

namespace {

std::string decomposition_name_ok(const std::string& n) {
    static const std::set<std::string> known{"mnist_abc", "fashion_seasons", "identity", "custom"};
    return known.count(n) ? std::string{} : "unknown decomposition '" + n + "'";
}

/// Walks a JSON object, remembering which keys were consumed so that
/// leftovers can be reported with their full path.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(child(key) + ": expected " + type_name<T>() + ", got " + it->dump());
        }
    }

    void get_path(const char* key, std::filesystem::path& out) {
        std::string s = out.string();
        get(key, s);
        out = s;
    }

    std::optional<Reader> object(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return std::nullopt;
        return Reader(*it, child(key));
    }

    const json* raw(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(child(it.key().c_str()) + ": unknown field");
    }

    std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where() const { return path_.empty() ? "<root>" : path_; }

private:
    template <typename T>
    static std::string type_name() {
        if constexpr (std::is_same_v<T, bool>) return "a boolean";
        else if constexpr (std::is_integral_v<T>) return "an integer";
        else if constexpr (std::is_floating_point_v<T>) return "a number";
        else if constexpr (std::is_same_v<T, std::string>) return "a string";
        else return "a value of another type";
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of rows");
    const std::size_t n = j.size();
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!j[i].is_array() || j[i].size() != n) throw ConfigError(path + "[" + std::to_string(i) + "]: row length");
        for (std::size_t k = 0; k < n; ++k) {
            if (!j[i][k].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected numbers");
            m(i, k) = j[i][k].get<double>();
        }
    }
    return m;
}

} // namespace

std::vector<std::string> RunConfig::problems(bool check_files) const {
    std::vector<std::string> p;
    auto need_file = [&](const std::string& field, const std::filesystem::path& f) {
        if (f.empty()) p.push_back(field + ": required");
        else if (check_files && !std::filesystem::exists(f)) p.push_back(field + ": file not found: " + f.string());
    };
    if (data.format == "idx") {
        need_file("data.train_images", data.train_images);
        need_file("data.train_labels", data.train_labels);
        if (!data.test_images.empty() || !data.test_labels.empty()) {
            need_file("data.test_images", data.test_images);
            need_file("data.test_labels", data.test_labels);
        }
    } else if (data.format == "csv") {
        need_file("data.train_csv", data.train_csv);
        if (!data.test_csv.empty()) need_file("data.test_csv", data.test_csv);
    } else {
        p.push_back("data.format: must be \"idx\" or \"csv\"");
    }
    if (auto e = decomposition_name_ok(decomposition); !e.empty()) p.push_back("decomposition: " + e);
    if (decomposition == "custom" && custom_groups.empty()) p.push_back("groups: required for a custom decomposition");
    if (!(inter_class_distance > 0.0)) p.push_back("distance.inter: must be positive");
    if (distance_matrix) {
        try {
            mds::DistanceSpec check(*distance_matrix);
        } catch (const Error& e) {
            p.push_back(std::string("distance.matrix: ") + e.what());
        }
    }
    try {
        network.validate();
    } catch (const Error& e) {
        p.push_back(std::string("network: ") + e.what());
    }
    if (!(train.gamma >= 0.0 && train.gamma <= 1.0)) p.push_back("train.gamma: must lie in [0,1]");
    if (!(train.learning_rate > 0.0)) p.push_back("train.learning_rate: must be positive");
    if (train.batch_size < 1) p.push_back("train.batch_size: must be positive");
    if (train.epochs < 0) p.push_back("train.epochs: must be non-negative");
    if (train.mds.max_iter < 1) p.push_back("train.mds.max_iter: must be positive");
    if (!(train.mds.tol > 0.0)) p.push_back("train.mds.tol: must be positive");
    if (!(svm.lambda > 0.0)) p.push_back("svm.lambda: must be positive");
    if (svm.epochs < 1) p.push_back("svm.epochs: must be positive");
    if (active.rounds < 0) p.push_back("active.rounds: must be non-negative");
    if (active.round_epochs < 0) p.push_back("active.round_epochs: must be non-negative");
    if (check_files && !active.oracle.empty() && !std::filesystem::exists(active.oracle))
        p.push_back("active.oracle: file not found: " + active.oracle.string());
    if (output_dir.empty()) p.push_back("output_dir: required");
    return p;
}

void RunConfig::validate(bool check_files) const {
    const auto p = problems(check_files);
    if (p.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& s : p) msg += "\n  " + s;
    throw ConfigError(msg);
}

data::Decomposition RunConfig::make_decomposition(const std::vector<int>& raw_labels) const {
    if (decomposition == "mnist_abc") return data::Decomposition::mnist_abc();
    if (decomposition == "fashion_seasons") return data::Decomposition::fashion_seasons();
    if (decomposition == "custom") return data::Decomposition{"custom", custom_groups};
    if (decomposition == "identity") {
        if (raw_labels.empty()) return data::Decomposition::identity({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
        return data::Decomposition::identity(raw_labels);
    }
    throw ConfigError("decomposition: unknown '" + decomposition + "'");
}

mds::DistanceSpec RunConfig::make_distance_spec(int n_classes) const {
    if (distance_matrix) {
        if (distance_matrix->rows() != n_classes)
            throw ConfigError("distance.matrix: size " + std::to_string(distance_matrix->rows()) +
                              " does not match " + std::to_string(n_classes) + " classes");
        return mds::DistanceSpec(*distance_matrix);
    }
    return mds::DistanceSpec::uniform(n_classes, inter_class_distance);
}

bool RunConfig::operator==(const RunConfig& o) const {
    const bool same_matrix = distance_matrix.has_value() == o.distance_matrix.has_value() &&
                             (!distance_matrix || *distance_matrix == *o.distance_matrix);
    return data == o.data && decomposition == o.decomposition && custom_groups == o.custom_groups &&
           inter_class_distance == o.inter_class_distance && same_matrix && network == o.network &&
           train == o.train && svm.lambda == o.svm.lambda && svm.epochs == o.svm.epochs && svm.seed == o.svm.seed &&
           active == o.active && output_dir == o.output_dir;
}

std::string to_json(const RunConfig& c) {
    json j;
    j["data"] = {{"format", c.data.format},
                 {"train_images", c.data.train_images.string()},
                 {"train_labels", c.data.train_labels.string()},
                 {"test_images", c.data.test_images.string()},
                 {"test_labels", c.data.test_labels.string()},
                 {"train_csv", c.data.train_csv.string()},
                 {"test_csv", c.data.test_csv.string()},
                 {"csv_has_labels", c.data.csv_has_labels},
                 {"max_train", c.data.max_train},
                 {"max_test", c.data.max_test}};
    j["decomposition"] = c.decomposition;
    if (!c.custom_groups.empty()) {
        json g = json::object();
        for (auto [raw, sup] : c.custom_groups) g[std::to_string(raw)] = sup;
        j["groups"] = g;
    }
    j["distance"] = {{"inter", c.inter_class_distance}};
    if (c.distance_matrix) j["distance"]["matrix"] = matrix_to_json(*c.distance_matrix);
    j["network"] = {{"layers", c.network.layer_dims}, {"output", nn::to_string(c.network.output)}};
    const auto& t = c.train;
    j["train"] = {{"gamma", t.gamma},
                  {"learning_rate", t.learning_rate},
                  {"batch_size", t.batch_size},
                  {"epochs", t.epochs},
                  {"seed", t.seed},
                  {"optimizer", nn::to_string(t.optimizer)},
                  {"momentum", t.momentum},
                  {"adam_beta1", t.adam_beta1},
                  {"adam_beta2", t.adam_beta2},
                  {"adam_epsilon", t.adam_epsilon},
                  {"mds", {{"max_iter", t.mds.max_iter}, {"tol", t.mds.tol}, {"seed", t.mds.seed}}}};
    j["svm"] = {{"lambda", c.svm.lambda}, {"epochs", c.svm.epochs}, {"seed", c.svm.seed}};
    const auto& a = c.active;
    j["active"] = {{"initial_labels", a.initial_labels}, {"split_seed", a.split_seed},
                   {"k", a.k},
                   {"rounds", a.rounds},
                   {"round_epochs", a.round_epochs},
                   {"cold_restart", a.cold_restart},
                   {"oracle", a.oracle.string()}};
    j["output_dir"] = c.output_dir.string();
    return j.dump(2) + "\n";
}

RunConfig from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    Reader root(j, "");
    if (auto d = root.object("data")) {
        d->get("format", c.data.format);
        d->get_path("train_images", c.data.train_images);
        d->get_path("train_labels", c.data.train_labels);
        d->get_path("test_images", c.data.test_images);
        d->get_path("test_labels", c.data.test_labels);
        d->get_path("train_csv", c.data.train_csv);
        d->get_path("test_csv", c.data.test_csv);
        d->get("csv_has_labels", c.data.csv_has_labels);
        d->get("max_train", c.data.max_train);
        d->get("max_test", c.data.max_test);
        d->finish();
    }
    root.get("decomposition", c.decomposition);
    if (const json* g = root.raw("groups")) {
        if (!g->is_object()) throw ConfigError("groups: expected an object mapping raw label to class");
        for (auto it = g->begin(); it != g->end(); ++it) {
            int raw = 0;
            try {
                raw = std::stoi(it.key());
            } catch (const std::exception&) {
                throw ConfigError("groups." + it.key() + ": key must be an integer raw label");
            }
            if (!it->is_number_integer()) throw ConfigError("groups." + it.key() + ": expected an integer class");
            c.custom_groups[raw] = it->get<int>();
        }
    }
    if (auto d = root.object("distance")) {
        d->get("inter", c.inter_class_distance);
        if (const json* m = d->raw("matrix")) c.distance_matrix = matrix_from_json(*m, "distance.matrix");
        d->finish();
    }
    if (auto n = root.object("network")) {
        n->get("layers", c.network.layer_dims);
        std::string out = nn::to_string(c.network.output);
        n->get("output", out);
        try {
            c.network.output = nn::activation_from_string(out);
        } catch (const Error&) {
            throw ConfigError("network.output: unknown activation '" + out + "'");
        }
        n->finish();
    }
    if (auto t = root.object("train")) {
        auto& tc = c.train;
        t->get("gamma", tc.gamma);
        t->get("learning_rate", tc.learning_rate);
        t->get("batch_size", tc.batch_size);
        t->get("epochs", tc.epochs);
        t->get("seed", tc.seed);
        std::string opt = nn::to_string(tc.optimizer);
        t->get("optimizer", opt);
        try {
            tc.optimizer = nn::optimizer_from_string(opt);
        } catch (const Error&) {
            throw ConfigError("train.optimizer: unknown optimizer '" + opt + "'");
        }
        t->get("momentum", tc.momentum);
        t->get("adam_beta1", tc.adam_beta1);
        t->get("adam_beta2", tc.adam_beta2);
        t->get("adam_epsilon", tc.adam_epsilon);
        if (auto m = t->object("mds")) {
            m->get("max_iter", tc.mds.max_iter);
            m->get("tol", tc.mds.tol);
            m->get("seed", tc.mds.seed);
            m->finish();
        }
        t->finish();
    }
    if (auto s = root.object("svm")) {
        s->get("lambda", c.svm.lambda);
        s->get("epochs", c.svm.epochs);
        s->get("seed", c.svm.seed);
        s->finish();
    }
    if (auto a = root.object("active")) {
        a->get("initial_labels", c.active.initial_labels);
        a->get("split_seed", c.active.split_seed);
        a->get("k", c.active.k);
        a->get("rounds", c.active.rounds);
        a->get("round_epochs", c.active.round_epochs);
        a->get("cold_restart", c.active.cold_restart);
        a->get_path("oracle", c.active.oracle);
        a->finish();
    }
    root.get_path("output_dir", c.output_dir);
    root.finish();
    return c;
}

RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void save(const RunConfig& c, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_json(c);
}

RunConfig with_overrides(const RunConfig& c, const std::vector<std::string>& overrides) {
    json j = json::parse(to_json(c));
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
        const std::string key = o.substr(0, eq);
        const std::string value = o.substr(eq + 1);
        json v;
        try {
            v = json::parse(value);
        } catch (const json::parse_error&) {
            v = value;
        }
        json* node = &j;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (dot == std::string::npos) {
                (*node)[part] = v;
                break;
            }
            node = &(*node)[part];
            start = dot + 1;
        }
    }
    return from_json(j.dump());
}

LoadedData load_data(const RunConfig& c) {
    c.validate();
    auto cap = [](data::Dataset ds, std::size_t n) {
        if (n == 0 || n >= static_cast<std::size_t>(ds.size())) return ds;
        std::vector<data::Index> ids(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<data::Index>(i);
        return ds.subset(ids);
    };
    LoadedData out;
    if (c.data.format == "idx") {
        out.train = data::load_idx(c.data.train_images, c.data.train_labels);
        if (!c.data.test_images.empty()) out.test = data::load_idx(c.data.test_images, c.data.test_labels);
    } else {
        out.train = data::load_csv(c.data.train_csv, c.data.csv_has_labels);
        if (!c.data.test_csv.empty()) out.test = data::load_csv(c.data.test_csv, c.data.csv_has_labels);
    }
    out.train = cap(std::move(out.train), c.data.max_train);
    std::vector<int> raw;
    for (data::Index j = 0; j < out.train.size(); ++j)
        if (const auto l = out.train.raw_label(j)) raw.push_back(*l);
    const auto decomp = c.make_decomposition(raw);
    out.train = data::apply_decomposition(std::move(out.train), decomp);
    if (out.test.size() > 0) out.test = data::apply_decomposition(cap(std::move(out.test), c.data.max_test), decomp);
    out.train = data::split_labeled(out.train, static_cast<data::Index>(c.active.initial_labels), c.active.split_seed);
    return out;
}

} // namespace sae::config
