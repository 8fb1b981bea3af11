#include "sae/service.hpp"

#include "sae/checkpoint.hpp"
#include "sae/error.hpp"
#include "sae/evaluate.hpp"

#include <httplib.h>
#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

namespace sae::service {

using json = nlohmann::ordered_json;

namespace {

void put_be32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    put_be32(out, static_cast<std::uint32_t>(
                      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

Reply error_reply(int status, const std::string& code, const std::string& message) {
    json j{{"error", code}, {"message", message}};
    return {status, j.dump()};
}

Reply json_reply(const json& j, int status = 200) { return {status, j.dump()}; }

bool all_classes_labeled(const data::Dataset& ds) {
    std::vector<bool> seen(static_cast<std::size_t>(ds.n_classes()), false);
    for (data::Index id : ds.labeled_ids()) seen[*ds.superclass(id)] = true;
    return ds.n_classes() >= 2 && std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

} // namespace

std::string encode_png(const Eigen::Ref<const Eigen::VectorXf>& pixels, int rows, int cols) {
    if (rows <= 0 || cols <= 0 || pixels.size() != static_cast<Eigen::Index>(rows) * cols)
        throw ShapeError("pixel count does not match the image shape");
    std::string raw;
    raw.reserve(static_cast<std::size_t>(rows) * (cols + 1));
    for (int r = 0; r < rows; ++r) {
        raw.push_back(0); // filter: none
        for (int c = 0; c < cols; ++c) {
            const float p = std::clamp(pixels[static_cast<Eigen::Index>(r) * cols + c], 0.0f, 1.0f);
            raw.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(p * 255.0f))));
        }
    }
    uLongf len = compressBound(static_cast<uLong>(raw.size()));
    std::string z(len, '\0');
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &len, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), Z_BEST_COMPRESSION) != Z_OK)
        throw Error("zlib compression failed");
    z.resize(len);

    std::string png("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(cols));
    put_be32(ihdr, static_cast<std::uint32_t>(rows));
    ihdr += std::string("\x08\x00\x00\x00\x00", 5); // 8-bit grayscale, no interlace
    put_chunk(png, "IHDR", ihdr);
    put_chunk(png, "IDAT", z);
    put_chunk(png, "IEND", {});
    return png;
}

std::string to_string(Phase p) {
    switch (p) {
    case Phase::Idle: return "idle";
    case Phase::Training: return "training";
    case Phase::Ranking: return "ranking";
    }
    return "idle";
}

LabelService::LabelService(data::Dataset train, data::Dataset test, nn::SaeModel model, mds::DistanceSpec spec,
                           nn::TrainConfig train_cfg, svm::SvmOptions svm_opts)
    : test_(std::move(test)), svm_opts_(svm_opts), work_ds_(std::move(train)),
      trainer_(std::move(model), std::move(spec), std::move(train_cfg)) {
    committed_.assign(static_cast<std::size_t>(work_ds_.size()), -1);
    for (data::Index id = 0; id < work_ds_.size(); ++id)
        if (work_ds_.is_labeled(id)) committed_[id] = *work_ds_.superclass(id);
    publish(trainer_.model(), work_ds_, 0, {}, {});
    worker_ = std::thread([this] { worker_loop(); });
}

LabelService::~LabelService() {
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

std::shared_ptr<const Snapshot> LabelService::snapshot() const {
    std::lock_guard lock(mu_);
    return snap_;
}

void LabelService::publish(const nn::SaeModel& model, const data::Dataset& ds, int epoch,
                           const std::vector<nn::EpochMetrics>& history, const std::vector<double>& test_errors,
                           std::shared_ptr<const svm::SvmModel> fitted) {
    auto s = std::make_shared<Snapshot>();
    s->model = std::make_shared<const nn::SaeModel>(model);
    s->dataset = std::make_shared<const data::Dataset>(ds);
    if (fitted) s->svm = std::move(fitted);
    else if (all_classes_labeled(ds)) s->svm = std::make_shared<const svm::SvmModel>(fit_latent_svm(model, ds, svm_opts_));
    s->history = history;
    s->test_errors = test_errors;
    s->epoch = epoch;
    std::lock_guard lock(mu_);
    s->version = snap_ ? snap_->version + 1 : 0;
    snap_ = std::move(s);
}

std::size_t LabelService::apply_pending(data::Dataset& ds) {
    std::size_t n = 0;
    for (auto [id, c] : pending_) {
        ds.assign_label(id, c);
        committed_[id] = c;
        ++n;
    }
    pending_.clear();
    return n;
}

void LabelService::worker_loop() {
    std::unique_lock lock(mu_);
    while (true) {
        cv_.wait(lock, [&] { return stop_ || requested_epochs_ > 0 || !pending_.empty(); });
        if (stop_) return;

        if (!pending_.empty()) {
            // The dataset copy and the snapshot swap both happen before any
            // new label can be checked against them.
            apply_pending(work_ds_);
            auto s = std::make_shared<Snapshot>(*snap_);
            s->dataset = std::make_shared<const data::Dataset>(work_ds_);
            s->svm = all_classes_labeled(work_ds_)
                         ? std::make_shared<const svm::SvmModel>(fit_latent_svm(trainer_.model(), work_ds_, svm_opts_))
                         : nullptr;
            s->version = snap_->version + 1;
            snap_ = std::move(s);
        }

        const int epochs = requested_epochs_;
        if (epochs > 0) {
            lock.unlock();
            for (int e = 0; e < epochs; ++e) {
                try {
                    trainer_.run_epoch(work_ds_);
                } catch (const Error& err) {
                    std::cerr << "training stopped: " << err.what() << '\n';
                    break;
                }
                current_epoch_ = trainer_.epoch();
                double test_error = std::nan("");
                {
                    lock.lock();
                    apply_pending(work_ds_);
                    lock.unlock();
                }
                std::shared_ptr<const svm::SvmModel> fitted;
                if (all_classes_labeled(work_ds_)) {
                    fitted = std::make_shared<const svm::SvmModel>(
                        fit_latent_svm(trainer_.model(), work_ds_, svm_opts_));
                    if (test_.size() > 0) test_error = classification_error(trainer_.model(), *fitted, test_);
                }
                test_errors_.push_back(test_error);
                publish(trainer_.model(), work_ds_, trainer_.epoch(), trainer_.history(), test_errors_, fitted);
            }
            lock.lock();
            requested_epochs_ = 0;
            phase_ = Phase::Idle;
        }
        idle_cv_.notify_all();
    }
}

void LabelService::wait_idle() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return stop_ || (requested_epochs_ == 0 && pending_.empty()); });
}

Reply LabelService::status() const {
    std::lock_guard lock(mu_);
    const auto& ds = *snap_->dataset;
    json j{{"status", to_string(phase_.load())},
           {"epoch", phase_.load() == Phase::Training ? current_epoch_.load() : snap_->epoch},
           {"model_epoch", snap_->epoch},
           {"version", snap_->version},
           {"n_samples", ds.size()},
           {"n_classes", ds.n_classes()},
           {"labeled", ds.labeled_ids().size()},
           {"unlabeled", ds.unlabeled_ids().size()},
           {"pending", pending_.size()},
           {"has_classifier", static_cast<bool>(snap_->svm)},
           {"kind", ds.kind() == data::FeatureKind::Image ? "image" : "vector"}};
    return json_reply(j);
}

Reply LabelService::queue(std::size_t k) {
    const auto snap = snapshot();
    if (!snap->svm) return error_reply(409, "no_classifier", "every class needs a labeled sample first");
    if (snap->dataset->unlabeled_ids().empty()) return json_reply(json::array());

    std::lock_guard rlock(rank_mu_);
    if (rank_cache_.version != snap->version) {
        Phase expected = Phase::Idle;
        const bool marked = phase_.compare_exchange_strong(expected, Phase::Ranking);
        rank_cache_.ranking = active::rank_unlabeled(*snap->svm, *snap->model, *snap->dataset, snap->epoch);
        rank_cache_.version = snap->version;
        if (marked) {
            expected = Phase::Ranking;
            phase_.compare_exchange_strong(expected, Phase::Idle);
        }
    }
    // Ids labeled or queued since the snapshot was taken are left out.
    std::set<data::Index> pending;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, c] : pending_) pending.insert(id);
        for (const auto& e : rank_cache_.ranking.entries)
            if (committed_[e.id] >= 0) pending.insert(e.id);
    }
    const bool image = snap->dataset->kind() == data::FeatureKind::Image;
    json out = json::array();
    for (const auto& e : rank_cache_.ranking.entries) {
        if (out.size() >= k) break;
        if (pending.count(e.id)) continue;
        const std::string base = "/api/sample/" + std::to_string(e.id);
        out.push_back({{"id", e.id},
                       {"margin", e.margin},
                       {"scores", e.scores},
                       {"payload", base + (image ? "/image" : "/vector")}});
    }
    return json_reply(out);
}

Reply LabelService::sample_image(data::Index id) const {
    const auto snap = snapshot();
    const auto& ds = *snap->dataset;
    if (id < 0 || id >= ds.size()) return error_reply(404, "not_found", "no sample " + std::to_string(id));
    if (ds.kind() != data::FeatureKind::Image)
        return error_reply(400, "not_an_image", "dataset holds vectors; use /vector");
    const auto shape = ds.image_shape();
    return {200, encode_png(ds.feature(id), shape.rows, shape.cols), "image/png"};
}

Reply LabelService::sample_vector(data::Index id) const {
    const auto snap = snapshot();
    const auto& ds = *snap->dataset;
    if (id < 0 || id >= ds.size()) return error_reply(404, "not_found", "no sample " + std::to_string(id));
    const auto f = ds.feature(id);
    std::vector<float> values(f.data(), f.data() + f.size());
    json j{{"id", id}, {"labeled", ds.is_labeled(id)}, {"values", values}};
    j["class"] = ds.is_labeled(id) ? json(*ds.superclass(id)) : json(nullptr);
    return json_reply(j);
}

Reply LabelService::submit_label(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        return error_reply(400, "bad_request", "body is not JSON");
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("class") || !j["id"].is_number_integer() ||
        !j["class"].is_number_integer())
        return error_reply(400, "bad_request", "expected {\"id\": integer, \"class\": integer}");
    const auto id = j["id"].get<long long>();
    const int cls = j["class"].get<int>();

    std::lock_guard lock(mu_);
    const auto& ds = *snap_->dataset;
    if (id < 0 || id >= ds.size()) return error_reply(404, "not_found", "no sample " + std::to_string(id));
    if (cls < 0 || cls >= ds.n_classes())
        return error_reply(400, "invalid_class", "class must lie in [0," + std::to_string(ds.n_classes()) + ")");
    // A retry of an applied label is answered like a queued duplicate.
    if (committed_[id] >= 0) {
        if (committed_[id] != cls)
            return error_reply(409, "conflict", "sample " + std::to_string(id) + " is already labeled");
        return json_reply({{"id", id}, {"class", cls}, {"state", "applied"}, {"duplicate", true}});
    }
    if (auto it = pending_.find(id); it != pending_.end()) {
        if (it->second != cls)
            return error_reply(409, "conflict", "sample " + std::to_string(id) + " is queued with another class");
        return json_reply({{"id", id}, {"class", cls}, {"state", "queued"}, {"duplicate", true}});
    }
    pending_[id] = cls;
    cv_.notify_all();
    return json_reply({{"id", id}, {"class", cls}, {"state", "queued"}, {"duplicate", false}}, 202);
}

Reply LabelService::start_training(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        return error_reply(400, "bad_request", "body is not JSON");
    }
    if (!j.is_object() || !j.contains("epochs") || !j["epochs"].is_number_integer() || j["epochs"].get<int>() < 1)
        return error_reply(400, "bad_request", "expected {\"epochs\": positive integer}");
    const int epochs = j["epochs"].get<int>();
    std::lock_guard lock(mu_);
    if (phase_.load() == Phase::Training || requested_epochs_ > 0)
        return error_reply(409, "busy", "a training task is already running");
    requested_epochs_ = epochs;
    phase_ = Phase::Training;
    current_epoch_ = snap_->epoch;
    cv_.notify_all();
    return json_reply({{"accepted", true}, {"epochs", epochs}}, 202);
}

Reply LabelService::latent(std::size_t n) const {
    const auto snap = snapshot();
    const auto& ds = *snap->dataset;
    const auto total = static_cast<std::size_t>(ds.size());
    n = std::min(n, total);
    std::vector<data::Index> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(static_cast<data::Index>(i * total / n));
    const Eigen::MatrixXf z = nn::encode_ids(*snap->model, ds, ids);
    json out = json::array();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        json p{{"id", ids[i]},
               {"x", z(0, col)},
               {"y", z.rows() > 1 ? z(1, col) : 0.0f},
               {"labeled", ds.is_labeled(ids[i])}};
        p["class"] = ds.is_labeled(ids[i]) ? json(*ds.superclass(ids[i])) : json(nullptr);
        if (snap->svm) p["predicted"] = svm::predict(*snap->svm, z.col(col).cast<double>());
        out.push_back(p);
    }
    return json_reply(out);
}

Reply LabelService::metrics() const {
    const auto snap = snapshot();
    json out = json::array();
    for (std::size_t i = 0; i < snap->history.size(); ++i) {
        const auto& m = snap->history[i];
        json row{{"epoch", m.epoch},
                 {"recon_rmse", m.recon_rmse},
                 {"structural", m.structural_loss},
                 {"combined", m.combined_loss}};
        const double e = i < snap->test_errors.size() ? snap->test_errors[i] : std::nan("");
        row["test_error"] = std::isfinite(e) ? json(e) : json(nullptr);
        out.push_back(row);
    }
    return json_reply(out);
}

void LabelService::bind(httplib::Server& server) {
    auto send = [](httplib::Response& res, const Reply& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    auto count_param = [](const httplib::Request& req, const char* name,
                          std::size_t fallback) -> std::optional<std::size_t> {
        if (!req.has_param(name)) return fallback;
        const std::string v = req.get_param_value(name);
        std::size_t pos = 0;
        try {
            const long long n = std::stoll(v, &pos);
            if (pos != v.size() || n < 0) return std::nullopt;
            return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };
    server.Get("/api/status", [=, this](const httplib::Request&, httplib::Response& res) { send(res, status()); });
    server.Get("/api/queue", [=, this](const httplib::Request& req, httplib::Response& res) {
        const auto k = count_param(req, "k", 100);
        send(res, k ? queue(*k) : error_reply(400, "bad_request", "k must be a non-negative integer"));
    });
    server.Get(R"(/api/sample/(\d+)/image)", [=, this](const httplib::Request& req, httplib::Response& res) {
        send(res, sample_image(std::stoll(req.matches[1].str())));
    });
    server.Get(R"(/api/sample/(\d+)/vector)", [=, this](const httplib::Request& req, httplib::Response& res) {
        send(res, sample_vector(std::stoll(req.matches[1].str())));
    });
    server.Post("/api/labels",
                [=, this](const httplib::Request& req, httplib::Response& res) { send(res, submit_label(req.body)); });
    server.Post("/api/train",
                [=, this](const httplib::Request& req, httplib::Response& res) { send(res, start_training(req.body)); });
    server.Get("/api/latent", [=, this](const httplib::Request& req, httplib::Response& res) {
        const auto n = count_param(req, "n", 1000);
        send(res, n ? latent(*n) : error_reply(400, "bad_request", "n must be a non-negative integer"));
    });
    server.Get("/api/metrics", [=, this](const httplib::Request&, httplib::Response& res) { send(res, metrics()); });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(json{{"error", "internal"}, {"message", what}}.dump(), "application/json");
    });
}

void serve(const config::RunConfig& cfg, const std::string& host, int port, const std::filesystem::path& checkpoint,
           const std::filesystem::path& static_dir) {
    cfg.validate();
    auto loaded = config::load_data(cfg);
    loaded.train.hide_unlabeled_classes();
    nn::SaeModel model = checkpoint.empty() ? nn::init_model<float>(cfg.network, cfg.train.seed)
                                            : load_checkpoint(checkpoint).model;
    const auto spec = cfg.make_distance_spec(loaded.train.n_classes());
    LabelService svc(std::move(loaded.train), std::move(loaded.test), std::move(model), spec, cfg.train, cfg.svm);

    httplib::Server server;
    svc.bind(server);
    if (!static_dir.empty() && !server.set_mount_point("/", static_dir.string()))
        throw IoError("static directory " + static_dir.string() + " does not exist");
    if (!server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    std::cerr << "serving on http://" << host << ":" << port << '\n';
    server.listen_after_bind();
}

} // namespace sae::service
