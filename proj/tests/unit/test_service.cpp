#include "sae/service.hpp"

#include "toy.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>
#include <zlib.h>

#include <chrono>
#include <set>
#include <thread>

using namespace sae;
using json = nlohmann::json;

namespace {

std::uint32_t be32(const std::string& s, std::size_t at) {
    const auto* p = reinterpret_cast<const unsigned char*>(s.data() + at);
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

struct DecodedPng {
    int width = 0, height = 0;
    std::vector<unsigned char> pixels;
};

// Minimal reader for the subset encode_png produces: checks every chunk CRC
// and undoes filter type 0.
DecodedPng decode_png(const std::string& png) {
    DecodedPng out;
    REQUIRE(png.size() > 8);
    REQUIRE(png.compare(0, 8, "\x89PNG\r\n\x1a\n") == 0);
    std::string idat;
    std::size_t at = 8;
    bool ended = false;
    while (at + 12 <= png.size()) {
        const std::uint32_t len = be32(png, at);
        const std::string type = png.substr(at + 4, 4);
        const std::string body = png.substr(at + 8, len);
        const auto crc = crc32(crc32(0, nullptr, 0), reinterpret_cast<const Bytef*>(png.data() + at + 4), len + 4);
        CHECK(crc == be32(png, at + 8 + len));
        if (type == "IHDR") {
            out.width = static_cast<int>(be32(body, 0));
            out.height = static_cast<int>(be32(body, 4));
            CHECK(body[8] == 8); // bit depth
            CHECK(body[9] == 0); // grayscale
        } else if (type == "IDAT") {
            idat += body;
        } else if (type == "IEND") {
            ended = true;
        }
        at += 12 + len;
    }
    CHECK(ended);
    std::vector<unsigned char> raw(static_cast<std::size_t>(out.height) * (out.width + 1));
    uLongf n = raw.size();
    REQUIRE(uncompress(raw.data(), &n, reinterpret_cast<const Bytef*>(idat.data()), idat.size()) == Z_OK);
    REQUIRE(n == raw.size());
    for (int r = 0; r < out.height; ++r) {
        CHECK(raw[r * (out.width + 1)] == 0);
        for (int c = 0; c < out.width; ++c) out.pixels.push_back(raw[r * (out.width + 1) + 1 + c]);
    }
    return out;
}

// 3 classes of 4x5 images; pixel values in [0,1].
data::Dataset image_set(data::Index n, std::uint64_t seed) {
    const auto blobs = toy::blobs(n, 20, 3, 0.6, 0.1, seed);
    Eigen::MatrixXf x = blobs.features().array().max(0.0f).min(1.0f).matrix();
    std::vector<std::optional<int>> raw, sup;
    for (data::Index j = 0; j < n; ++j) {
        raw.push_back(blobs.raw_label(j));
        sup.push_back(blobs.superclass(j));
    }
    data::Dataset ds(std::move(x), raw, data::FeatureKind::Image, {4, 5});
    ds.set_superclasses(sup, 3);
    return ds;
}

struct Running {
    std::unique_ptr<service::LabelService> svc;
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit Running(std::size_t initial_labels) {
        auto train = data::split_labeled(image_set(90, 1), initial_labels, 2);
        train.hide_unlabeled_classes();
        nn::TrainConfig cfg;
        cfg.batch_size = 16;
        cfg.learning_rate = 0.01;
        svc = std::make_unique<service::LabelService>(
            std::move(train), image_set(30, 2), nn::init_model<float>({{20, 6, 2}, nn::Activation::Sigmoid}, 1),
            mds::DistanceSpec::uniform(3, 2.0), cfg, svm::SvmOptions{0.01, 10, 0});
        svc->bind(server);
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~Running() {
        server.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

json body_of(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

} // namespace

TEST_CASE("encode_png round trips through an independent decoder") {
    Eigen::VectorXf px(12);
    for (int i = 0; i < 12; ++i) px(i) = static_cast<float>(i) / 11.0f;
    const auto d = decode_png(service::encode_png(px, 3, 4));
    CHECK(d.width == 4);
    CHECK(d.height == 3);
    REQUIRE(d.pixels.size() == 12);
    for (int i = 0; i < 12; ++i) CHECK(d.pixels[i] == static_cast<unsigned char>(std::lround(px(i) * 255.0f)));
}

TEST_CASE("status, samples and metrics over HTTP") {
    Running r(15);
    auto c = r.client();
    const auto status = body_of(c.Get("/api/status"));
    CHECK(status["status"] == "idle");
    CHECK(status["n_samples"] == 90);
    CHECK(status["n_classes"] == 3);
    CHECK(status["labeled"] == 15);
    CHECK(status["kind"] == "image");

    const auto img = c.Get("/api/sample/4/image");
    REQUIRE(img);
    CHECK(img->status == 200);
    CHECK(img->get_header_value("Content-Type") == "image/png");
    const auto d = decode_png(img->body);
    CHECK(d.width == 5);
    CHECK(d.height == 4);

    const auto vec = body_of(c.Get("/api/sample/4/vector"));
    CHECK(vec["values"].size() == 20);
    CHECK(c.Get("/api/sample/9999/image")->status == 404);

    CHECK(body_of(c.Get("/api/metrics")).is_array());
    const auto lat = body_of(c.Get("/api/latent?n=10"));
    CHECK(lat.size() == 10);
    CHECK(c.Get("/api/latent?n=abc")->status == 400);
}

TEST_CASE("label submission rules") {
    Running r(15);
    auto c = r.client();
    const auto snap = r.svc->snapshot();
    const auto labeled = snap->dataset->labeled_ids().front();
    const auto free_id = snap->dataset->unlabeled_ids().front();
    auto post = [&](const std::string& body) { return c.Post("/api/labels", body, "application/json"); };

    auto res = post(json{{"id", free_id}, {"class", 1}}.dump());
    CHECK(res->status == 202);
    res = post(json{{"id", free_id}, {"class", 1}}.dump());
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["duplicate"] == true);
    res = post(json{{"id", free_id}, {"class", 2}}.dump());
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["error"] == "conflict");
    const int labeled_class = *snap->dataset->superclass(labeled);
    res = post(json{{"id", labeled}, {"class", (labeled_class + 1) % 3}}.dump());
    CHECK(res->status == 409);
    CHECK(post(json{{"id", labeled}, {"class", labeled_class}}.dump())->status == 200);
    CHECK(post(json{{"id", free_id}, {"class", 3}}.dump())->status == 400);
    CHECK(json::parse(post(json{{"id", free_id}, {"class", 3}}.dump())->body)["error"] == "invalid_class");
    CHECK(post(json{{"id", 5000}, {"class", 0}}.dump())->status == 404);
    CHECK(post("not json")->status == 400);
    CHECK(post(R"({"id": 1})")->status == 400);

    r.svc->wait_idle();
    const auto after = r.svc->snapshot();
    CHECK(after->dataset->is_labeled(free_id));
    CHECK(*after->dataset->superclass(free_id) == 1);
    // once applied the label is final
    CHECK(post(json{{"id", free_id}, {"class", 0}}.dump())->status == 409);
    res = post(json{{"id", free_id}, {"class", 1}}.dump());
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["state"] == "applied");
}

TEST_CASE("concurrent posts for one sample accept exactly one class") {
    Running r(15);
    const auto free_id = r.svc->snapshot()->dataset->unlabeled_ids().front();
    std::vector<int> codes(16);
    std::vector<std::thread> threads;
    for (int t = 0; t < 16; ++t)
        threads.emplace_back([&, t] {
            auto c = r.client();
            const auto res = c.Post("/api/labels", json{{"id", free_id}, {"class", t % 3}}.dump(), "application/json");
            codes[t] = res ? res->status : -1;
        });
    for (auto& t : threads) t.join();
    CHECK(std::count(codes.begin(), codes.end(), 202) == 1);
    for (int code : codes) {
        INFO("status " << code);
        CHECK((code == 202 || code == 200 || code == 409));
    }
    r.svc->wait_idle();
    CHECK(r.svc->snapshot()->dataset->labeled_ids().size() == 16);
}

TEST_CASE("training runs in the background and refuses a second job") {
    Running r(15);
    auto c = r.client();
    auto res = c.Post("/api/train", R"({"epochs": 3})", "application/json");
    CHECK(res->status == 202);
    res = c.Post("/api/train", R"({"epochs": 1})", "application/json");
    const bool busy = res->status == 409;
    if (busy) CHECK(json::parse(res->body)["error"] == "busy");
    CHECK(c.Post("/api/train", R"({"epochs": 0})", "application/json")->status == 400);
    r.svc->wait_idle();
    const auto m = body_of(c.Get("/api/metrics"));
    CHECK(m.size() == (busy ? 3u : 4u));
    CHECK(!m.back()["test_error"].is_null());
    CHECK(body_of(c.Get("/api/status"))["status"] == "idle");
}

TEST_CASE("queue ranks unlabeled samples and skips queued ones") {
    Running r(15);
    auto c = r.client();
    const auto q = body_of(c.Get("/api/queue?k=5"));
    REQUIRE(q.size() == 5);
    std::set<long long> ids;
    double prev = -1.0;
    for (const auto& e : q) {
        ids.insert(e["id"].get<long long>());
        CHECK(e["margin"].get<double>() >= prev);
        prev = e["margin"].get<double>();
        CHECK(e["scores"].size() == 3);
        CHECK(e["payload"].get<std::string>().find("/image") != std::string::npos);
        CHECK(!r.svc->snapshot()->dataset->is_labeled(e["id"].get<long long>()));
    }
    const auto first = q[0]["id"].get<long long>();
    c.Post("/api/labels", json{{"id", first}, {"class", 0}}.dump(), "application/json");
    for (const auto& e : body_of(c.Get("/api/queue?k=5"))) CHECK(e["id"].get<long long>() != first);
}

TEST_CASE("queue needs a classifier") {
    Running r(1);
    auto c = r.client();
    const auto res = c.Get("/api/queue");
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["error"] == "no_classifier");
}
