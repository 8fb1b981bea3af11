#include "sae/commands.hpp"
#include "sae/error.hpp"

#include "toy.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <iterator>

using namespace sae;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

config::RunConfig toy_config(const toy::TempDir& dir, const std::string& out) {
    if (!std::filesystem::exists(dir / "train.csv")) {
        data::write_csv(toy::blobs(150, 6, 3, 3.0, 0.5, 1), dir / "train.csv");
        data::write_csv(toy::blobs(60, 6, 3, 3.0, 0.5, 2), dir / "test.csv");
    }
    config::RunConfig c;
    c.data.format = "csv";
    c.data.train_csv = dir / "train.csv";
    c.data.test_csv = dir / "test.csv";
    c.decomposition = "custom";
    c.custom_groups = {{0, 0}, {1, 1}, {2, 2}};
    c.inter_class_distance = 4.0;
    c.network = {{6, 8, 2}, nn::Activation::Identity};
    c.train.epochs = 4;
    c.train.batch_size = 16;
    c.train.learning_rate = 0.01;
    c.train.seed = 3;
    c.svm = {0.01, 10, 0};
    c.active.initial_labels = 30;
    c.active.k = 10;
    c.active.rounds = 2;
    c.active.round_epochs = 1;
    c.output_dir = dir / out;
    std::filesystem::create_directories(c.output_dir);
    return c;
}

} // namespace

TEST_CASE("train writes identical outputs for identical configs") {
    toy::TempDir dir("cmd_train");
    const auto a = commands::train(toy_config(dir, "a"));
    const auto b = commands::train(toy_config(dir, "b"));
    for (const char* f : {"model.sae", "metrics.csv", "latent2d.csv"}) {
        CHECK(std::filesystem::exists(dir / "a" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    CHECK(a.metrics.size() == 4);
    CHECK(slurp(a.metrics_path).rfind("epoch,recon_rmse,structural,combined\n", 0) == 0);
    CHECK(slurp(a.latent_path).rfind("id,x,y,class,labeled\n", 0) == 0);

    const auto ckpt = load_checkpoint(a.checkpoint_path);
    CHECK(ckpt.model == a.checkpoint.model);
    REQUIRE(ckpt.svm.has_value());
    CHECK(ckpt.meta.at("decomposition") == "custom");
}

TEST_CASE("eval reports errors and writes calibration files") {
    toy::TempDir dir("cmd_eval");
    const auto cfg = toy_config(dir, "out");
    const auto t = commands::train(cfg);
    const auto d = config::load_data(cfg);
    const auto e = commands::eval(cfg, t.checkpoint, d.test);
    CHECK(e.report.n_classified == 60);
    CHECK(e.report.error >= 0.0);
    CHECK(e.report.error <= 1.0);
    CHECK(std::filesystem::exists(e.calibration_path));
    CHECK(std::filesystem::exists(e.histogram_path));

    Checkpoint bare = t.checkpoint;
    bare.svm.reset();
    CHECK_THROWS_AS(commands::eval(cfg, bare, d.test), FormatError);
}

TEST_CASE("sweep_gamma needs two values and writes one row each") {
    toy::TempDir dir("cmd_sweep");
    const auto cfg = toy_config(dir, "out");
    CHECK_THROWS_AS(commands::sweep_gamma(cfg, {0.5}), PreconditionError);
    const auto rows = commands::sweep_gamma(cfg, {0.0, 0.5});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].gamma == 0.0);
    const auto text = slurp(cfg.output_dir / "gamma_sweep.csv");
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("guided runs both arms with a growing budget") {
    toy::TempDir dir("cmd_guided");
    const auto cfg = toy_config(dir, "out");
    const auto out = commands::guided(cfg);
    REQUIRE(out.records.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(out.records[i].arm == (i < 3 ? active::Arm::Guided : active::Arm::Random));
        CHECK(out.records[i].labeled_count == 30 + 10 * (i % 3));
    }
    CHECK(out.records[0].test_error == out.pre_error);
    CHECK(std::filesystem::exists(cfg.output_dir / "guided.csv"));
}

TEST_CASE("morph_sample and rank write their outputs") {
    toy::TempDir dir("cmd_morph");
    const auto cfg = toy_config(dir, "out");
    const auto t = commands::train(cfg);
    const auto d = config::load_data(cfg);
    const auto track = commands::morph_sample(cfg, t.checkpoint, d.train, 4, 0, 2, 4);
    CHECK(track.outputs.size() == 4);
    CHECK(std::filesystem::exists(cfg.output_dir / "morph" / "morph_4_0_2_step003.csv"));
    CHECK_THROWS_AS(commands::morph_sample(cfg, t.checkpoint, d.train, 999, 0, 2, 4), PreconditionError);

    const auto r = commands::rank(cfg, t.checkpoint, d.train, 5);
    CHECK(r.entries.size() == 5);
    const auto text = slurp(cfg.output_dir / "ranking.csv");
    CHECK(text.rfind("id,margin,score_0,score_1,score_2\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}

namespace {

config::RunConfig overlap_config(std::uint64_t seed) {
    config::RunConfig c;
    c.network = {{6, 8, 2}, nn::Activation::Identity};
    c.inter_class_distance = 4.0;
    c.train.gamma = 0.5;
    c.train.optimizer = nn::Optimizer::Adam;
    c.train.learning_rate = 0.01;
    c.train.batch_size = 16;
    c.train.epochs = 30;
    c.train.seed = seed;
    c.svm = {0.01, 20, seed};
    c.active.k = 15;
    c.active.rounds = 2;
    c.active.round_epochs = 10;
    c.active.split_seed = seed;
    return c;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

} // namespace

TEST_CASE("guided selection is no worse than random on overlapping classes") {
    std::vector<double> guided, random;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto train = data::split_labeled(toy::blobs(600, 6, 3, 2.0, 1.0, 10 + seed), 6, seed);
        const auto test = toy::blobs(600, 6, 3, 2.0, 1.0, 100 + seed);
        const auto out = commands::guided_experiment(overlap_config(seed), train, test);
        for (const auto& r : out.records)
            if (r.round == 2) (r.arm == active::Arm::Guided ? guided : random).push_back(r.test_error);
    }
    REQUIRE(guided.size() == 5);
    REQUIRE(random.size() == 5);
    CHECK(median_of(guided) <= median_of(random));
}

TEST_CASE("with k = 0 both arms follow the same trajectory") {
    auto cfg = overlap_config(1);
    cfg.active.k = 0;
    const auto train = data::split_labeled(toy::blobs(300, 6, 3, 2.0, 1.0, 11), 6, 1);
    const auto out = commands::guided_experiment(cfg, train, toy::blobs(300, 6, 3, 2.0, 1.0, 101));
    REQUIRE(out.records.size() == 6);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(out.records[i].labeled_count == 6);
        CHECK(out.records[i].test_error == out.records[i + 3].test_error);
    }
}
