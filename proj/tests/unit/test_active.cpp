#include "sae/active.hpp"
#include "sae/error.hpp"
#include "sae/train.hpp"

#include "toy.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

using namespace sae;
using namespace std::chrono_literals;

namespace {

struct Fixture {
    data::Dataset ds;
    nn::SaeModel sae;
    svm::SvmModel svm;

    Fixture() : ds(data::split_labeled(toy::blobs(200, 6, 3, 3.0, 1.0, 1), 30, 2)),
                sae(nn::init_model<float>({{6, 8, 2}, nn::Activation::Identity}, 3)) {
        const auto z = nn::encode_ids(sae, ds, ds.labeled_ids()).cast<double>();
        svm = svm::svm_fit(z, ds.labeled_classes(), 3, {1e-2, 20, 0});
    }
};

class FailingOracle : public active::Oracle {
public:
    std::vector<int> query(std::span<const data::Index>) override { throw OracleError("refused"); }
};

class BadLabelOracle : public active::Oracle {
public:
    std::vector<int> query(std::span<const data::Index> ids) override { return std::vector<int>(ids.size(), 7); }
};

} // namespace

TEST_CASE("margin is the gap between the two best class scores") {
    Fixture f;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Vector2d z(g(rng), g(rng));
        auto s = svm::class_scores(f.svm, z);
        std::sort(s.rbegin(), s.rend());
        CHECK(active::margin(f.svm, z) == doctest::Approx(s[0] - s[1]));
        CHECK(active::margin(f.svm, z) >= 0.0);
    }
    // on the 0|1 boundary, halfway between their centers
    const Eigen::VectorXd mid = 0.5 * (f.svm.centers.col(0) + f.svm.centers.col(1));
    CHECK(svm::normalized_score(f.svm, 0, 1, mid) == doctest::Approx(0.5));
}

TEST_CASE("rank_unlabeled orders by margin then id") {
    Fixture f;
    const auto r = active::rank_unlabeled(f.svm, f.sae, f.ds, 4);
    CHECK(r.model_epoch == 4);
    REQUIRE(r.entries.size() == f.ds.unlabeled_ids().size());
    std::set<data::Index> seen;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        CHECK(!f.ds.is_labeled(r.entries[i].id));
        CHECK(seen.insert(r.entries[i].id).second);
        if (i > 0) {
            const auto& a = r.entries[i - 1];
            const auto& b = r.entries[i];
            CHECK((a.margin < b.margin || (a.margin == b.margin && a.id < b.id)));
        }
    }
    const auto z = nn::encode_ids(f.sae, f.ds, {r.entries[0].id}).cast<double>();
    CHECK(r.entries[0].margin == doctest::Approx(active::margin(f.svm, z.col(0))));

    CHECK(active::select_batch(r, 3) ==
          std::vector<data::Index>{r.entries[0].id, r.entries[1].id, r.entries[2].id});
    CHECK(active::select_batch(r, 0).empty());
    CHECK_THROWS_AS(active::select_batch(r, r.entries.size() + 1), PreconditionError);
}

TEST_CASE("rank_unlabeled needs unlabeled samples") {
    Fixture f;
    auto full = data::split_labeled(f.ds, f.ds.size(), 0);
    CHECK_THROWS_AS(active::rank_unlabeled(f.svm, f.sae, full), PreconditionError);
}

TEST_CASE("select_random is seeded, sorted and unlabeled") {
    Fixture f;
    const auto a = active::select_random(f.ds, 10, 5);
    CHECK(a == active::select_random(f.ds, 10, 5));
    CHECK(a != active::select_random(f.ds, 10, 6));
    CHECK(std::is_sorted(a.begin(), a.end()));
    for (auto id : a) CHECK(!f.ds.is_labeled(id));
    CHECK(std::set<data::Index>(a.begin(), a.end()).size() == 10);
    CHECK_THROWS_AS(active::select_random(f.ds, 1000, 0), PreconditionError);
}

TEST_CASE("guided_round labels the least certain samples") {
    Fixture f;
    auto oracle = active::ReplayOracle::from_dataset(f.ds);
    CHECK(oracle.size() == 200);
    const auto expect = active::select_batch(active::rank_unlabeled(f.svm, f.sae, f.ds), 5);
    auto ds = f.ds;
    const auto r = active::guided_round(ds, f.sae, f.svm, 5, oracle);
    CHECK(r.ids == expect);
    CHECK(ds.labeled_ids().size() == 35);
    for (std::size_t i = 0; i < r.ids.size(); ++i) {
        CHECK(ds.is_labeled(r.ids[i]));
        CHECK(r.labels[i] == *f.ds.superclass(r.ids[i]));
    }

    const auto rr = active::guided_round(ds, f.sae, f.svm, 5, oracle, active::Arm::Random, 3);
    CHECK(ds.labeled_ids().size() == 40);
    CHECK(rr.ids.size() == 5);

    const auto none = active::guided_round(ds, f.sae, f.svm, 0, oracle);
    CHECK(none.ids.empty());
    CHECK(ds.labeled_ids().size() == 40);
}

TEST_CASE("a failed round leaves the dataset untouched") {
    Fixture f;
    auto ds = f.ds;
    FailingOracle fail;
    CHECK_THROWS_AS(active::guided_round(ds, f.sae, f.svm, 5, fail), OracleError);
    CHECK(ds.labeled_ids() == f.ds.labeled_ids());
    BadLabelOracle bad;
    CHECK_THROWS_AS(active::guided_round(ds, f.sae, f.svm, 5, bad), OracleError);
    CHECK(ds.labeled_ids() == f.ds.labeled_ids());
    active::ReplayOracle empty({});
    CHECK_THROWS_AS(active::guided_round(ds, f.sae, f.svm, 5, empty), OracleError);
    CHECK(ds.labeled_ids() == f.ds.labeled_ids());
}

TEST_CASE("the labeled count grows by k each round") {
    Fixture f;
    auto oracle = active::ReplayOracle::from_dataset(f.ds);
    auto ds = f.ds;
    std::size_t prev = ds.labeled_ids().size();
    for (int round = 0; round < 5; ++round) {
        active::guided_round(ds, f.sae, f.svm, 7, oracle);
        CHECK(ds.labeled_ids().size() == prev + 7);
        prev = ds.labeled_ids().size();
    }
}

TEST_CASE("ReplayOracle CSV round trip and errors") {
    Fixture f;
    toy::TempDir dir("oracle");
    active::write_oracle_csv(dir / "o.csv", f.ds);
    auto o = active::ReplayOracle::from_csv(dir / "o.csv");
    CHECK(o.size() == 200);
    const std::vector<data::Index> ids{0, 5, 199};
    const auto labels = o.query(ids);
    for (std::size_t i = 0; i < ids.size(); ++i) CHECK(labels[i] == *f.ds.superclass(ids[i]));
    const std::vector<data::Index> missing{500};
    CHECK_THROWS_AS(o.query(missing), OracleError);

    std::ofstream(dir / "bad.csv") << "id,label\n1,2,3\n";
    CHECK_THROWS_AS(active::ReplayOracle::from_csv(dir / "bad.csv"), FormatError);
    std::ofstream(dir / "nan.csv") << "id,label\n1,x\n";
    CHECK_THROWS_AS(active::ReplayOracle::from_csv(dir / "nan.csv"), ParseError);
    CHECK_THROWS_AS(active::ReplayOracle::from_csv(dir / "absent.csv"), IoError);
}

TEST_CASE("InteractiveOracle waits for answers from another thread") {
    active::InteractiveOracle o(2000ms);
    std::thread t([&] {
        std::this_thread::sleep_for(20ms);
        o.submit(3, 1);
        o.submit(8, 0);
    });
    const std::vector<data::Index> ids{8, 3};
    CHECK(o.query(ids) == std::vector<int>{0, 1});
    t.join();

    active::InteractiveOracle slow(30ms);
    const std::vector<data::Index> unanswered{1};
    CHECK_THROWS_AS(slow.query(unanswered), OracleError);
}

TEST_CASE("append_round_csv writes one header") {
    toy::TempDir dir("rounds");
    active::append_round_csv(dir / "g.csv", {active::Arm::Guided, 0, 600, 0.25});
    active::append_round_csv(dir / "g.csv", {active::Arm::Random, 1, 700, 0.125});
    std::ifstream in(dir / "g.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "arm,round,labeled_count,test_error\nguided,0,600,0.25\nrandom,1,700,0.125\n");
}
