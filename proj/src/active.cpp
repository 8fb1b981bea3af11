#include "sae/active.hpp"

#include "sae/csv.hpp"
#include "sae/error.hpp"
#include "sae/train.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>

namespace sae::active {

double margin(const svm::SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
    if (model.n_classes < 2) throw PreconditionError("margin needs at least two classes");
    auto s = svm::class_scores(model, z);
    std::partial_sort(s.begin(), s.begin() + 2, s.end(), std::greater<>());
    return s[0] - s[1];
}

UncertaintyRanking rank_unlabeled(const svm::SvmModel& model, const nn::SaeModel& sae, const data::Dataset& ds,
                                  int model_epoch) {
    const auto& ids = ds.unlabeled_ids();
    if (ids.empty()) throw PreconditionError("no unlabeled samples to rank");
    if (model.n_classes < 2) throw PreconditionError("margin needs at least two classes");
    const Eigen::MatrixXd z = nn::encode_ids(sae, ds, ids).cast<double>();

    UncertaintyRanking r;
    r.model_epoch = model_epoch;
    r.entries.resize(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) {
        auto& e = r.entries[j];
        e.id = ids[j];
        e.scores = svm::class_scores(model, z.col(static_cast<Eigen::Index>(j)));
        auto s = e.scores;
        std::partial_sort(s.begin(), s.begin() + 2, s.end(), std::greater<>());
        e.margin = s[0] - s[1];
    }
    std::sort(r.entries.begin(), r.entries.end(), [](const RankEntry& a, const RankEntry& b) {
        return a.margin != b.margin ? a.margin < b.margin : a.id < b.id;
    });
    return r;
}

std::vector<data::Index> select_batch(const UncertaintyRanking& r, std::size_t k) {
    if (k > r.entries.size())
        throw PreconditionError("cannot select " + std::to_string(k) + " of " + std::to_string(r.entries.size()) +
                                " ranked samples");
    std::vector<data::Index> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(r.entries[i].id);
    return out;
}

std::vector<data::Index> select_random(const data::Dataset& ds, std::size_t k, std::uint64_t seed) {
    std::vector<data::Index> pool = ds.unlabeled_ids();
    if (k > pool.size()) throw PreconditionError("not enough unlabeled samples");
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

ReplayOracle ReplayOracle::from_dataset(const data::Dataset& ds) {
    std::map<data::Index, int> labels;
    for (data::Index id = 0; id < ds.size(); ++id)
        if (const auto& c = ds.superclass(id)) labels.emplace(id, *c);
    return ReplayOracle(std::move(labels));
}

ReplayOracle ReplayOracle::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open oracle file " + path.string());
    std::map<data::Index, int> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = csv::split_record(line);
        if (f.size() != 2) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected id,label");
        long long id = 0;
        int label = 0;
        auto r1 = std::from_chars(f[0].data(), f[0].data() + f[0].size(), id);
        auto r2 = std::from_chars(f[1].data(), f[1].data() + f[1].size(), label);
        const bool ok = r1.ec == std::errc{} && r1.ptr == f[0].data() + f[0].size() && r2.ec == std::errc{} &&
                        r2.ptr == f[1].data() + f[1].size();
        if (!ok) {
            if (lineno == 1) continue; // header
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": not an integer pair");
        }
        labels[static_cast<data::Index>(id)] = label;
    }
    return ReplayOracle(std::move(labels));
}

std::vector<int> ReplayOracle::query(std::span<const data::Index> ids) {
    std::vector<int> out;
    out.reserve(ids.size());
    for (data::Index id : ids) {
        auto it = labels_.find(id);
        if (it == labels_.end()) throw OracleError("oracle has no label for sample " + std::to_string(id));
        out.push_back(it->second);
    }
    return out;
}

void write_oracle_csv(const std::filesystem::path& path, const data::Dataset& ds) {
    csv::Writer w(path, {"id", "label"});
    for (data::Index id = 0; id < ds.size(); ++id)
        if (const auto& c = ds.superclass(id)) w.values(static_cast<long long>(id), *c);
}

void InteractiveOracle::submit(data::Index id, int label) {
    {
        std::lock_guard lock(mu_);
        answers_[id] = label;
    }
    cv_.notify_all();
}

std::vector<int> InteractiveOracle::query(std::span<const data::Index> ids) {
    std::unique_lock lock(mu_);
    auto all_answered = [&] {
        return std::all_of(ids.begin(), ids.end(), [&](data::Index id) { return answers_.count(id) > 0; });
    };
    if (!cv_.wait_for(lock, timeout_, all_answered)) throw OracleError("timed out waiting for labels");
    std::vector<int> out;
    for (data::Index id : ids) {
        out.push_back(answers_.at(id));
        answers_.erase(id);
    }
    return out;
}

std::string to_string(Arm a) { return a == Arm::Guided ? "guided" : "random"; }

RoundResult guided_round(data::Dataset& ds, const nn::SaeModel& sae, const svm::SvmModel& svm, std::size_t k,
                         Oracle& oracle, Arm arm, std::uint64_t seed) {
    RoundResult r;
    if (k == 0) return r;
    r.ids = arm == Arm::Guided ? select_batch(rank_unlabeled(svm, sae, ds), k) : select_random(ds, k, seed);
    r.labels = oracle.query(r.ids);
    if (r.labels.size() != r.ids.size()) throw OracleError("oracle answered the wrong number of queries");

    // Apply to a copy so that a bad answer leaves the caller's dataset as it was.
    data::Dataset next = ds;
    for (std::size_t i = 0; i < r.ids.size(); ++i) {
        if (r.labels[i] < 0 || r.labels[i] >= ds.n_classes())
            throw OracleError("oracle label " + std::to_string(r.labels[i]) + " is not a class");
        next.assign_label(r.ids[i], r.labels[i]);
    }
    ds = std::move(next);
    return r;
}

void append_round_csv(const std::filesystem::path& path, const RoundRecord& r) {
    csv::Writer w(path, {"arm", "round", "labeled_count", "test_error"}, true);
    w.values(to_string(r.arm), r.round, r.labeled_count, r.test_error);
}

} // namespace sae::active
