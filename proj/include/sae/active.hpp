#pragma once

#include "sae/data.hpp"
#include "sae/network.hpp"
#include "sae/svm.hpp"

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace sae::active {

/// top1 - top2 of the per-class scores.
double margin(const svm::SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& z);

struct RankEntry {
    data::Index id = 0;
    double margin = 0.0;
    std::vector<double> scores; ///< per-class scores
};

struct UncertaintyRanking {
    std::vector<RankEntry> entries; ///< ascending margin, ties by ascending id
    int model_epoch = 0;
};

/// Scores every unlabeled sample of `ds`.
UncertaintyRanking rank_unlabeled(const svm::SvmModel& model, const nn::SaeModel& sae, const data::Dataset& ds,
                                  int model_epoch = 0);

/// First k ids of the ranking.
std::vector<data::Index> select_batch(const UncertaintyRanking& r, std::size_t k);

/// Seeded uniform choice of k unlabeled ids, returned ascending.
std::vector<data::Index> select_random(const data::Dataset& ds, std::size_t k, std::uint64_t seed);

/// Answers label queries. Implementations throw OracleError to refuse.
class Oracle {
public:
    virtual ~Oracle() = default;
    virtual std::vector<int> query(std::span<const data::Index> ids) = 0;
};

/// Held-back true labels, from a dataset or a CSV with columns (id, label).
class ReplayOracle : public Oracle {
public:
    explicit ReplayOracle(std::map<data::Index, int> labels) : labels_(std::move(labels)) {}
    static ReplayOracle from_dataset(const data::Dataset& ds);
    static ReplayOracle from_csv(const std::filesystem::path& path);

    std::vector<int> query(std::span<const data::Index> ids) override;
    std::size_t size() const { return labels_.size(); }

private:
    std::map<data::Index, int> labels_;
};

void write_oracle_csv(const std::filesystem::path& path, const data::Dataset& ds);

/// Labels supplied from another thread, e.g. by a human through the
/// labeling service. query blocks until every id is answered or the timeout
/// passes.
class InteractiveOracle : public Oracle {
public:
    explicit InteractiveOracle(std::chrono::milliseconds timeout) : timeout_(timeout) {}

    void submit(data::Index id, int label);
    std::vector<int> query(std::span<const data::Index> ids) override;

private:
    std::chrono::milliseconds timeout_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::map<data::Index, int> answers_;
};

enum class Arm { Guided, Random };

std::string to_string(Arm a);

struct RoundResult {
    std::vector<data::Index> ids;
    std::vector<int> labels;
};

/// Picks k samples (lowest margin or random), asks the oracle and moves them
/// to the labeled side. Any failure leaves `ds` untouched.
RoundResult guided_round(data::Dataset& ds, const nn::SaeModel& sae, const svm::SvmModel& svm, std::size_t k,
                         Oracle& oracle, Arm arm = Arm::Guided, std::uint64_t seed = 0);

struct RoundRecord {
    Arm arm = Arm::Guided;
    int round = 0;
    std::size_t labeled_count = 0;
    double test_error = 0.0;
};

/// Appends to the experiment CSV, writing the header for a new file.
void append_round_csv(const std::filesystem::path& path, const RoundRecord& r);

} // namespace sae::active
