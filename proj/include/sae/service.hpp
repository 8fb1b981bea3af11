#pragma once

#include "sae/active.hpp"
#include "sae/config.hpp"
#include "sae/data.hpp"
#include "sae/network.hpp"
#include "sae/svm.hpp"
#include "sae/train.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace sae::service {

/// 8-bit grayscale PNG of values in [0,1].
std::string encode_png(const Eigen::Ref<const Eigen::VectorXf>& pixels, int rows, int cols);

struct Reply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Everything a request handler may read. Published by the worker and never
/// mutated afterwards.
struct Snapshot {
    std::shared_ptr<const nn::SaeModel> model;
    std::shared_ptr<const svm::SvmModel> svm; ///< null while fewer than two classes are labeled
    std::shared_ptr<const data::Dataset> dataset;
    std::vector<nn::EpochMetrics> history;
    std::vector<double> test_errors; ///< per epoch, when a test set is present
    int epoch = 0;
    std::uint64_t version = 0;
};

enum class Phase { Idle, Training, Ranking };

/// Labeling service state. A single worker thread owns training; HTTP
/// handlers read published snapshots and talk to the worker through the
/// label queue and the train command slot.
class LabelService {
public:
    LabelService(data::Dataset train, data::Dataset test, nn::SaeModel model, mds::DistanceSpec spec,
                 nn::TrainConfig train_cfg, svm::SvmOptions svm_opts);
    ~LabelService();

    LabelService(const LabelService&) = delete;
    LabelService& operator=(const LabelService&) = delete;

    Reply status() const;
    Reply queue(std::size_t k);
    Reply sample_image(data::Index id) const;
    Reply sample_vector(data::Index id) const;
    Reply submit_label(const std::string& body);
    Reply start_training(const std::string& body);
    Reply latent(std::size_t n) const;
    Reply metrics() const;

    std::shared_ptr<const Snapshot> snapshot() const;
    Phase phase() const { return phase_.load(); }
    /// Blocks until the worker is idle and the label queue is applied.
    void wait_idle();

    /// Registers every route on `server`.
    void bind(httplib::Server& server);

private:
    void worker_loop();
    void publish(const nn::SaeModel& model, const data::Dataset& ds, int epoch,
                 const std::vector<nn::EpochMetrics>& history, const std::vector<double>& test_errors,
                 std::shared_ptr<const svm::SvmModel> fitted = nullptr);
    /// Moves queued labels into `ds`. Caller holds mu_.
    std::size_t apply_pending(data::Dataset& ds);

    data::Dataset test_;
    svm::SvmOptions svm_opts_;

    // Worker-owned training state.
    data::Dataset work_ds_;
    nn::Trainer trainer_;
    std::vector<double> test_errors_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::shared_ptr<const Snapshot> snap_;
    std::map<data::Index, int> pending_;
    std::vector<int> committed_; ///< class per sample in work_ds_, -1 when unlabeled; guarded by mu_
    int requested_epochs_ = 0;
    bool stop_ = false;
    std::atomic<Phase> phase_{Phase::Idle};
    std::atomic<int> current_epoch_{0};

    struct RankCache {
        std::uint64_t version = ~std::uint64_t{0};
        active::UncertaintyRanking ranking;
    };
    std::mutex rank_mu_;
    RankCache rank_cache_;

    std::thread worker_;
};

std::string to_string(Phase p);

/// Builds the service from a run config, starting from a fresh model or from
/// a checkpoint, and serves until the process is stopped. `static_dir`, when
/// set, is mounted at "/" for the browser client.
void serve(const config::RunConfig& cfg, const std::string& host, int port,
           const std::filesystem::path& checkpoint = {}, const std::filesystem::path& static_dir = {});

} // namespace sae::service
