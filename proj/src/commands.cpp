#include "sae/commands.hpp"

#include "sae/csv.hpp"
#include "sae/error.hpp"

#include <random>

namespace sae::commands {

namespace {

nn::TrainResult fit(const config::RunConfig& cfg, const data::Dataset& ds) {
    const auto spec = cfg.make_distance_spec(ds.n_classes());
    return nn::train(nn::init_model<float>(cfg.network, cfg.train.seed), ds, spec, cfg.train);
}

const data::Dataset& eval_set(const config::LoadedData& d) { return d.test.size() > 0 ? d.test : d.train; }

} // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<nn::EpochMetrics>& metrics) {
    csv::Writer w(path, {"epoch", "recon_rmse", "structural", "combined"});
    for (const auto& m : metrics) w.values(m.epoch, m.recon_rmse, m.structural_loss, m.combined_loss);
}

void write_latent_csv(const std::filesystem::path& path, const nn::SaeModel& model, const data::Dataset& ds,
                      bool random_projection, std::uint64_t seed) {
    const Eigen::MatrixXd z = nn::encode_all(model, ds).cast<double>();
    Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(2, z.rows());
    if (random_projection && z.rows() > 2) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g;
        for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = g(rng);
    } else {
        for (Eigen::Index i = 0; i < std::min<Eigen::Index>(2, z.rows()); ++i) proj(i, i) = 1.0;
    }
    const Eigen::MatrixXd xy = proj * z;
    csv::Writer w(path, {"id", "x", "y", "class", "labeled"});
    for (data::Index id = 0; id < ds.size(); ++id) {
        const auto& c = ds.superclass(id);
        w.values(static_cast<long long>(id), xy(0, id), xy(1, id), c ? std::to_string(*c) : std::string{},
                 ds.is_labeled(id) ? 1 : 0);
    }
}

TrainOutcome train(const config::RunConfig& cfg) {
    const auto d = config::load_data(cfg);
    auto result = fit(cfg, d.train);

    TrainOutcome out;
    out.metrics = result.metrics;
    out.checkpoint.model = std::move(result.model);
    out.checkpoint.epoch = static_cast<int>(out.metrics.size());
    out.checkpoint.distance = cfg.make_distance_spec(d.train.n_classes());
    out.checkpoint.svm = fit_latent_svm(out.checkpoint.model, d.train, cfg.svm);
    out.checkpoint.meta["gamma"] = csv::format_number(cfg.train.gamma);
    out.checkpoint.meta["decomposition"] = cfg.decomposition;

    out.checkpoint_path = cfg.output_dir / "model.sae";
    out.metrics_path = cfg.output_dir / "metrics.csv";
    out.latent_path = cfg.output_dir / "latent2d.csv";
    save_checkpoint(out.checkpoint, out.checkpoint_path);
    write_metrics_csv(out.metrics_path, out.metrics);
    write_latent_csv(out.latent_path, out.checkpoint.model, d.train);
    return out;
}

EvalOutcome eval(const config::RunConfig& cfg, const Checkpoint& ckpt, const data::Dataset& test) {
    if (!ckpt.svm) throw FormatError("checkpoint has no SVM section; run train first");
    EvalOutcome out;
    out.report = evaluate(ckpt.model, *ckpt.svm, test);
    if (out.report.n_classified == 0) throw PreconditionError("evaluation set has no classes");
    out.calibration_path = cfg.output_dir / "calibration.csv";
    out.histogram_path = cfg.output_dir / "histogram.csv";
    svm::write_calibration_csv(out.calibration_path,
                               svm::calibration_curve(out.report.scores, out.report.correct, 10));
    svm::write_histogram_csv(out.histogram_path, svm::score_histogram(out.report.scores, 10));
    return out;
}

std::vector<SweepRow> sweep_gamma(const config::RunConfig& cfg, const std::vector<double>& gammas) {
    if (gammas.size() < 2) throw PreconditionError("a gamma sweep needs at least two values");
    const auto d = config::load_data(cfg);
    std::vector<SweepRow> rows;
    csv::Writer w(cfg.output_dir / "gamma_sweep.csv", {"gamma", "recon_rmse", "class_error"});
    for (double g : gammas) {
        auto run = cfg;
        run.train.gamma = g;
        run.validate(false);
        const auto result = fit(run, d.train);
        const auto s = fit_latent_svm(result.model, d.train, run.svm);
        const auto report = evaluate(result.model, s, eval_set(d));
        rows.push_back({g, report.recon_rmse, report.error});
        w.values(g, report.recon_rmse, report.error);
    }
    return rows;
}

GuidedOutcome guided_experiment(const config::RunConfig& cfg, data::Dataset train, const data::Dataset& test,
                                active::Oracle* oracle) {
    active::ReplayOracle replay = active::ReplayOracle::from_dataset(train);
    if (!oracle) oracle = &replay;
    train.hide_unlabeled_classes();

    const auto spec = cfg.make_distance_spec(train.n_classes());
    nn::Trainer base(nn::init_model<float>(cfg.network, cfg.train.seed), spec, cfg.train);
    for (int e = 0; e < cfg.train.epochs; ++e) base.run_epoch(train);

    GuidedOutcome out;
    const auto base_svm = fit_latent_svm(base.model(), train, cfg.svm);
    out.pre_error = classification_error(base.model(), base_svm, test);

    for (auto arm : {active::Arm::Guided, active::Arm::Random}) {
        out.records.push_back({arm, 0, train.labeled_ids().size(), out.pre_error});
        nn::Trainer trainer = base;
        data::Dataset ds = train;
        svm::SvmModel s = base_svm;
        for (int round = 1; round <= cfg.active.rounds; ++round) {
            active::guided_round(ds, trainer.model(), s, cfg.active.k, *oracle, arm,
                                 cfg.active.split_seed + static_cast<std::uint64_t>(round));
            if (cfg.active.cold_restart)
                trainer = nn::Trainer(nn::init_model<float>(cfg.network, cfg.train.seed), spec, cfg.train);
            const int epochs = cfg.active.cold_restart ? cfg.train.epochs : cfg.active.round_epochs;
            for (int e = 0; e < epochs; ++e) trainer.run_epoch(ds);
            s = fit_latent_svm(trainer.model(), ds, cfg.svm);
            out.records.push_back({arm, round, ds.labeled_ids().size(), classification_error(trainer.model(), s, test)});
        }
    }
    return out;
}

GuidedOutcome guided(const config::RunConfig& cfg) {
    auto d = config::load_data(cfg);
    if (d.test.size() == 0) throw PreconditionError("the guided experiment needs a test set");
    std::optional<active::ReplayOracle> file_oracle;
    if (!cfg.active.oracle.empty()) file_oracle = active::ReplayOracle::from_csv(cfg.active.oracle);
    auto out = guided_experiment(cfg, std::move(d.train), d.test, file_oracle ? &*file_oracle : nullptr);
    const auto path = cfg.output_dir / "guided.csv";
    std::filesystem::remove(path);
    for (const auto& r : out.records) active::append_round_csv(path, r);
    return out;
}

morph::MorphTrack morph_sample(const config::RunConfig& cfg, const Checkpoint& ckpt, const data::Dataset& ds,
                               data::Index id, int from, int to, int n_steps) {
    if (!ckpt.svm) throw FormatError("checkpoint has no SVM section; run train first");
    if (id < 0 || id >= ds.size()) throw PreconditionError("sample id out of range");
    auto t = morph::morph_track(ckpt.model, *ckpt.svm, ds.feature(id), from, to, n_steps, id);
    morph::write_track(t, cfg.output_dir / "morph", ds.kind(), ds.image_shape());
    return t;
}

active::UncertaintyRanking rank(const config::RunConfig& cfg, const Checkpoint& ckpt, const data::Dataset& ds,
                                std::size_t k) {
    if (!ckpt.svm) throw FormatError("checkpoint has no SVM section; run train first");
    auto r = active::rank_unlabeled(*ckpt.svm, ckpt.model, ds, ckpt.epoch);
    r.entries.resize(std::min(k, r.entries.size()));
    std::vector<std::string> header{"id", "margin"};
    for (int c = 0; c < ckpt.svm->n_classes; ++c) header.push_back("score_" + std::to_string(c));
    csv::Writer w(cfg.output_dir / "ranking.csv", header);
    for (const auto& e : r.entries) {
        std::vector<std::string> row{std::to_string(e.id), csv::format_number(e.margin)};
        for (double s : e.scores) row.push_back(csv::format_number(s));
        w.row(row);
    }
    return r;
}

} // namespace sae::commands
