// Command-line driver: train | eval | sweep-gamma | guided | morph | rank | serve

#include "sae/commands.hpp"
#include "sae/error.hpp"
#include "sae/service.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace sae;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--set", c.overrides, "override a config field, e.g. --set train.gamma=0.75");
}

config::RunConfig load_config(const Common& c) {
    auto cfg = config::with_overrides(config::load(c.config_path), c.overrides);
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sae: training, evaluation, guided labeling and morphing"};
    app.require_subcommand(1);

    Common train_opts, eval_opts, sweep_opts, guided_opts, morph_opts, rank_opts, serve_opts;
    std::string eval_ckpt, morph_ckpt, rank_ckpt, serve_ckpt, serve_static;
    std::vector<double> gammas;
    long long morph_id = 0;
    int morph_from = 0, morph_to = 1, morph_steps = 11;
    std::size_t rank_k = 100;
    std::string host = "127.0.0.1";
    int port = 8080;

    auto* train = app.add_subcommand("train", "train a model and fit the latent SVM");
    add_common(train, train_opts);

    auto* eval = app.add_subcommand("eval", "test error, reconstruction, calibration and histogram");
    add_common(eval, eval_opts);
    eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);

    auto* sweep = app.add_subcommand("sweep-gamma", "independent runs over a list of gamma values");
    add_common(sweep, sweep_opts);
    sweep->add_option("--gammas", gammas, "at least two values")->required()->delimiter(',');

    auto* guided = app.add_subcommand("guided", "guided versus random labeling rounds");
    add_common(guided, guided_opts);

    auto* morph = app.add_subcommand("morph", "decode a sample moved between class centers");
    add_common(morph, morph_opts);
    morph->add_option("--checkpoint", morph_ckpt)->required()->check(CLI::ExistingFile);
    morph->add_option("--id", morph_id, "training sample id")->required();
    morph->add_option("--from", morph_from, "source class");
    morph->add_option("--to", morph_to, "target class");
    morph->add_option("--steps", morph_steps, "number of alphas in [0,1]");

    auto* rank = app.add_subcommand("rank", "most uncertain unlabeled samples");
    add_common(rank, rank_opts);
    rank->add_option("--checkpoint", rank_ckpt)->required()->check(CLI::ExistingFile);
    rank->add_option("--k", rank_k);

    auto* serve = app.add_subcommand("serve", "HTTP labeling service");
    add_common(serve, serve_opts);
    serve->add_option("--checkpoint", serve_ckpt)->check(CLI::ExistingFile);
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--static", serve_static, "directory with the built web client");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const auto cfg = load_config(train_opts);
            const auto out = commands::train(cfg);
            const auto& last = out.metrics.back();
            std::cout << "epochs " << out.metrics.size() << "  recon_rmse " << last.recon_rmse << "  structural "
                      << last.structural_loss << "\n"
                      << "wrote " << out.checkpoint_path.string() << ", " << out.metrics_path.string() << ", "
                      << out.latent_path.string() << '\n';
        } else if (eval->parsed()) {
            const auto cfg = load_config(eval_opts);
            const auto d = config::load_data(cfg);
            const auto ckpt = load_checkpoint(eval_ckpt);
            const auto out = commands::eval(cfg, ckpt, d.test.size() > 0 ? d.test : d.train);
            std::cout << "classification_error " << out.report.error << "\nrecon_rmse " << out.report.recon_rmse
                      << "\nsamples " << out.report.n_classified << "\nwrote " << out.calibration_path.string()
                      << ", " << out.histogram_path.string() << '\n';
        } else if (sweep->parsed()) {
            const auto rows = commands::sweep_gamma(load_config(sweep_opts), gammas);
            for (const auto& r : rows)
                std::cout << "gamma " << r.gamma << "  recon_rmse " << r.recon_rmse << "  class_error "
                          << r.class_error << '\n';
        } else if (guided->parsed()) {
            const auto out = commands::guided(load_config(guided_opts));
            std::cout << "pre-injection error " << out.pre_error << '\n';
            for (const auto& r : out.records)
                std::cout << active::to_string(r.arm) << " round " << r.round << "  labeled " << r.labeled_count
                          << "  test_error " << r.test_error << '\n';
        } else if (morph->parsed()) {
            const auto cfg = load_config(morph_opts);
            const auto d = config::load_data(cfg);
            const auto t = commands::morph_sample(cfg, load_checkpoint(morph_ckpt), d.train, morph_id, morph_from,
                                                  morph_to, morph_steps);
            for (std::size_t i = 0; i < t.alphas.size(); ++i)
                std::cout << "alpha " << t.alphas[i] << "  score " << t.scores[i] << '\n';
        } else if (rank->parsed()) {
            const auto cfg = load_config(rank_opts);
            auto d = config::load_data(cfg);
            d.train.hide_unlabeled_classes();
            const auto r = commands::rank(cfg, load_checkpoint(rank_ckpt), d.train, rank_k);
            for (const auto& e : r.entries) std::cout << e.id << ' ' << e.margin << '\n';
        } else if (serve->parsed()) {
            service::serve(load_config(serve_opts), host, port, serve_ckpt, serve_static);
        }
    } catch (const sae::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
