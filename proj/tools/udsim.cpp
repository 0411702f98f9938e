// udsim — command-line front end: validate a model spec, run survival /
// first-step / trajectory / comparison / sweep experiments, emit CSV tables
// and a run manifest.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ultradec/config.hpp"
#include "ultradec/core.hpp"
#include "ultradec/run.hpp"

namespace {

struct CliOverrides {
    std::string config_path;
    std::string out_dir;
    std::string k_mode;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool emit_plot_data = false;
    bool multi_click = false;
    bool dump_reduced = false;
};

void add_common_options(CLI::App* sub, CliOverrides& opt) {
    sub->add_option("--config", opt.config_path, "run configuration file")->required();
    sub->add_option("--out", opt.out_dir, "output directory (overrides [run] out_dir)");
    sub->add_option("--seed", opt.seed, "master seed (overrides [run] seed)");
    sub->add_option("--k-mode", opt.k_mode, "exact|resonant (overrides [run] k_mode)")
        ->check(CLI::IsMember({"exact", "resonant"}));
    sub->add_option("--threads", opt.threads, "worker threads for trajectory ensembles");
    sub->add_flag("--emit-plot-data", opt.emit_plot_data,
                  "also write gnuplot-compatible .dat files");
    sub->add_flag("--multi-click", opt.multi_click,
                  "chain clicks past the first one (trajectories only)");
    sub->add_flag("--dump-reduced", opt.dump_reduced,
                  "dump the derived K/F/back-reaction operators to reduced.json");
}

ultradec::RunConfig make_config(const CliOverrides& opt, const std::string& experiment,
                                bool seed_flag_given) {
    ultradec::RunConfig cfg = ultradec::load_run_config(opt.config_path);
    cfg.experiment = experiment;
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
    if (seed_flag_given) {
        cfg.seed = opt.seed;
        cfg.seed_set = true;
    }
    if (opt.k_mode == "exact") cfg.k_mode = ultradec::KMode::exact;
    if (opt.k_mode == "resonant") cfg.k_mode = ultradec::KMode::resonant;
    if (opt.threads > 0) cfg.threads = opt.threads;
    if (opt.emit_plot_data) cfg.emit_plot_data = true;
    if (opt.multi_click) cfg.multi_click = true;
    if (opt.dump_reduced) cfg.dump_reduced = true;
    return cfg;
}

int run_experiment(const ultradec::RunConfig& cfg) {
    const ultradec::RunManifest manifest = ultradec::run(cfg);
    std::printf("%s: wrote %zu file(s) to %s in %.3f s\n", cfg.experiment.c_str(),
                manifest.outputs.size(), cfg.out_dir.c_str(), manifest.wall_seconds);
    for (const auto& w : manifest.warnings) std::printf("warning: %s\n", w.c_str());
    return 0;
}

int run_validate(const ultradec::RunConfig& cfg) {
    const ultradec::ResolvedModel model = ultradec::resolve_model(cfg);
    const auto violations = ultradec::validate(model.spec);
    if (violations.empty()) {
        std::printf("model spec: ok (%d levels, system dimension %d)\n", model.spec.levels(),
                    model.spec.dim());
        for (const auto& w : model.warnings) std::printf("warning: %s\n", w.c_str());
        return 0;
    }
    for (const auto& v : violations) std::printf("violation: %s\n", v.c_str());
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"udsim — ultradecohered measurement-device simulator"};
    app.set_version_flag("--version", std::string("udsim ") + ultradec::kToolVersion);
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults,
                 "print the annotated default configuration and exit");

    const std::vector<std::pair<std::string, std::string>> experiments = {
        {"validate", "check the model spec and report every violated invariant"},
        {"survival", "no-click probability curve from the conditional evolution"},
        {"firststep", "first-click target distribution by quadrature"},
        {"trajectories", "seeded Monte Carlo click ensemble + empirical survival"},
        {"compare", "full joint solver vs reduced diagonal solver populations"},
        {"gamma-sweep", "full-vs-reduced error across dephasing rates"},
        {"arrival", "two-site time-of-arrival curve vs the closed form"},
    };

    std::vector<CliOverrides> opts(experiments.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < experiments.size(); ++i) {
        CLI::App* sub = app.add_subcommand(experiments[i].first, experiments[i].second);
        add_common_options(sub, opts[i]);
        subs.push_back(sub);
    }
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // help/version exit 0; usage errors nonzero
    }

    if (print_defaults) {
        std::fputs(ultradec::default_config_text().c_str(), stdout);
        return 0;
    }

    try {
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            const bool seed_given = subs[i]->count("--seed") > 0;
            const ultradec::RunConfig cfg =
                make_config(opts[i], experiments[i].first, seed_given);
            return experiments[i].first == "validate" ? run_validate(cfg) : run_experiment(cfg);
        }
        std::fputs(app.help().c_str(), stderr);
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    }
}
