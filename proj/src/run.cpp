#include "ultradec/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ultradec/csv.hpp"
#include "ultradec/jump.hpp"
#include "ultradec/lindblad.hpp"
#include "ultradec/models.hpp"
#include "ultradec/reduction.hpp"

namespace ultradec {

namespace fs = std::filesystem;

std::vector<double> linspace(double lo, double hi, int points) {
    std::vector<double> out(points);
    for (int i = 0; i < points; ++i) {
        out[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    }
    out.back() = hi;
    return out;
}

// ------------------------------ model resolution ------------------------------

namespace {

Eigen::VectorXcd state_amplitudes(const RunConfig& cfg, int dim, const std::string& key,
                                  const Eigen::VectorXcd& fallback) {
    if (!cfg.raw.has("model", key)) return fallback;
    const std::vector<Complex> entries = cfg.raw.get_complex_list("model", key);
    if (static_cast<int>(entries.size()) != dim) {
        throw ConfigError("[model] " + key + ": expected " + std::to_string(dim) +
                          " amplitudes, got " + std::to_string(entries.size()));
    }
    Eigen::VectorXcd psi(dim);
    for (int i = 0; i < dim; ++i) psi(i) = entries[i];
    const double norm = psi.norm();
    if (std::abs(norm - 1.0) > 1e-6) {
        throw ConfigError("[model] " + key + ": amplitudes must be normalised (norm = " +
                          std::to_string(norm) + ")");
    }
    return psi / norm;
}

ResolvedModel resolve_von_neumann(const RunConfig& cfg, double dephasing) {
    VonNeumannParams p;
    p.outcomes = cfg.raw.get_int("model", "outcomes", p.outcomes);
    p.coupling = cfg.raw.get_double("model", "coupling", p.coupling);
    p.dephasing = dephasing;
    if (cfg.raw.has("model", "probe_basis")) {
        p.probe_basis = cfg.raw.get_matrix("model", "probe_basis");
    }

    ResolvedModel out;
    out.spec = build_von_neumann(p);

    const int d = out.spec.dim();
    const Eigen::VectorXcd uniform =
        Eigen::VectorXcd::Constant(d, Complex(1.0 / std::sqrt(static_cast<double>(d)), 0.0));
    const Eigen::VectorXcd psi = state_amplitudes(cfg, d, "state", uniform);

    ComplexOperator basis = p.probe_basis;
    if (basis.size() == 0) basis = ComplexOperator::Identity(d, d);
    const Eigen::VectorXcd psi_q = basis * psi;  // amplitudes are given over the probe basis
    out.initial_state = psi_q * psi_q.adjoint();

    const double chi = p.chi();
    out.analytic_survival = [chi](double t) { return analytic_survival_von_neumann(chi, t); };
    return out;
}

ResolvedModel resolve_photon_detector(const RunConfig& cfg, double dephasing) {
    PhotonDetectorParams p;
    p.coupling = cfg.raw.get_double("model", "coupling", p.coupling);
    p.dephasing = dephasing;
    p.transition_energy = cfg.raw.get_double("model", "transition_energy", p.transition_energy);
    p.fock_cutoff = cfg.raw.get_int("model", "fock_cutoff", p.fock_cutoff);

    ResolvedModel out;
    const std::string field = cfg.raw.get_string("model", "field", "fock:0");
    const std::size_t colon = field.find(':');
    const std::string kind = field.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : field.substr(colon + 1);
    if (kind == "fock") {
        int n = 0;
        try {
            n = std::stoi(arg);
        } catch (const std::exception&) {
            throw ConfigError("[model] field: expected fock:<n>, got '" + field + "'");
        }
        p.field_state = fock_state(n, p.fock_cutoff);
    } else if (kind == "coherent") {
        Complex alpha;
        try {
            if (!arg.empty() && arg.front() == '[') {
                ConfigMap tmp;
                tmp.set("model", "alpha", arg);
                alpha = tmp.get_complex_list("model", "alpha").at(0);
            } else {
                alpha = Complex(std::stod(arg), 0.0);
            }
        } catch (const std::exception&) {
            throw ConfigError("[model] field: expected coherent:<alpha>, got '" + field + "'");
        }
        double dropped = 0.0;
        p.field_state = coherent_state(alpha, p.fock_cutoff, &dropped);
        out.warnings.push_back("coherent field truncated at n = " +
                               std::to_string(p.fock_cutoff) + "; dropped weight " +
                               format_g17(dropped));
    } else {
        throw ConfigError("[model] field: expected fock:<n> or coherent:<alpha>, got '" + field +
                          "'");
    }

    PhotonDetectorModel model = build_photon_detector(p);
    out.spec = model.spec;
    out.initial_state = model.field_state;
    for (const auto& w : model.warnings) out.warnings.push_back(w);

    const ComplexOperator field_state = model.field_state;
    const double g = p.coupling;
    const double gamma = p.dephasing;
    out.analytic_survival = [field_state, g, gamma](double t) {
        return analytic_survival_photon_detector(field_state, g, gamma, t);
    };
    return out;
}

ResolvedModel resolve_two_site(const RunConfig& cfg, double dephasing) {
    TwoSiteParams p;
    p.hopping = cfg.raw.get_double("model", "hopping", p.hopping);
    p.coupling = cfg.raw.get_double("model", "coupling", p.coupling);
    p.dephasing = dephasing;

    ResolvedModel out;
    out.spec = build_two_site(p);

    const std::string site = cfg.raw.get_string("model", "initial_site", "L");
    Eigen::VectorXcd psi(2);
    if (site == "L") {
        psi << 1.0, 0.0;
    } else if (site == "R") {
        psi << 0.0, 1.0;
    } else {
        throw ConfigError("[model] initial_site: expected L or R, got '" + site + "'");
    }
    psi = state_amplitudes(cfg, 2, "state", psi);
    out.initial_state = psi * psi.adjoint();

    // The closed form assumes the particle starts on the unprobed site.
    if (std::abs(psi(0)) == 1.0) {
        const double delta = p.hopping;
        const double chi = p.chi();
        out.analytic_survival = [delta, chi](double t) {
            return analytic_survival_two_site(delta, chi, t);
        };
    }
    return out;
}

// Builds the spec exactly as written; structural validation happens in the
// validate experiment or at the solver entry points.
ResolvedModel resolve_custom(const RunConfig& cfg, double dephasing, bool override_dephasing) {
    ResolvedModel out;
    out.spec = model_spec_from_config(cfg.raw);
    if (override_dephasing) {
        out.spec.device.dephasing_rates.setConstant(dephasing);
    }

    const int d = out.spec.dim();
    out.initial_level = cfg.raw.get_int("model", "initial_level", 0);
    if (out.initial_level < 0 || out.initial_level >= out.spec.levels()) {
        throw ConfigError("[model] initial_level: out of range");
    }
    if (cfg.raw.has("model", "initial_density")) {
        out.initial_state = cfg.raw.get_matrix("model", "initial_density");
        if (out.initial_state.rows() != d || out.initial_state.cols() != d) {
            throw ConfigError("[model] initial_density: expected a " + std::to_string(d) + "x" +
                              std::to_string(d) + " matrix");
        }
    } else {
        Eigen::VectorXcd fallback = Eigen::VectorXcd::Zero(d);
        fallback(0) = 1.0;
        const Eigen::VectorXcd psi = state_amplitudes(cfg, d, "state", fallback);
        out.initial_state = psi * psi.adjoint();
    }
    return out;
}

ResolvedModel resolve_impl(const RunConfig& cfg, double dephasing, bool override_dephasing) {
    const std::string& name = cfg.model_name;
    try {
        if (name == "von-neumann") return resolve_von_neumann(cfg, dephasing);
        if (name == "photon-detector") return resolve_photon_detector(cfg, dephasing);
        if (name == "two-site") return resolve_two_site(cfg, dephasing);
        if (name == "custom") return resolve_custom(cfg, dephasing, override_dephasing);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError("[model]: " + std::string(e.what()));
    }
    throw ConfigError("[model] name: unknown model '" + name +
                      "' (von-neumann | photon-detector | two-site | custom)");
}

}  // namespace

ResolvedModel resolve_model(const RunConfig& cfg) {
    const double dephasing = cfg.raw.get_double("model", "dephasing", [&] {
        if (cfg.model_name == "photon-detector") return 10.0;
        if (cfg.model_name == "two-site") return 1.0;
        return 100.0;
    }());
    return resolve_impl(cfg, dephasing, false);
}

ResolvedModel resolve_model(const RunConfig& cfg, double dephasing) {
    return resolve_impl(cfg, dephasing, true);
}

// --------------------------------- experiments --------------------------------

namespace {

struct ExperimentOutput {
    std::vector<std::string> files;     // paths relative to out_dir
    std::vector<std::string> warnings;
};

void emit_table(const RunConfig& cfg, ExperimentOutput& out, const std::string& stem,
                const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows,
                const std::vector<std::string>& trailing = {}) {
    const fs::path dir(cfg.out_dir);
    const std::string csv_name = stem + ".csv";
    write_csv((dir / csv_name).string(), header, rows, trailing);
    out.files.push_back(csv_name);
    if (cfg.emit_plot_data) {
        const std::string dat_name = stem + ".dat";
        write_plot_data((dir / dat_name).string(), header, rows);
        out.files.push_back(dat_name);
    }
}

nlohmann::json matrix_to_json(const ComplexOperator& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back({m(i, j).real(), m(i, j).imag()});
        }
        rows.push_back(row);
    }
    return rows;
}

void dump_reduced_model(const RunConfig& cfg, const ReducedModel& red, ExperimentOutput& out) {
    if (!cfg.dump_reduced) return;
    nlohmann::json j;
    j["mode"] = red.mode == KMode::resonant ? "resonant" : "exact";
    for (const auto& kv : red.k) {
        const std::string key =
            std::to_string(kv.first.first) + "," + std::to_string(kv.first.second);
        j["K"][key] = matrix_to_json(kv.second);
    }
    for (const auto& kv : red.f) {
        const std::string key =
            std::to_string(kv.first.first) + "," + std::to_string(kv.first.second);
        j["F"][key] = matrix_to_json(kv.second);
    }
    for (std::size_t mu = 0; mu < red.back_reaction.size(); ++mu) {
        j["back_reaction"][std::to_string(mu)] = matrix_to_json(red.back_reaction[mu]);
    }
    std::ofstream f(fs::path(cfg.out_dir) / "reduced.json");
    f << j.dump(2) << "\n";
    out.files.push_back("reduced.json");
}

ExperimentOutput run_survival(const RunConfig& cfg, bool arrival) {
    ExperimentOutput out;
    if (arrival && cfg.model_name != "two-site") {
        throw ConfigError("[model] name: the arrival experiment needs the two-site model");
    }
    ResolvedModel model = resolve_model(cfg);
    out.warnings = model.warnings;

    const ReducedModel red = compute_reduced(model.spec, cfg.k_mode);
    const std::vector<double> grid = linspace(0.0, cfg.t_max, cfg.t_points);
    const BackReactionTimeline tl =
        back_react(red.back_reaction[model.initial_level], model.initial_state,
                   model.spec.system.hamiltonian, grid, cfg.solver);
    const SurvivalCurve curve = survival(tl);

    const bool analytic = static_cast<bool>(model.analytic_survival);
    std::vector<std::string> header = {"t", "p_numeric"};
    if (analytic) header.push_back("p_analytic");
    std::vector<std::vector<std::string>> rows;
    double max_dev = 0.0;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        std::vector<std::string> row = {format_g17(curve.times[i]), format_g17(curve.values[i])};
        if (analytic) {
            const double ref = model.analytic_survival(curve.times[i]);
            max_dev = std::max(max_dev, std::abs(ref - curve.values[i]));
            row.push_back(format_g17(ref));
        }
        rows.push_back(std::move(row));
    }
    std::vector<std::string> trailing;
    if (analytic) trailing.push_back("max_abs_deviation = " + format_g17(max_dev));
    emit_table(cfg, out, arrival ? "arrival" : "survival", header, rows, trailing);
    dump_reduced_model(cfg, red, out);
    return out;
}

ExperimentOutput run_firststep(const RunConfig& cfg) {
    ExperimentOutput out;
    ResolvedModel model = resolve_model(cfg);
    out.warnings = model.warnings;

    const ReducedModel red = compute_reduced(model.spec, cfg.k_mode);
    const FirstStepDistribution dist =
        first_step_distribution(red, model.initial_state, model.initial_level, cfg.t_max,
                                cfg.solver, cfg.escape_cutoff);
    for (const auto& w : dist.warnings) out.warnings.push_back(w);

    std::vector<std::vector<std::string>> rows;
    for (int nu = 0; nu < model.spec.levels(); ++nu) {
        if (nu == dist.source) continue;
        rows.push_back({std::to_string(nu), format_g17(dist.probabilities(nu))});
    }
    emit_table(cfg, out, "firststep", {"to_level", "pi"}, rows,
               {"escape_total = " + format_g17(dist.escape_total),
                "remainder = " + format_g17(dist.remainder)});
    dump_reduced_model(cfg, red, out);
    return out;
}

ExperimentOutput run_trajectories(const RunConfig& cfg) {
    ExperimentOutput out;
    if (!cfg.seed_set) {
        throw ConfigError("[run] seed: required for the trajectories experiment");
    }
    ResolvedModel model = resolve_model(cfg);
    out.warnings = model.warnings;

    const ReducedModel red = compute_reduced(model.spec, cfg.k_mode);
    const ClickSampler sampler(red, model.initial_state, model.initial_level, cfg.t_max,
                               cfg.solver);

    std::vector<std::vector<std::string>> rows;
    std::size_t censored = 0;
    for (std::size_t i = 0; i < cfg.n_traj; ++i) {
        const Trajectory traj = sampler.sample(cfg.seed, i, cfg.multi_click);
        if (traj.censored) {
            ++censored;
            rows.push_back({std::to_string(i), "1", "nan", "-1"});
            continue;
        }
        for (const auto& ev : traj.events) {
            rows.push_back({std::to_string(i), "0", format_g17(ev.time),
                            std::to_string(ev.to_level)});
        }
    }
    emit_table(cfg, out, "trajectories", {"seed_index", "censored", "t_click", "to_level"}, rows);
    if (censored > 0) {
        out.warnings.push_back(std::to_string(censored) + " of " + std::to_string(cfg.n_traj) +
                               " trajectories censored at t_max = " + format_g17(cfg.t_max));
    }

    const std::vector<double> grid = linspace(0.0, cfg.t_max, cfg.t_points);
    const EmpiricalSurvival est =
        estimate_survival_mc(red, model.initial_state, model.initial_level, cfg.n_traj, cfg.seed,
                             grid, cfg.solver, cfg.threads);
    const bool analytic = static_cast<bool>(model.analytic_survival);
    std::vector<std::string> header = {"t", "p_emp", "ci_halfwidth"};
    if (analytic) header.push_back("p_analytic");
    std::vector<std::vector<std::string>> mc_rows;
    for (std::size_t i = 0; i < est.times.size(); ++i) {
        std::vector<std::string> row = {format_g17(est.times[i]), format_g17(est.p_emp[i]),
                                        format_g17(est.ci_halfwidth[i])};
        if (analytic) row.push_back(format_g17(model.analytic_survival(est.times[i])));
        mc_rows.push_back(std::move(row));
    }
    emit_table(cfg, out, "survival_mc", header, mc_rows);
    dump_reduced_model(cfg, red, out);
    return out;
}

// Both solvers on a shared grid.
struct ComparisonData {
    std::vector<double> times;
    Timeline full_timeline;
    Timeline reduced_timeline;
    std::vector<Eigen::VectorXd> full;
    std::vector<Eigen::VectorXd> reduced;
    double sup_error = 0.0;
    std::vector<std::string> warnings;
};

ComparisonData compare_populations(const RunConfig& cfg, const ResolvedModel& model) {
    ComparisonData data;
    data.times = linspace(0.0, cfg.t_max, cfg.t_points);

    const BlockDensityMatrix rho0 =
        product_state(model.initial_level, model.initial_state, model.spec.levels());
    data.full_timeline = evolve_full(model.spec, rho0, data.times, cfg.solver);
    data.warnings = data.full_timeline.warnings;

    const ReducedModel red = compute_reduced(model.spec, cfg.k_mode);
    std::vector<ComplexOperator> diag0(model.spec.levels(),
                                       ComplexOperator::Zero(model.spec.dim(), model.spec.dim()));
    diag0[model.initial_level] = model.initial_state;
    data.reduced_timeline = evolve_diagonal(red, diag0, data.times, cfg.solver);
    for (const auto& w : data.reduced_timeline.warnings) data.warnings.push_back(w);

    for (std::size_t i = 0; i < data.times.size(); ++i) {
        data.full.push_back(device_populations(data.full_timeline.states[i]));
        data.reduced.push_back(device_populations(data.reduced_timeline.states[i]));
        data.sup_error = std::max(
            data.sup_error, (data.full.back() - data.reduced.back()).cwiseAbs().maxCoeff());
    }
    return data;
}

ExperimentOutput run_compare(const RunConfig& cfg) {
    ExperimentOutput out;
    ResolvedModel model = resolve_model(cfg);
    out.warnings = model.warnings;

    const ComparisonData data = compare_populations(cfg, model);
    for (const auto& w : data.warnings) out.warnings.push_back(w);

    std::vector<std::string> header = {"t"};
    for (int mu = 0; mu < model.spec.levels(); ++mu) {
        header.push_back("full_p_" + std::to_string(mu));
    }
    for (int mu = 0; mu < model.spec.levels(); ++mu) {
        header.push_back("reduced_p_" + std::to_string(mu));
    }
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < data.times.size(); ++i) {
        std::vector<std::string> row = {format_g17(data.times[i])};
        for (int mu = 0; mu < model.spec.levels(); ++mu) {
            row.push_back(format_g17(data.full[i](mu)));
        }
        for (int mu = 0; mu < model.spec.levels(); ++mu) {
            row.push_back(format_g17(data.reduced[i](mu)));
        }
        rows.push_back(std::move(row));
    }
    emit_table(cfg, out, "compare", header, rows,
               {"max_abs_error = " + format_g17(data.sup_error)});

    write_timeline_csv((fs::path(cfg.out_dir) / "full_timeline.csv").string(),
                       data.full_timeline);
    out.files.push_back("full_timeline.csv");
    write_timeline_csv((fs::path(cfg.out_dir) / "reduced_timeline.csv").string(),
                       data.reduced_timeline);
    out.files.push_back("reduced_timeline.csv");
    return out;
}

ExperimentOutput run_gamma_sweep(const RunConfig& cfg, GammaSweepResult* result_out) {
    ExperimentOutput out;
    const GammaSweepResult result = gamma_sweep(cfg);
    out.warnings = result.warnings;

    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < result.gammas.size(); ++i) {
        rows.push_back({format_g17(result.gammas[i]), format_g17(result.sup_errors[i])});
    }
    emit_table(cfg, out, "gamma_sweep", {"gamma", "sup_error"}, rows,
               {std::string("monotone_decreasing = ") +
                (result.monotone_decreasing ? "true" : "false")});
    if (!result.monotone_decreasing) {
        out.warnings.push_back("full-vs-reduced error is not monotone decreasing in gamma");
    }
    if (result_out != nullptr) *result_out = result;
    return out;
}

std::string iso_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_manifest(const RunConfig& cfg, const RunManifest& manifest) {
    nlohmann::json j;
    j["tool"] = "udsim";
    j["version"] = manifest.tool_version;
    j["experiment"] = manifest.experiment;
    j["timestamp"] = manifest.timestamp;
    j["wall_seconds"] = manifest.wall_seconds;
    if (cfg.seed_set) j["seed"] = cfg.seed;
    j["k_mode"] = cfg.k_mode == KMode::resonant ? "resonant" : "exact";
    j["outputs"] = manifest.outputs;
    j["warnings"] = manifest.warnings;
    j["config"] = cfg.config_text;

    const fs::path path = fs::path(cfg.out_dir) / "manifest.json";
    const fs::path tmp = fs::path(cfg.out_dir) / "manifest.json.tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

}  // namespace

GammaSweepResult gamma_sweep(const RunConfig& cfg) {
    if (cfg.gammas.size() < 2) {
        throw ConfigError("[experiment] gammas: need at least two dephasing rates");
    }
    for (std::size_t i = 0; i < cfg.gammas.size(); ++i) {
        if (!(cfg.gammas[i] > 0.0)) {
            throw ConfigError(
                "[experiment] gammas: all rates must be positive (ultradecoherence needs "
                "gamma > 0)");
        }
        if (i > 0 && !(cfg.gammas[i] > cfg.gammas[i - 1])) {
            throw ConfigError("[experiment] gammas: rates must ascend strictly");
        }
    }

    GammaSweepResult result;
    result.gammas = cfg.gammas;
    result.monotone_decreasing = true;
    for (std::size_t i = 0; i < cfg.gammas.size(); ++i) {
        const ResolvedModel model = resolve_model(cfg, cfg.gammas[i]);
        const ComparisonData data = compare_populations(cfg, model);
        for (const auto& w : data.warnings) result.warnings.push_back(w);
        result.sup_errors.push_back(data.sup_error);
        if (i > 0 && !(result.sup_errors[i] < result.sup_errors[i - 1])) {
            result.monotone_decreasing = false;
        }
    }
    return result;
}

RunManifest run(const RunConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();

    RunManifest manifest;
    manifest.experiment = cfg.experiment;
    manifest.tool_version = kToolVersion;
    manifest.timestamp = iso_timestamp();

    fs::create_directories(cfg.out_dir);

    ExperimentOutput out;
    if (cfg.experiment == "survival") {
        out = run_survival(cfg, false);
    } else if (cfg.experiment == "arrival") {
        out = run_survival(cfg, true);
    } else if (cfg.experiment == "firststep") {
        out = run_firststep(cfg);
    } else if (cfg.experiment == "trajectories") {
        out = run_trajectories(cfg);
    } else if (cfg.experiment == "compare") {
        out = run_compare(cfg);
    } else if (cfg.experiment == "gamma-sweep") {
        out = run_gamma_sweep(cfg, nullptr);
    } else {
        throw ConfigError("experiment: unknown experiment '" + cfg.experiment + "'");
    }

    manifest.outputs = out.files;
    manifest.warnings = out.warnings;
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    write_manifest(cfg, manifest);
    manifest.outputs.push_back("manifest.json");
    return manifest;
}

}  // namespace ultradec
