#include "ultradec/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "ultradec/csv.hpp"

namespace ultradec {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string field_name(const std::string& section, const std::string& key) {
    return "[" + section + "] " + key;
}

double parse_real(const std::string& token, const std::string& field) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(token, &pos);
        if (pos != token.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(field + ": expected a real number, got '" + token + "'");
    }
}

Complex parse_complex(const std::string& token, const std::string& field) {
    if (token.empty()) throw ConfigError(field + ": empty entry");
    if (token.front() != '[') return Complex(parse_real(token, field), 0.0);
    if (token.back() != ']') {
        throw ConfigError(field + ": unterminated complex entry '" + token + "'");
    }
    const std::string inner = token.substr(1, token.size() - 2);
    const std::size_t comma = inner.find(',');
    if (comma == std::string::npos) {
        throw ConfigError(field + ": complex entries are [re, im] pairs, got '" + token + "'");
    }
    return Complex(parse_real(trim(inner.substr(0, comma)), field),
                   parse_real(trim(inner.substr(comma + 1)), field));
}

struct Token {
    std::string text;
    bool row_break = false;
};

std::vector<Token> tokenize_entries(const std::string& value, const std::string& field) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < value.size()) {
        const char c = value[i];
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            ++i;
        } else if (c == ';') {
            tokens.push_back({";", true});
            ++i;
        } else if (c == '[') {
            const std::size_t close = value.find(']', i);
            if (close == std::string::npos) {
                throw ConfigError(field + ": unterminated '[' in '" + value + "'");
            }
            tokens.push_back({value.substr(i, close - i + 1), false});
            i = close + 1;
        } else {
            std::size_t j = i;
            while (j < value.size() && !std::isspace(static_cast<unsigned char>(value[j])) &&
                   value[j] != ',' && value[j] != ';') {
                ++j;
            }
            tokens.push_back({value.substr(i, j - i), false});
            i = j;
        }
    }
    return tokens;
}

}  // namespace

// --------------------------------- ConfigMap ---------------------------------

ConfigMap ConfigMap::parse(const std::string& text) {
    ConfigMap cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": missing key");
        }
        if (section.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": key '" + key + "' appears before any [section]");
        }
        cfg.sections_[section][key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

bool ConfigMap::has(const std::string& section, const std::string& key) const {
    const auto sit = sections_.find(section);
    return sit != sections_.end() && sit->second.count(key) > 0;
}

std::vector<std::string> ConfigMap::keys(const std::string& section) const {
    std::vector<std::string> out;
    const auto sit = sections_.find(section);
    if (sit == sections_.end()) return out;
    for (const auto& kv : sit->second) out.push_back(kv.first);
    return out;
}

std::string ConfigMap::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
    const auto sit = sections_.find(section);
    if (sit == sections_.end()) return fallback;
    const auto kit = sit->second.find(key);
    return kit == sit->second.end() ? fallback : kit->second;
}

double ConfigMap::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
    if (!has(section, key)) return fallback;
    return parse_real(get_string(section, key, ""), field_name(section, key));
}

int ConfigMap::get_int(const std::string& section, const std::string& key, int fallback) const {
    if (!has(section, key)) return fallback;
    const std::string raw = get_string(section, key, "");
    try {
        std::size_t pos = 0;
        const long v = std::stol(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument("trailing characters");
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ConfigError(field_name(section, key) + ": expected an integer, got '" + raw + "'");
    }
}

std::uint64_t ConfigMap::get_uint64(const std::string& section, const std::string& key,
                                    std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string raw = get_string(section, key, "");
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(field_name(section, key) + ": expected an unsigned integer, got '" +
                          raw + "'");
    }
}

bool ConfigMap::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string raw = get_string(section, key, "");
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    throw ConfigError(field_name(section, key) + ": expected a boolean, got '" + raw + "'");
}

std::vector<double> ConfigMap::get_real_list(const std::string& section,
                                             const std::string& key) const {
    const std::string field = field_name(section, key);
    std::vector<double> out;
    for (const Token& tok : tokenize_entries(get_string(section, key, ""), field)) {
        if (tok.row_break) throw ConfigError(field + ": ';' not allowed in a flat list");
        out.push_back(parse_real(tok.text, field));
    }
    return out;
}

std::vector<Complex> ConfigMap::get_complex_list(const std::string& section,
                                                 const std::string& key) const {
    const std::string field = field_name(section, key);
    std::vector<Complex> out;
    for (const Token& tok : tokenize_entries(get_string(section, key, ""), field)) {
        if (tok.row_break) throw ConfigError(field + ": ';' not allowed in a flat list");
        out.push_back(parse_complex(tok.text, field));
    }
    return out;
}

ComplexOperator ConfigMap::get_matrix(const std::string& section, const std::string& key) const {
    const std::string field = field_name(section, key);
    std::vector<std::vector<Complex>> rows(1);
    for (const Token& tok : tokenize_entries(get_string(section, key, ""), field)) {
        if (tok.row_break) {
            rows.emplace_back();
        } else {
            rows.back().push_back(parse_complex(tok.text, field));
        }
    }
    while (!rows.empty() && rows.back().empty()) rows.pop_back();
    if (rows.empty()) throw ConfigError(field + ": empty matrix");
    const std::size_t cols = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != cols) throw ConfigError(field + ": ragged matrix rows");
    }
    ComplexOperator m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i),
                                                 static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void ConfigMap::set(const std::string& section, const std::string& key, std::string value) {
    sections_[section][key] = std::move(value);
}

// --------------------------------- RunConfig ---------------------------------

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    cfg.config_text = text;
    cfg.raw = ConfigMap::parse(text);

    cfg.model_name = cfg.raw.get_string("model", "name", "");
    if (cfg.model_name.empty()) {
        throw ConfigError("[model] name: required (von-neumann | photon-detector | two-site | custom)");
    }

    const std::string method = cfg.raw.get_string("solver", "method", "rk45");
    if (method == "rk45") {
        cfg.solver.method = StepMethod::rk45;
    } else if (method == "rk4") {
        cfg.solver.method = StepMethod::rk4;
    } else {
        throw ConfigError("[solver] method: expected rk45 or rk4, got '" + method + "'");
    }
    cfg.solver.rel_tol = cfg.raw.get_double("solver", "rel_tol", cfg.solver.rel_tol);
    cfg.solver.abs_tol = cfg.raw.get_double("solver", "abs_tol", cfg.solver.abs_tol);
    cfg.solver.max_step = cfg.raw.get_double("solver", "max_step", cfg.solver.max_step);
    if (!(cfg.solver.rel_tol > 0.0)) throw ConfigError("[solver] rel_tol: must be positive");
    if (!(cfg.solver.abs_tol > 0.0)) throw ConfigError("[solver] abs_tol: must be positive");
    if (!(cfg.solver.max_step > 0.0)) throw ConfigError("[solver] max_step: must be positive");
    if (cfg.solver.method == StepMethod::rk4 && !std::isfinite(cfg.solver.max_step)) {
        throw ConfigError("[solver] max_step: the rk4 method needs a finite step");
    }

    cfg.t_max = cfg.raw.get_double("experiment", "t_max", cfg.t_max);
    if (!(cfg.t_max > 0.0)) throw ConfigError("[experiment] t_max: must be positive");
    cfg.t_points = cfg.raw.get_int("experiment", "t_points", cfg.t_points);
    if (cfg.t_points < 2) throw ConfigError("[experiment] t_points: need at least 2");
    const int n_traj = cfg.raw.get_int("experiment", "n_traj", static_cast<int>(cfg.n_traj));
    if (n_traj < 1) throw ConfigError("[experiment] n_traj: must be at least 1");
    cfg.n_traj = static_cast<std::size_t>(n_traj);
    if (cfg.raw.has("experiment", "gammas")) {
        cfg.gammas = cfg.raw.get_real_list("experiment", "gammas");
    }
    cfg.escape_cutoff = cfg.raw.get_double("experiment", "escape_cutoff", cfg.escape_cutoff);
    if (!(cfg.escape_cutoff > 0.0)) throw ConfigError("[experiment] escape_cutoff: must be positive");

    cfg.seed_set = cfg.raw.has("run", "seed");
    cfg.seed = cfg.raw.get_uint64("run", "seed", 0);
    const std::string k_mode = cfg.raw.get_string("run", "k_mode", "resonant");
    if (k_mode == "resonant") {
        cfg.k_mode = KMode::resonant;
    } else if (k_mode == "exact") {
        cfg.k_mode = KMode::exact;
    } else {
        throw ConfigError("[run] k_mode: expected resonant or exact, got '" + k_mode + "'");
    }
    cfg.out_dir = cfg.raw.get_string("run", "out_dir", cfg.out_dir);
    cfg.threads = cfg.raw.get_int("run", "threads", cfg.threads);
    if (cfg.threads < 1) throw ConfigError("[run] threads: must be at least 1");
    cfg.emit_plot_data = cfg.raw.get_bool("run", "emit_plot_data", cfg.emit_plot_data);
    cfg.multi_click = cfg.raw.get_bool("run", "multi_click", cfg.multi_click);
    cfg.dump_reduced = cfg.raw.get_bool("run", "dump_reduced", cfg.dump_reduced);

    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string default_config_text() {
    return R"(# udsim run configuration (defaults)

[model]
name = von-neumann          # von-neumann | photon-detector | two-site | custom
# von-neumann
outcomes = 2
coupling = 1.0
dephasing = 100.0
# state = [0.6, 0] [0.8, 0]       # amplitudes over the probe basis (default: uniform)
# probe_basis = [1,0] [0,0] ; [0,0] [1,0]   # columns are probed states (default: computational)
# photon-detector extras: transition_energy = 1.0, fock_cutoff = 20, field = fock:0|coherent:1.0
# two-site extras: hopping = 1.0, initial_site = L
# custom: energies, dephasing_rates, hamiltonian, V_<mu>_<nu> matrices, state or initial_density

[experiment]
t_max = 10.0
t_points = 201
n_traj = 10000
gammas = 50, 100, 200, 400, 800   # gamma-sweep only, ascending and positive
escape_cutoff = 1e-6

[solver]
method = rk45               # rk45 | rk4 (rk4 steps with max_step)
rel_tol = 1e-8
abs_tol = 1e-12
max_step = inf

[run]
seed = 1                    # required for trajectories
k_mode = resonant           # resonant | exact
out_dir = out
threads = 1
emit_plot_data = false
multi_click = false
dump_reduced = false
)";
}

// --------------------------- spec (de)serialisation ---------------------------

namespace {

std::string complex_entry(const Complex& z) {
    return "[" + format_g17(z.real()) + ", " + format_g17(z.imag()) + "]";
}

std::string matrix_value(const ComplexOperator& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i > 0) out += " ; ";
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out += ", ";
            out += complex_entry(m(i, j));
        }
    }
    return out;
}

std::string real_list_value(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_g17(v(i));
    }
    return out;
}

}  // namespace

std::string model_spec_to_config(const ModelSpec& spec) {
    std::ostringstream out;
    out << "[model]\n";
    out << "name = custom\n";
    out << "energies = " << real_list_value(spec.device.energies) << "\n";
    out << "dephasing_rates = " << real_list_value(spec.device.dephasing_rates) << "\n";
    out << "hamiltonian = " << matrix_value(spec.system.hamiltonian) << "\n";
    for (const auto& kv : spec.coupling.stored()) {
        out << "V_" << kv.first.first << "_" << kv.first.second << " = "
            << matrix_value(kv.second) << "\n";
    }
    return out.str();
}

ModelSpec model_spec_from_config(const ConfigMap& cfg, const std::string& section) {
    ModelSpec spec;

    if (!cfg.has(section, "energies")) {
        throw ConfigError(field_name(section, "energies") + ": required for custom models");
    }
    if (!cfg.has(section, "dephasing_rates")) {
        throw ConfigError(field_name(section, "dephasing_rates") + ": required for custom models");
    }
    if (!cfg.has(section, "hamiltonian")) {
        throw ConfigError(field_name(section, "hamiltonian") + ": required for custom models");
    }

    const std::vector<double> energies = cfg.get_real_list(section, "energies");
    const std::vector<double> rates = cfg.get_real_list(section, "dephasing_rates");
    if (energies.size() != rates.size()) {
        throw ConfigError(field_name(section, "dephasing_rates") + ": expected " +
                          std::to_string(energies.size()) + " entries to match energies");
    }
    spec.device.energies = Eigen::Map<const Eigen::VectorXd>(energies.data(),
                                                             static_cast<Eigen::Index>(energies.size()));
    spec.device.dephasing_rates =
        Eigen::Map<const Eigen::VectorXd>(rates.data(), static_cast<Eigen::Index>(rates.size()));

    spec.system.hamiltonian = cfg.get_matrix(section, "hamiltonian");
    spec.system.dim = static_cast<int>(spec.system.hamiltonian.rows());

    for (const std::string& key : cfg.keys(section)) {
        if (key.rfind("V_", 0) != 0) continue;
        const std::size_t sep = key.find('_', 2);
        if (sep == std::string::npos) {
            throw ConfigError(field_name(section, key) + ": coupling keys look like V_<mu>_<nu>");
        }
        int mu = 0, nu = 0;
        try {
            mu = std::stoi(key.substr(2, sep - 2));
            nu = std::stoi(key.substr(sep + 1));
        } catch (const std::exception&) {
            throw ConfigError(field_name(section, key) + ": coupling keys look like V_<mu>_<nu>");
        }
        spec.coupling.set(mu, nu, cfg.get_matrix(section, key));
    }

    return spec;
}

}  // namespace ultradec
