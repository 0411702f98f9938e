// config.hpp — The run configuration format: flat key = value text grouped in
// sections, one file per run. Complex numbers are written as [re, im] pairs,
// matrices as rows of entries separated by ';'.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ultradec/core.hpp"
#include "ultradec/integrate.hpp"
#include "ultradec/reduction.hpp"

namespace ultradec {

// A problem with the configuration; the CLI maps this to exit code 1 and the
// message names the offending field.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Raw section/key/value storage with typed, field-naming accessors.
class ConfigMap {
  public:
    static ConfigMap parse(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::vector<std::string> keys(const std::string& section) const;

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    std::uint64_t get_uint64(const std::string& section, const std::string& key,
                             std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_real_list(const std::string& section, const std::string& key) const;
    std::vector<Complex> get_complex_list(const std::string& section,
                                          const std::string& key) const;
    ComplexOperator get_matrix(const std::string& section, const std::string& key) const;

    void set(const std::string& section, const std::string& key, std::string value);

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct RunConfig {
    std::string experiment;  // filled in by the CLI subcommand
    std::string model_name;

    IntegratorConfig solver;
    KMode k_mode = KMode::resonant;

    bool seed_set = false;
    std::uint64_t seed = 0;
    std::size_t n_traj = 10000;
    double t_max = 10.0;
    int t_points = 201;
    std::vector<double> gammas;
    double escape_cutoff = 1e-6;

    std::string out_dir = "out";
    int threads = 1;
    bool emit_plot_data = false;
    bool multi_click = false;
    bool dump_reduced = false;

    ConfigMap raw;            // model parameters are read lazily from here
    std::string config_text;  // verbatim echo for the manifest
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Annotated configuration with every default spelled out.
std::string default_config_text();

// Serialise a spec as a custom [model] section; parsing the result recovers
// the spec exactly (17 significant digits per number).
std::string model_spec_to_config(const ModelSpec& spec);
ModelSpec model_spec_from_config(const ConfigMap& cfg, const std::string& section = "model");

}  // namespace ultradec
