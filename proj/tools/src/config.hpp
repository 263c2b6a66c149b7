#pragma once

// Run configuration: a single JSON document, overridable field by field
// from the command line. Every run writes the fully resolved config back
// out as a manifest so reruns are bitwise reproducible.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "drflow/cdr_flow.hpp"
#include "drflow/dr_discrete.hpp"

namespace drflow::cli {

struct RunConfig {
    // model
    double a = 1.0;       // continuous jump rate
    double alpha = 1.0;   // discrete renewal rate
    std::vector<double> q{1.0};
    std::string initial_kind = "dirac";  // dirac | two_atom | exponential | lattice
    double p = 0.0;
    double x0 = 2.0;
    double lambda = 1.0;
    std::vector<double> lattice_weights;

    // grid
    double h = 1.0 / 256.0;
    double x_max = 16.0;
    double T = 1.0;
    int steps = 20;  // discrete horizon

    // scaling
    std::vector<std::size_t> k_list{16, 64, 256};
    std::vector<double> t_list{0.5, 1.0};

    // monte carlo
    std::size_t n_paths = 100000;
    std::uint64_t seed = 20240521;
    bool event_log = false;

    // phase scan
    std::vector<double> p_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double epsilon_f = 1e-4;
    double bracket_tol = 1e-3;

    // cdr / semigroup
    std::vector<double> check_times;  // defaults to {T/2, T}
    int picard_iters = 12;
    std::size_t start_sites = 64;

    // engine
    std::string out = "out";
    std::size_t workers = 0;
    std::size_t support_cap = 4096;

    InitialMeasureSpec initial_spec() const;
    DiscreteModel discrete_model() const;
    CdrModel cdr_model() const;
    std::vector<double> resolved_check_times() const;

    /// Re-validates the cross-module constraints (h divides 1, k
    /// alignment, a*Delta <= 1, ...). Throws grid_error on violation.
    void validate() const;

    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::ordered_json& j);
};

/// Loads the config file (when given), then applies CLI overrides.
RunConfig load_config(const std::string& config_path);

/// Writes the resolved config, the command and the tool version.
void write_manifest(const RunConfig& config, const std::string& command,
                    const std::filesystem::path& out_dir);

} // namespace drflow::cli
