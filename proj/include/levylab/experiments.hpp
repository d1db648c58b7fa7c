#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "levylab/bsde.hpp"
#include "levylab/model.hpp"

namespace levylab {

// configuration error carrying field-level diagnostics
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::vector<std::string>& issues);
    std::vector<std::string> issues;
};

// One experiment: model, net, generator, terminal condition, experiment kind
// and kind-specific knobs. Everything numeric lives in the JSON config; the
// single seed drives all randomness.
struct ExperimentConfig {
    std::string name = "custom";
    std::string kind;  // solve | regularity | suffcond | rates | chaos-checks |
                       // counterexample | oracle-validate
    std::uint64_t seed = 0;
    std::size_t n_paths = 20000;
    unsigned threads = 0;

    LevyModel model{0.0, 1.0, {{1.0, 2.0}}, 1.0};
    std::size_t net_steps = 64;
    std::vector<double> coarse;  // empty = {0, T}

    std::string generator_id = "zero";  // zero | constant | affine
    double gen_a = 0.0;                 // y coefficient
    double gen_b = 0.0;                 // zbar coefficient
    double gen_c = 0.0;                 // constant
    std::vector<double> kappa_prime;    // empty = all ones

    std::string terminal_id = "x_t";
    double strike = 0.0;
    double power = 0.5;
    double cap = 10.0;
    double at_time = -1.0;
    nlohmann::json terminal_kernel;  // optional kernel-form terminal

    int basis_degree = 3;
    std::string basis_vars = "x";  // x | components

    nlohmann::json params;  // kind-specific

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    TimeNet make_net() const;
    Generator make_generator(const MarkMeasure& marks) const;
    TerminalCondition make_terminal_condition() const;
    SolverOptions make_solver_options() const;
};

struct RunResult {
    bool ok = true;
    std::vector<std::string> failures;  // failed in-run checks, if any
    std::string summary;
    std::vector<std::string> output_files;  // relative to out_dir
};

// Runs the experiment and writes results/*.csv, summary.txt and
// manifest.json under out_dir. Identical config + seed reproduce the result
// files byte for byte, independent of the thread count.
RunResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                         bool verbose = false);

} // namespace levylab
