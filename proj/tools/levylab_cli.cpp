// Experiment runner: config-driven studies of Levy-driven backward equations,
// their chaos algebra and regularity estimates.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "levylab/experiments.hpp"
#include "levylab/io.hpp"
#include "levylab/parallel.hpp"
#include "levylab/scenarios.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitParse = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitChecksFailed = 4;

nlohmann::json parse_config_file(const std::string& path) {
    const std::string text = levylab::read_file(path);
    return nlohmann::json::parse(text);  // throws with byte position on malformed input
}

int cmd_run(const std::string& config_path, const std::string& out_dir, unsigned threads,
            bool verbose) {
    nlohmann::json j;
    try {
        j = parse_config_file(config_path);
    } catch (const nlohmann::json::parse_error& e) {
        std::fprintf(stderr, "error: malformed JSON in %s: %s\n", config_path.c_str(), e.what());
        return kExitParse;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitParse;
    }
    levylab::ExperimentConfig config;
    try {
        config = levylab::ExperimentConfig::from_json(j);
    } catch (const levylab::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    if (threads != 0) levylab::set_thread_count(threads);
    try {
        const levylab::RunResult res = levylab::run_experiment(config, out_dir, verbose);
        std::fprintf(stdout, "%s", res.summary.c_str());
        if (!res.ok) {
            std::fprintf(stderr, "error: %zu experiment check(s) failed\n", res.failures.size());
            return kExitChecksFailed;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
}

int cmd_validate(const std::string& config_path) {
    nlohmann::json j;
    try {
        j = parse_config_file(config_path);
    } catch (const nlohmann::json::parse_error& e) {
        std::fprintf(stderr, "error: malformed JSON in %s: %s\n", config_path.c_str(), e.what());
        return kExitParse;
    }
    try {
        (void)levylab::ExperimentConfig::from_json(j);
    } catch (const levylab::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfig;
    }
    std::fprintf(stdout, "config OK\n");
    return kExitOk;
}

int cmd_list(const std::string& kind_filter, const std::string& write_dir) {
    for (const auto& s : levylab::scenario_catalog()) {
        if (!kind_filter.empty() && s.kind != kind_filter) continue;
        std::fprintf(stdout, "%-24s %-16s %s\n", s.name.c_str(), s.kind.c_str(),
                     s.description.c_str());
        if (!write_dir.empty()) {
            const auto config = levylab::scenario_config(s.name);
            levylab::write_file(write_dir + "/" + s.name + ".json",
                                config.to_json().dump(2) + "\n");
        }
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"levylab: a numerical laboratory for Levy-driven BSDEs"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", kind_filter, write_dir;
    unsigned threads = 0;
    bool verbose = false;

    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--threads", threads, "worker threads (0 = hardware)");
    run->add_flag("--verbose", verbose, "echo the summary to stderr");

    auto* list = app.add_subcommand("list-scenarios", "list built-in scenarios");
    list->add_option("--kind", kind_filter, "filter by experiment kind");
    list->add_option("--write", write_dir, "write scenario configs into a directory");

    auto* validate = app.add_subcommand("validate", "validate a config file");
    validate->add_option("config", config_path, "config file")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, out_dir, threads, verbose);
    if (list->parsed()) return cmd_list(kind_filter, write_dir);
    if (validate->parsed()) return cmd_validate(config_path);
    return kExitOk;
}
