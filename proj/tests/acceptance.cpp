// Acceptance suite: runs the shipped scenarios end to end and prints one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "levylab/experiments.hpp"
#include "levylab/io.hpp"
#include "levylab/parallel.hpp"
#include "levylab/scenarios.hpp"

namespace fs = std::filesystem;
using levylab::ExperimentConfig;
using levylab::RunResult;

namespace {

struct Criterion {
    int id;
    std::string label;
    bool passed;
    double seconds;
    std::string detail;
};

std::vector<Criterion> g_results;

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string out_dir_for(const std::string& tag) {
    const std::string dir = "acceptance_out/" + tag;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void record(int id, const std::string& label, bool passed, double seconds,
            const std::string& detail) {
    g_results.push_back({id, label, passed, seconds, detail});
    std::printf("[%2d] %s  %-58s (%.1f s)%s%s\n", id, passed ? "PASS" : "FAIL", label.c_str(),
                seconds, detail.empty() ? "" : "  ", detail.c_str());
    std::fflush(stdout);
}

// run a scenario; the pass verdict is the conjunction of its internal checks
void run_scenario_criterion(int id, const std::string& label, const std::string& scenario,
                            double time_limit_s = 0.0) {
    const double start = now_seconds();
    bool passed = false;
    std::string detail;
    try {
        const ExperimentConfig cfg = levylab::scenario_config(scenario);
        const RunResult res = levylab::run_experiment(cfg, out_dir_for(scenario));
        passed = res.ok;
        if (!res.ok) detail = res.failures.front();
    } catch (const std::exception& e) {
        detail = e.what();
    }
    const double elapsed = now_seconds() - start;
    if (passed && time_limit_s > 0.0 && elapsed > time_limit_s) {
        passed = false;
        detail = "time limit " + std::to_string(time_limit_s) + " s exceeded";
    }
    record(id, label, passed, elapsed, detail);
}

void run_determinism_criterion(int id) {
    const double start = now_seconds();
    bool passed = false;
    std::string detail;
    try {
        const ExperimentConfig cfg = levylab::scenario_config("determinism_probe");
        const std::string dir1 = out_dir_for("determinism_t1");
        const std::string dir8 = out_dir_for("determinism_t8");
        levylab::set_thread_count(1);
        const RunResult r1 = levylab::run_experiment(cfg, dir1);
        levylab::set_thread_count(8);
        const RunResult r8 = levylab::run_experiment(cfg, dir8);
        levylab::set_thread_count(0);
        passed = r1.ok && r8.ok;
        for (const auto& f : r1.output_files) {
            if (f == "manifest.json") continue;
            const std::string a = levylab::read_file(dir1 + "/" + f);
            const std::string b = levylab::read_file(dir8 + "/" + f);
            if (a != b) {
                passed = false;
                detail = f + " differs between 1 and 8 threads";
                break;
            }
        }
        if (passed) {
            // a second identical run reproduces the bytes as well
            const std::string dir_again = out_dir_for("determinism_rerun");
            levylab::run_experiment(cfg, dir_again);
            for (const auto& f : r1.output_files) {
                const std::string a = levylab::read_file(dir1 + "/" + f);
                const std::string b = levylab::read_file(dir_again + "/" + f);
                if (a != b) {
                    passed = false;
                    detail = f + " differs between reruns";
                    break;
                }
            }
        }
    } catch (const std::exception& e) {
        detail = e.what();
    }
    record(id, "byte-identical results across reruns and thread counts", passed,
           now_seconds() - start, detail);
}

} // namespace

int main() {
    std::printf("acceptance suite\n================\n");
    const double start = now_seconds();

    run_scenario_criterion(1, "exact chaos algebra: smoothness inequalities on 100 sets",
                           "chaos_lemma_bounds", 60.0);
    run_scenario_criterion(2, "two-sided derivative/resampling-ratio bounds",
                           "chaos_ratio_bounds");
    run_scenario_criterion(3, "resampling identity, symbolic and coupled-path MC",
                           "resampling_identity");
    run_scenario_criterion(4, "counterexample: series band and weighted bound",
                           "counterexample");
    run_scenario_criterion(5, "oracle equivalence and chaos structure flags",
                           "oracle_equivalence");
    run_scenario_criterion(6, "malliavin consistency: diagonal Z, quotients, clark-ocone",
                           "malliavin_consistency");
    run_scenario_criterion(7, "Lipschitz rate experiment, slope in [0.35, 0.65]",
                           "lipschitz_rates", 600.0);
    run_scenario_criterion(8, "regularity exponents coherent across conditions",
                           "theta_coherence");
    run_scenario_criterion(9, "resampling exponent implies projection exponent",
                           "suffcond_nonlipschitz");
    run_determinism_criterion(10);

    std::size_t passed = 0;
    for (const auto& c : g_results)
        if (c.passed) ++passed;
    std::printf("================\n%zu/%zu criteria passed (%.1f s total)\n", passed,
                g_results.size(), now_seconds() - start);
    return passed == g_results.size() ? 0 : 1;
}
