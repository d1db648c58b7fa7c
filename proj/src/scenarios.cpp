#include "levylab/scenarios.hpp"

#include <stdexcept>

namespace levylab {

using nlohmann::json;

namespace {

json base_model() {
    return {{"gamma", 0.0}, {"sigma", 1.0}, {"jump_atoms", {{1.0, 2.0}}}, {"horizon", 1.0}};
}

json two_atom_model() {
    return {{"gamma", 0.0},
            {"sigma", 1.0},
            {"jump_atoms", {{1.0, 2.0}, {-0.5, 1.0}}},
            {"horizon", 1.0}};
}

json scenario_json(const std::string& name) {
    if (name == "chaos_lemma_bounds") {
        return {{"name", name},
                {"kind", "chaos-checks"},
                {"seed", 20250801},
                {"model", two_atom_model()},
                {"net", {{"n_steps", 16}, {"coarse_partition", {0.0, 0.4, 1.0}}}},
                {"params",
                 {{"checks", {"lemmas"}}, {"n_sets", 100}, {"max_level", 4},
                  {"entries_per_level", 6}}}};
    }
    if (name == "chaos_ratio_bounds") {
        return {{"name", name},
                {"kind", "chaos-checks"},
                {"seed", 20250802},
                {"model", two_atom_model()},
                {"net", {{"n_steps", 16}, {"coarse_partition", {0.0, 0.4, 1.0}}}},
                {"params",
                 {{"checks", {"ratio"}}, {"n_sets", 100}, {"max_level", 4},
                  {"entries_per_level", 6}}}};
    }
    if (name == "resampling_identity") {
        return {{"name", name},
                {"kind", "chaos-checks"},
                {"seed", 20250803},
                {"n_paths", 100000},
                {"model", base_model()},
                {"net", {{"n_steps", 32}, {"coarse_partition", {0.0, 0.4, 1.0}}}},
                {"params",
                 {{"checks", {"resampling"}}, {"n_sets", 100}, {"max_level", 4},
                  {"entries_per_level", 6}}}};
    }
    if (name == "counterexample") {
        return {{"name", name},
                {"kind", "counterexample"},
                {"seed", 20250804},
                {"params", {{"n_vectors", 1000}, {"truncation", 500000}}}};
    }
    if (name == "oracle_equivalence") {
        return {{"name", name},
                {"kind", "oracle-validate"},
                {"seed", 20250805},
                {"n_paths", 100000},
                {"model", base_model()},
                {"terminal", {{"id", "call"}, {"strike", 0.0}}},
                {"basis", {{"degree", 3}}},
                {"params", {{"tree_steps", 6}, {"batches", 16}}}};
    }
    if (name == "malliavin_consistency") {
        return {{"name", name},
                {"kind", "solve"},
                {"seed", 20250806},
                {"n_paths", 96000},
                {"model", base_model()},
                {"net", {{"n_steps", 64}}},
                {"generator", {{"id", "affine"}, {"a", -1.0}}},
                {"terminal", {{"id", "x_t"}}},
                {"basis", {{"degree", 2}}},
                {"params", {{"malliavin", true}, {"batches", 24}}}};
    }
    if (name == "lipschitz_rates") {
        return {{"name", name},
                {"kind", "rates"},
                {"seed", 20250807},
                {"n_paths", 12000},
                {"model", base_model()},
                {"terminal", {{"id", "call"}, {"strike", 0.0}}},
                {"basis", {{"degree", 3}}},
                {"params",
                 {{"coarse_steps", {4, 8, 16, 32}}, {"ref_steps", 256},
                  {"slope_low", 0.35}, {"slope_high", 0.65}}}};
    }
    if (name == "theta_coherence") {
        return {{"name", name},
                {"kind", "regularity"},
                {"seed", 20250808},
                {"n_paths", 100000},
                {"model", base_model()},
                {"net", {{"n_steps", 64}}},
                {"terminal", {{"id", "x_t"}}},
                {"basis", {{"degree", 2}}},
                {"params",
                 {{"k", 0}, {"n_grid", 12}, {"theta_tol", 0.15}, {"theta_low", 0.85},
                  {"theta_high", 1.0}}}};
    }
    if (name == "suffcond_nonlipschitz") {
        return {{"name", name},
                {"kind", "suffcond"},
                {"seed", 20250809},
                {"n_paths", 100000},
                {"model", base_model()},
                {"net", {{"n_steps", 32}}},
                {"terminal",
                 {{"id", "abs_pow_bounded"}, {"power", 0.5}, {"cap", 10.0}, {"at_time", 1.0}}},
                {"basis", {{"degree", 5}}},
                {"params", {{"k", 0}, {"n_grid", 10}, {"theta_tol", 0.15}}}};
    }
    if (name == "determinism_probe") {
        return {{"name", name},
                {"kind", "solve"},
                {"seed", 20250810},
                {"n_paths", 20000},
                {"model", base_model()},
                {"net", {{"n_steps", 32}}},
                {"generator", {{"id", "affine"}, {"a", -1.0}}},
                {"terminal", {{"id", "call"}, {"strike", 0.0}}},
                {"basis", {{"degree", 3}}},
                {"params", {{"export_paths", 64}}}};
    }
    if (name == "picard_contraction") {
        return {{"name", name},
                {"kind", "solve"},
                {"seed", 20250811},
                {"n_paths", 40000},
                {"model", base_model()},
                {"net", {{"n_steps", 32}}},
                {"generator", {{"id", "affine"}, {"a", -1.0}}},
                {"terminal", {{"id", "x_t"}}},
                {"basis", {{"degree", 2}}},
                {"params", {{"picard", 8}}}};
    }
    if (name == "stability_scaling") {
        return {{"name", name},
                {"kind", "solve"},
                {"seed", 20250812},
                {"n_paths", 40000},
                {"model", base_model()},
                {"net", {{"n_steps", 32}}},
                {"generator", {{"id", "affine"}, {"a", -1.0}}},
                {"terminal", {{"id", "x_t"}}},
                {"basis", {{"degree", 2}}},
                {"params", {{"stability_eps", 0.1}}}};
    }
    if (name == "suffcond_coupling") {
        return {{"name", name},
                {"kind", "suffcond"},
                {"seed", 20250813},
                {"n_paths", 80000},
                {"model", base_model()},
                {"net", {{"n_steps", 32}}},
                {"terminal", {{"id", "x_t"}}},
                {"basis", {{"degree", 2}}},
                {"params",
                 {{"k", 0}, {"n_grid", 10}, {"theta_tol", 0.15}, {"coupling_check", true}}}};
    }
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

} // namespace

const std::vector<Scenario>& scenario_catalog() {
    static const std::vector<Scenario> catalog = {
        {"chaos_lemma_bounds", "chaos-checks",
         "derivative-smoothness inequalities on 100 random kernel sets"},
        {"chaos_ratio_bounds", "chaos-checks",
         "two-sided derivative/resampling-ratio bounds with grid refinement"},
        {"resampling_identity", "chaos-checks",
         "exact resampling identity plus coupled-path Monte Carlo distances"},
        {"counterexample", "counterexample",
         "series vs asymptotic table and the weighted-difference bound"},
        {"oracle_equivalence", "oracle-validate",
         "LSMC against the exact tree, Parseval, chaos structure flags"},
        {"malliavin_consistency", "solve",
         "derivative-diagonal Z against regression Zbar, Clark-Ocone residual"},
        {"lipschitz_rates", "rates",
         "discretization error of max(X_T, 0) on equidistant nets vs a fine reference"},
        {"theta_coherence", "regularity",
         "fitted exponents of the four regularity conditions on the terminal-value scenario"},
        {"suffcond_nonlipschitz", "suffcond",
         "resampling exponent implies the projection exponent for a non-Lipschitz terminal"},
        {"determinism_probe", "solve",
         "small solver run exercising all outputs, used for byte-identity checks"},
        {"picard_contraction", "solve", "iteration gaps of the fixed-point mode"},
        {"stability_scaling", "solve", "solution gap scales quadratically in a terminal shift"},
        {"suffcond_coupling", "suffcond",
         "coupled resampling doubles the projection distance for measurable terminals"},
    };
    return catalog;
}

ExperimentConfig scenario_config(const std::string& name) {
    return ExperimentConfig::from_json(scenario_json(name));
}

} // namespace levylab
