#pragma once

#include <optional>
#include <vector>

#include "levylab/generator.hpp"
#include "levylab/paths.hpp"
#include "levylab/regression.hpp"
#include "levylab/terminal.hpp"

namespace levylab {

struct SolverOptions {
    RegressionSpec basis;
    int max_fixed_point = 50;
    double fixed_point_tol = 1e-12;
    bool z_per_atom = false;
    // when set, a rank-deficient per-atom Z regression marks the step NaN
    // (an excluded null set) instead of aborting the solve
    bool allow_z_atom_failure = false;
};

struct StepDiagnostics {
    double condition_y = 0.0;
    double condition_z = 0.0;
    std::size_t basis_size = 0;
    double fixed_point_residual = 0.0;
    bool z_atom_excluded = false;
};

// Backward-regression solution: Y at every net point, Zbar on every
// interval, optionally Z per mark atom.
struct BsdeSolution {
    std::size_t n_paths = 0;
    std::size_t n_points = 0;  // net points
    std::vector<double> y;     // path-major, n_paths x n_points
    std::vector<double> z_bar; // path-major, n_paths x (n_points-1)
    std::vector<std::vector<double>> z_atom;  // [atom][path-major]
    std::vector<StepDiagnostics> diagnostics; // per interval

    double y_at(std::size_t path, std::size_t i) const { return y[path * n_points + i]; }
    double z_bar_at(std::size_t path, std::size_t i) const {
        return z_bar[path * (n_points - 1) + i];
    }
    double z_atom_at(std::size_t atom, std::size_t path, std::size_t i) const {
        return z_atom[atom][path * (n_points - 1) + i];
    }

    // E sup_t |Y_t|^2 sample estimate
    double s_norm_sq(const TimeNet& net) const;
    // sum_i dt_i * E|Zbar_i|^2 sample estimate (the kappa-coupled component)
    double zbar_norm_sq(const TimeNet& net) const;
};

// per-path regression target eta(a) * I_1(1_{]s,a]} kappa') / (a - s)
std::vector<double> zbar_target(const PathEnsemble& paths, const std::vector<double>& eta_at_a,
                                std::size_t s_index, std::size_t a_index,
                                const std::vector<double>& kappa_prime);

// Backward dynamic programming with regression conditional expectations and
// an implicit (fixed-point) Y-step. Requires dt * L_f < 1 on every step.
BsdeSolution solve_backward(const PathEnsemble& paths, const Generator& gen,
                            const TerminalCondition& xi, const SolverOptions& opt);

// Picard iteration on the terminal-plus-integral functional, starting from
// (Y^0, Z^0) = (0, 0); returns all iterates for contraction diagnostics.
std::vector<BsdeSolution> picard_solve(const PathEnsemble& paths, const Generator& gen,
                                       const TerminalCondition& xi, const SolverOptions& opt,
                                       int iterations);

struct StabilityGap {
    double lhs = 0.0;            // ||Y - Y'||_S^2 + Zbar gap
    double xi_gap_sq = 0.0;      // ||xi - xi'||^2
    double generator_gap_sq = 0.0;  // integral of ||F - F'||^2 along the first solution
    double ratio = 0.0;          // lhs / (xi_gap + generator_gap), 0 when denominator is 0
};

StabilityGap stability_gap(const PathEnsemble& paths, const TimeNet& net,
                           const BsdeSolution& sol, const BsdeSolution& sol_prime,
                           const TerminalCondition& xi, const TerminalCondition& xi_prime,
                           const Generator& gen, const Generator& gen_prime);

} // namespace levylab
