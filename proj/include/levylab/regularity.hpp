#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "levylab/bsde.hpp"
#include "levylab/malliavin.hpp"

namespace levylab {

enum class RegCondition : int { I = 1, II = 2, III = 3, IV = 4 };

struct CurvePoint {
    double s = 0.0;
    double t = 0.0;  // unused for the single-time conditions
    double value = 0.0;
    double se = 0.0;
    bool excluded = false;
};

struct Curve {
    RegCondition condition = RegCondition::I;
    std::size_t k = 0;  // coarse cell, 0-based: covers ]r_k, r_{k+1}]
    std::vector<CurvePoint> points;
};

// E|Y_{r_k} - E_s Y_{r_k}|^2 over the s-grid (net indices inside the cell)
Curve condition_i(const PathEnsemble& paths, const BsdeSolution& sol, std::size_t k,
                  const std::vector<std::size_t>& s_indices, const RegressionSpec& spec);

// E|Y_t - Y_s|^2 over index pairs
Curve condition_ii(const PathEnsemble& paths, const BsdeSolution& sol, std::size_t k,
                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

// ||Z_{s,.}||^2_{L2(P x mu)} over interval indices; needs per-atom Z
Curve condition_iii(const PathEnsemble& paths, const BsdeSolution& sol, std::size_t k,
                    const std::vector<std::size_t>& s_intervals);

// || int (Z_t - Z_s) h dmu ||^2 over interval-index pairs; h per atom
Curve condition_iv(const PathEnsemble& paths, const BsdeSolution& sol, std::size_t k,
                   const std::vector<std::pair<std::size_t, std::size_t>>& interval_pairs,
                   const std::vector<double>& h);

struct ThetaFit {
    double theta = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double r_squared = 0.0;
    std::size_t n_used = 0;
};

// log-log least squares of the curve against the condition's rate shape,
// theta searched on [0.05, 1] by golden section to 1e-3
ThetaFit fit_theta(const Curve& curve, double r_k);

// synthetic curve helper for fitter calibration
Curve synthetic_condition_curve(RegCondition cond, std::size_t k, double r_lo, double r_hi,
                                double c, double theta, std::size_t n_points,
                                double noise_level, std::uint64_t seed);

struct SuffcondResult {
    Curve xi_curve;      // ||xi - xi^{t, r_k}||^2 by coupled resampling
    Curve y_curve;       // ||Y_{r_k} - E_t Y_{r_k}||^2 by regression
    ThetaFit theta_xi;
    ThetaFit theta_y;
};

// Theorem-style sufficient-condition experiment on cell k; t-grid given as
// net indices inside the cell
SuffcondResult suffcond_experiment(const PathBundle& bundle, const Generator& gen,
                                   const TerminalCondition& xi, std::size_t k,
                                   const std::vector<std::size_t>& t_indices,
                                   const SolverOptions& opt, std::uint64_t seed2);

struct ErrorFunctionals {
    std::size_t n_steps = 0;
    double mesh = 0.0;
    double err_tau = 0.0;  // { sup_t E|Y - Ybar|^2 + int E|Z - Zbar|^2 }^{1/2}
    double var_2 = 0.0;
};

struct RatesResult {
    std::vector<ErrorFunctionals> per_net;
    double slope = 0.0;       // log err_tau against log mesh
    double intercept = 0.0;
    double ref_half_gap = 0.0;  // reference vs half-resolution reference
};

// discretization error of coarse equidistant nets against a fine reference
// solved with 4x the path count
RatesResult discretization_error(const LevyModel& model, const Generator& gen,
                                 const TerminalCondition& xi,
                                 const std::vector<std::size_t>& coarse_steps,
                                 std::size_t ref_steps, std::size_t n_paths,
                                 std::uint64_t seed, const SolverOptions& opt);

} // namespace levylab
