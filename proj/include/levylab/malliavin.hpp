#pragma once

#include <vector>

#include "levylab/bsde.hpp"
#include "levylab/stats.hpp"

namespace levylab {

// Perturbation direction: time r and mark v. v = 0 is the Brownian
// direction and uses a symmetric finite difference of step h; any other v
// must be one of the model's jump sizes and uses the exact difference
// quotient.
struct PerturbationSpec {
    double r = 0.0;
    double v = 0.0;
    double h = 1e-4;
};

// (Phi(X + v 1_{[r,T]}) - Phi(X)) / v per path; v != 0
std::vector<double> difference_quotient(const PathFunctional& phi, const PathEnsemble& paths,
                                        const PerturbationSpec& spec);

// central difference (Phi(X + h 1_{[r,T]}) - Phi(X - h 1_{[r,T]})) / (2h);
// requires a Brownian component (sigma > 0)
std::vector<double> brownian_direction_derivative(const PathFunctional& phi,
                                                  const PathEnsemble& paths,
                                                  const PerturbationSpec& spec);

// derivative in direction (r, v), dispatching on v
std::vector<double> malliavin_derivative(const PathFunctional& phi, const PathEnsemble& paths,
                                         const PerturbationSpec& spec);

// Solves the perturbed linear(ized) BSDE for (U, V) on top of a base
// solution: difference-quotient driver for v != 0, gradient driver for
// v = 0, and U = 0 enforced before r.
BsdeSolution solve_uv(const PathEnsemble& paths, const Generator& gen,
                      const TerminalCondition& xi, const BsdeSolution& base,
                      const PerturbationSpec& spec, const SolverOptions& opt);

struct ZDiagonalCell {
    std::size_t r_index = 0;
    double v = 0.0;
    std::vector<double> projected;  // F_{t_r}-projected U at the next net point, per path
    MeanSe stats;
};

struct ZDiagonalGrid {
    std::vector<ZDiagonalCell> cells;

    const ZDiagonalCell& cell(std::size_t r_index, double v) const;
    // kappa-integrated estimate sum_q kappa'_q mass_q Z_{r, mark_q}, per path
    std::vector<double> kappa_integrated(const MarkMeasure& marks,
                                         const std::vector<double>& kappa_prime,
                                         std::size_t r_index) const;
};

// U^{r,v} at the first net point after r, projected back to F_{t_r}, for
// every requested net index and every mark atom direction
ZDiagonalGrid z_from_diagonal(const PathEnsemble& paths, const Generator& gen,
                              const TerminalCondition& xi, const BsdeSolution& base,
                              const std::vector<std::size_t>& r_indices,
                              const SolverOptions& opt, double h = 1e-4);

struct ClarkOconeReport {
    double mean = 0.0;          // E G estimate
    double residual_l2 = 0.0;   // sqrt E (G - reconstruction)^2
    MeanSe residual_sq;
    double g_se = 0.0;          // SE of the mean estimate, the natural scale
};

// reconstructs G as EG + sum over intervals and atoms of the projected
// derivative times the M-increment, and reports the L2 residual
ClarkOconeReport clark_ocone_check(const PathFunctional& phi, const PathEnsemble& paths,
                                   const SolverOptions& opt, double h = 1e-4);

} // namespace levylab
