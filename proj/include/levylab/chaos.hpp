#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "levylab/model.hpp"
#include "levylab/paths.hpp"

namespace levylab {

// One coordinate of a kernel cuboid: a coarse time cell (0-based, cell k
// covers ]r_k, r_{k+1}]) and a mark atom index.
struct KernelPair {
    std::uint16_t cell;
    std::uint16_t atom;

    friend bool operator==(const KernelPair&, const KernelPair&) = default;
    friend auto operator<=>(const KernelPair&, const KernelPair&) = default;
};

// Canonical (sorted) multiset of pairs with the symmetric kernel's value on
// every permutation of the corresponding cuboid.
struct KernelEntry {
    std::vector<KernelPair> pairs;
    double coef = 0.0;
};

// time-cell multiplicities gamma_l of a pair multiset
std::vector<int> multiplicity_vector(const KernelEntry& entry, std::size_t n_cells);

// Chaos expansion of a random variable whose kernels are constant on the
// cuboids induced by a coarse partition and atomic in the marks. In this
// class every L2 quantity below is a finite sum, evaluated exactly.
class ChaosKernelSet {
public:
    ChaosKernelSet() = default;
    ChaosKernelSet(std::vector<double> partition, std::vector<MarkAtom> atoms);

    const std::vector<double>& partition() const { return partition_; }
    const std::vector<MarkAtom>& atoms() const { return atoms_; }
    std::size_t n_cells() const { return partition_.size() - 1; }
    double horizon() const { return partition_.back(); }

    double level0() const { return level0_; }
    void set_level0(double v) { level0_ = v; }

    // adds coef on the (symmetrized) cuboid of `pairs`; canonicalizes and
    // merges with an existing entry for the same multiset
    void add_entry(std::vector<KernelPair> pairs, double coef);

    int max_level() const;
    const std::vector<KernelEntry>& entries(int level) const;

    // ||xi||^2 = level0^2 + sum_n n! ||f_n||^2
    double chaos_norm_sq() const;
    // T_xi(t) = ||E_t xi||^2
    double projection_norm_sq(double t) const;
    // ||E_t xi - E_s xi||^2 via T_xi(t) - T_xi(s)
    double projection_distance_sq(double s, double t) const;
    // same quantity from the cuboid-volume differences directly
    double projection_distance_sq_direct(double s, double t) const;

    // sum_n (n+1)! ||f_n||^2; finite kernel sets always qualify but the
    // value is the reported truncation diagnostic
    double d12_norm_sq() const;

    // order-(n-1) kernel family n f_n((t,x), .) for t in cell and mark
    // atom; constant in t within the cell
    ChaosKernelSet malliavin_kernel(std::size_t cell, std::size_t atom) const;

    // ||D xi||^2_{L2(P (x) m)} via the cell-multiplicity formula
    double dsmooth_norm_sq() const;
    // same by integrating malliavin_kernel norms over time and marks
    double dsmooth_norm_sq_by_integration() const;

    // ||xi - xi^{t,r}||^2 = sum_n 2 n! ||f_n (1 - 1_off^n)||^2
    double resampling_distance_sq(double t, double r) const;

    // sup over t in [r_{k-1}, r_k) of resampling_distance/(r_k - t), grid
    // refined (with geometric clustering at r_k) until stable
    double resampling_sup_ratio(double rel_stability = 1e-6,
                                std::size_t initial_grid = 1000) const;

    // pathwise value of sum_n I_n(f_n) + level0; exact for off-diagonal
    // entries, repeated cells expanded over the ensemble's net intervals
    // with the diagonal cells dropped
    double evaluate(const PathEnsemble& paths, std::size_t path) const;
    // fraction of cuboid volume lost to dropped diagonal cells on this net
    double diagonal_bias_fraction(const TimeNet& net) const;

    // lhs of the two derivative-smoothness estimates, exact
    double projected_derivative_norm_sq(std::size_t k, double t) const;
    double projected_derivative_distance_sq(std::size_t k, double s, double t) const;

private:
    void check_state() const;
    double cell_length(std::size_t cell) const {
        return partition_[cell + 1] - partition_[cell];
    }
    double cell_overlap(std::size_t cell, double t) const;  // lambda(cell ∩ ]0,t])

    std::vector<double> partition_;
    std::vector<MarkAtom> atoms_;
    double level0_ = 0.0;
    std::vector<std::vector<KernelEntry>> levels_;  // levels_[n], n >= 1 used
};

// Lemma-style two-sided checks; each returns (lhs, rhs).
// Bound check: ||E_t D_t eta - E_s D_s eta||^2 <= 4 int_s^t ||E_{r_k} eta - E_r eta||^2 / (r_k-r)^2 dr
std::pair<double, double> hsmooth_bound_check(const ChaosKernelSet& eta, std::size_t k,
                                              double s, double t, double quad_rel_tol = 1e-8);
// Pointwise check: ||E_t D_t eta||^2 <= (T_eta(r_k) - T_eta(t)) / (r_k - t)
std::pair<double, double> hsmooth_pointwise_check(const ChaosKernelSet& eta, std::size_t k,
                                                  double t);

// chaos expansion of X_T: level0 = gamma T, level-1 kernel identically 1
ChaosKernelSet terminal_x_kernels(const LevyModel& model,
                                  const std::vector<double>& partition);

// seeded random kernel set for property tests and shipped scenarios;
// cells drawn from [0, max_cell] (0-based, pass n_cells-1 for all)
ChaosKernelSet random_kernel_set(std::uint64_t seed,
                                 const std::vector<double>& partition,
                                 const std::vector<MarkAtom>& atoms,
                                 int max_level, int entries_per_level,
                                 std::size_t max_cell);

} // namespace levylab
