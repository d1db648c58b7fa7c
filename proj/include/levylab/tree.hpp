#pragma once

#include <cstdint>
#include <vector>

#include "levylab/generator.hpp"
#include "levylab/model.hpp"
#include "levylab/paths.hpp"

namespace levylab {

// Discrete-time, finite-alphabet skeleton of the Levy model with per-step
// increments matching the model's first two moments exactly. Small enough
// for full enumeration, so conditional expectations, the BSDE and chaos
// projections are computed without sampling error.
class TreeModel {
public:
    static TreeModel build(const LevyModel& model, int n_steps,
                           std::vector<double> coarse = {});

    const LevyModel& model() const { return model_; }
    const MarkMeasure& marks() const { return marks_; }
    const TimeNet& net() const { return net_; }
    int n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    std::size_t n_outcomes() const { return outcome_prob_.size(); }
    std::size_t n_nodes(int step) const;
    std::size_t n_leaves() const { return n_nodes(n_steps_); }

    double outcome_prob(std::size_t o) const { return outcome_prob_[o]; }
    // centered per-step increment of mark q under outcome o
    double outcome_m(std::size_t o, std::size_t q) const {
        return outcome_m_[o * marks_.size() + q];
    }
    double outcome_dx(std::size_t o) const { return outcome_dx_[o]; }

    // X value at a node (level = step, node indexed in outcome order)
    double x_node(int step, std::size_t node) const { return x_node_[step][node]; }
    // outcome taken on step `step` along the way to `node` at level `level`
    std::size_t outcome_on_path(int level, std::size_t node, int step) const;
    double leaf_probability(std::size_t leaf) const;

private:
    LevyModel model_;
    MarkMeasure marks_;
    TimeNet net_;
    int n_steps_ = 0;
    double dt_ = 0.0;
    std::vector<double> outcome_prob_;
    std::vector<double> outcome_m_;   // [outcome * n_marks + mark]
    std::vector<double> outcome_dx_;
    std::vector<std::vector<double>> x_node_;
};

// exact E[ . | F_step]: collapses leaf values to per-node values
std::vector<double> exact_conditional_expectation(const TreeModel& tree,
                                                  const std::vector<double>& leaf_values,
                                                  int step);

struct TreeBsde {
    std::vector<std::vector<double>> y;       // y[step][node], step = 0..S
    std::vector<std::vector<double>> z_bar;   // z_bar[step][node], step = 0..S-1
    std::vector<std::vector<std::vector<double>>> z_atom;  // [atom][step][node]
};

// exact backward induction with the implicit Y-step solved to 1e-14 and
// Zbar from the exact conditional covariance with I_1(kappa')
TreeBsde exact_bsde(const TreeModel& tree, const Generator& gen,
                    const std::vector<double>& terminal_leaf_values);

struct TreePair {
    int step;
    std::uint16_t mark;

    friend bool operator==(const TreePair&, const TreePair&) = default;
    friend auto operator<=>(const TreePair&, const TreePair&) = default;
};

struct TreeChaosEntry {
    std::vector<TreePair> pairs;  // distinct, sorted
    double coef = 0.0;
    double basis_norm_sq = 0.0;   // E e_P^2
};

struct TreeChaosProjection {
    double mean = 0.0;
    std::vector<TreeChaosEntry> entries;  // levels 1..max_level

    // sum over levels of coef^2 E e_P^2, the discrete n! ||f_n||^2, per level
    std::vector<double> level_norms_sq(int max_level) const;
    double total_norm_sq() const;
};

// exact inner products of a leaf functional against products of centered
// per-step increments over distinct (step, mark) pairs
TreeChaosProjection chaos_project(const TreeModel& tree,
                                  const std::vector<double>& leaf_values, int max_level);

struct StructureFlags {
    bool adapted = true;        // coefficients vanish outside ]0, t]^n
    bool time_constant = true;  // coefficients constant per coarse cuboid
    double worst_adapted = 0.0;
    double worst_constant = 0.0;
};

// Theorem-style structure check of a projection of an F_{t_step}-measurable
// functional: supported on past steps and constant across step choices
// within each coarse cell
StructureFlags check_structure(const TreeModel& tree, const TreeChaosProjection& proj,
                               int step, double tol = 1e-9);

// leaf-indexed ensemble (for evaluating terminal functionals exactly)
class TreeLeafPaths : public PathEnsemble {
public:
    explicit TreeLeafPaths(const TreeModel& tree) : tree_(&tree) {}
    const TimeNet& net() const override { return tree_->net(); }
    const MarkMeasure& marks() const override { return tree_->marks(); }
    std::size_t n_paths() const override { return tree_->n_leaves(); }
    double x(std::size_t leaf, std::size_t t_index) const override;
    double m_increment_idx(std::size_t leaf, std::size_t interval,
                           std::size_t atom) const override;

private:
    const TreeModel* tree_;
};

// Monte Carlo paths drawn from the skeleton law; feeds the generic LSMC
// solver for oracle-equivalence checks
class TreeSkeletonPaths : public PathEnsemble {
public:
    TreeSkeletonPaths(const TreeModel& tree, std::size_t n_paths, std::uint64_t seed);
    const TimeNet& net() const override { return tree_->net(); }
    const MarkMeasure& marks() const override { return tree_->marks(); }
    std::size_t n_paths() const override { return n_paths_; }
    double x(std::size_t path, std::size_t t_index) const override {
        return x_[path * (tree_->n_steps() + 1) + t_index];
    }
    double m_increment_idx(std::size_t path, std::size_t interval,
                           std::size_t atom) const override {
        return tree_->outcome_m(outcomes_[path * tree_->n_steps() + interval], atom);
    }
    std::size_t outcome(std::size_t path, std::size_t step) const {
        return outcomes_[path * tree_->n_steps() + step];
    }

private:
    const TreeModel* tree_;
    std::size_t n_paths_;
    std::vector<std::uint8_t> outcomes_;
    std::vector<double> x_;
};

} // namespace levylab
