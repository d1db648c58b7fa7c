#include "levylab/tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "levylab/parallel.hpp"
#include "levylab/rng.hpp"

namespace levylab {

TreeModel TreeModel::build(const LevyModel& model, int n_steps, std::vector<double> coarse) {
    model.validate();
    if (n_steps < 1 || n_steps > 8)
        throw std::invalid_argument("TreeModel: n_steps must be in 1..8");
    TreeModel t;
    t.model_ = model;
    t.marks_ = derive_mark_measure(model);
    t.n_steps_ = n_steps;
    t.dt_ = model.horizon / static_cast<double>(n_steps);
    if (coarse.empty()) coarse = {0.0, model.horizon};
    t.net_ = TimeNet::equidistant_with_coarse(model.horizon, n_steps, coarse);
    if (t.net_.points.size() != static_cast<std::size_t>(n_steps) + 1)
        throw std::invalid_argument("TreeModel: coarse points must sit on the step grid");

    const bool has_brownian = model.sigma > 0.0;
    const std::size_t n_coords = (has_brownian ? 1 : 0) + model.jump_atoms.size();
    const std::size_t n_outcomes = std::size_t{1} << n_coords;
    if (n_outcomes > 4)
        throw std::invalid_argument("TreeModel: outcome alphabet capped at 4");
    double leaves = 1.0;
    for (int i = 0; i < n_steps; ++i) leaves *= static_cast<double>(n_outcomes);
    if (leaves > 1e7) throw std::invalid_argument("TreeModel: more than 1e7 leaves");

    const std::size_t n_marks = t.marks_.size();
    t.outcome_prob_.assign(n_outcomes, 1.0);
    t.outcome_m_.assign(n_outcomes * n_marks, 0.0);
    t.outcome_dx_.assign(n_outcomes, model.gamma * t.dt_);

    for (std::size_t o = 0; o < n_outcomes; ++o) {
        std::size_t bit = 0;
        std::size_t q = 0;
        if (has_brownian) {
            const bool up = ((o >> bit) & 1u) == 0u;
            t.outcome_prob_[o] *= 0.5;
            const double m = (up ? 1.0 : -1.0) * model.sigma * std::sqrt(t.dt_);
            t.outcome_m_[o * n_marks + q] = m;
            t.outcome_dx_[o] += m;
            ++bit;
            ++q;
        }
        for (const auto& atom : model.jump_atoms) {
            const double p = atom.intensity * t.dt_;
            if (p >= 1.0)
                throw std::invalid_argument("TreeModel: lambda dt >= 1; use more steps");
            const bool jump = ((o >> bit) & 1u) == 1u;
            t.outcome_prob_[o] *= jump ? p : (1.0 - p);
            // scaled so that the per-step variance is exactly x^2 lambda dt
            const double scale = 1.0 / std::sqrt(1.0 - p);
            const double m = scale * atom.size * (jump ? 1.0 - p : -p);
            t.outcome_m_[o * n_marks + q] = m;
            t.outcome_dx_[o] += m;
            ++bit;
            ++q;
        }
    }

    t.x_node_.resize(n_steps + 1);
    t.x_node_[0] = {0.0};
    for (int step = 1; step <= n_steps; ++step) {
        const std::size_t parents = t.n_nodes(step - 1);
        t.x_node_[step].resize(parents * n_outcomes);
        for (std::size_t s = 0; s < parents; ++s)
            for (std::size_t o = 0; o < n_outcomes; ++o)
                t.x_node_[step][s * n_outcomes + o] = t.x_node_[step - 1][s] + t.outcome_dx_[o];
    }
    return t;
}

std::size_t TreeModel::n_nodes(int step) const {
    std::size_t n = 1;
    for (int i = 0; i < step; ++i) n *= n_outcomes();
    return n;
}

std::size_t TreeModel::outcome_on_path(int level, std::size_t node, int step) const {
    // node digits are outcomes, most recent in the least significant digit
    std::size_t div = 1;
    for (int i = step + 1; i < level; ++i) div *= n_outcomes();
    return (node / div) % n_outcomes();
}

double TreeModel::leaf_probability(std::size_t leaf) const {
    double p = 1.0;
    for (int step = 0; step < n_steps_; ++step)
        p *= outcome_prob_[outcome_on_path(n_steps_, leaf, step)];
    return p;
}

std::vector<double> exact_conditional_expectation(const TreeModel& tree,
                                                  const std::vector<double>& leaf_values,
                                                  int step) {
    if (step < 0 || step > tree.n_steps())
        throw std::invalid_argument("exact_conditional_expectation: step out of range");
    if (leaf_values.size() != tree.n_leaves())
        throw std::invalid_argument("exact_conditional_expectation: wrong leaf count");
    std::vector<double> v = leaf_values;
    const std::size_t A = tree.n_outcomes();
    for (int level = tree.n_steps(); level > step; --level) {
        std::vector<double> up(tree.n_nodes(level - 1), 0.0);
        for (std::size_t s = 0; s < up.size(); ++s) {
            double acc = 0.0;
            for (std::size_t o = 0; o < A; ++o) acc += tree.outcome_prob(o) * v[s * A + o];
            up[s] = acc;
        }
        v = std::move(up);
    }
    return v;
}

TreeBsde exact_bsde(const TreeModel& tree, const Generator& gen,
                    const std::vector<double>& terminal_leaf_values) {
    const int S = tree.n_steps();
    const std::size_t A = tree.n_outcomes();
    const std::size_t n_marks = tree.marks().size();
    if (gen.kappa_prime.size() != n_marks)
        throw std::invalid_argument("exact_bsde: kappa_prime does not match mark atoms");
    if (tree.dt() * gen.lipschitz >= 1.0)
        throw std::runtime_error("exact_bsde: dt * L_f >= 1; use more steps");

    TreeBsde out;
    out.y.resize(S + 1);
    out.z_bar.resize(S);
    out.z_atom.assign(n_marks, std::vector<std::vector<double>>(S));
    out.y[S] = terminal_leaf_values;

    for (int step = S - 1; step >= 0; --step) {
        const std::size_t n = tree.n_nodes(step);
        out.y[step].resize(n);
        out.z_bar[step].resize(n);
        for (std::size_t q = 0; q < n_marks; ++q) out.z_atom[q][step].resize(n);
        const double t = tree.net().points[step];
        const double dt = tree.dt();
        for (std::size_t s = 0; s < n; ++s) {
            double e = 0.0;
            double zb = 0.0;
            std::vector<double> zq(n_marks, 0.0);
            for (std::size_t o = 0; o < A; ++o) {
                const double yv = out.y[step + 1][s * A + o];
                const double po = tree.outcome_prob(o);
                e += po * yv;
                double i1 = 0.0;
                for (std::size_t q = 0; q < n_marks; ++q) {
                    const double m = tree.outcome_m(o, q);
                    i1 += gen.kappa_prime[q] * m;
                    zq[q] += po * m * yv;
                }
                zb += po * i1 * yv;
            }
            zb /= dt;
            for (std::size_t q = 0; q < n_marks; ++q)
                out.z_atom[q][step][s] = zq[q] / (tree.marks().atoms[q].mass * dt);
            double y = e;
            for (int it = 0; it < 200; ++it) {
                const double next = e + dt * gen.f(t, tree.x_node(step, s), y, zb);
                const double r = std::fabs(next - y);
                y = next;
                if (r <= 1e-14) break;
            }
            out.y[step][s] = y;
            out.z_bar[step][s] = zb;
        }
    }
    return out;
}

namespace {
void enumerate_pairs(const TreeModel& tree, int max_level,
                     std::vector<TreePair>& current, std::size_t from,
                     const std::vector<TreePair>& all,
                     std::vector<std::vector<TreePair>>& out) {
    if (!current.empty()) out.push_back(current);
    if (static_cast<int>(current.size()) == max_level) return;
    for (std::size_t i = from; i < all.size(); ++i) {
        current.push_back(all[i]);
        enumerate_pairs(tree, max_level, current, i + 1, all, out);
        current.pop_back();
    }
}
} // namespace

TreeChaosProjection chaos_project(const TreeModel& tree,
                                  const std::vector<double>& leaf_values, int max_level) {
    const int S = tree.n_steps();
    const std::size_t n_marks = tree.marks().size();
    const int max_possible = S * static_cast<int>(n_marks);
    if (max_level < 0 || max_level > max_possible)
        throw std::invalid_argument("chaos_project: level beyond the tree's pair count");
    if (leaf_values.size() != tree.n_leaves())
        throw std::invalid_argument("chaos_project: wrong leaf count");

    const std::size_t n_leaves = tree.n_leaves();
    std::vector<double> weights(n_leaves, 0.0);
    for (std::size_t l = 0; l < n_leaves; ++l) weights[l] = tree.leaf_probability(l);

    TreeChaosProjection proj;
    double mean = 0.0;
    for (std::size_t l = 0; l < n_leaves; ++l) mean += weights[l] * leaf_values[l];
    proj.mean = mean;

    std::vector<TreePair> all;
    for (int step = 0; step < S; ++step)
        for (std::size_t q = 0; q < n_marks; ++q)
            all.push_back({step, static_cast<std::uint16_t>(q)});
    std::vector<std::vector<TreePair>> subsets;
    std::vector<TreePair> current;
    enumerate_pairs(tree, max_level, current, 0, all, subsets);

    // per-leaf m values by (step, mark)
    const std::size_t n_pairs = all.size();
    std::vector<double> m_leaf(n_leaves * n_pairs, 0.0);
    parallel_chunks(n_leaves, 1024, [&](std::size_t l0, std::size_t l1) {
        for (std::size_t l = l0; l < l1; ++l)
            for (std::size_t i = 0; i < n_pairs; ++i)
                m_leaf[l * n_pairs + i] =
                    tree.outcome_m(tree.outcome_on_path(S, l, all[i].step), all[i].mark);
    });
    auto pair_index = [&](const TreePair& p) {
        return static_cast<std::size_t>(p.step) * n_marks + p.mark;
    };

    proj.entries.resize(subsets.size());
    parallel_chunks(subsets.size(), 16, [&](std::size_t s0, std::size_t s1) {
        for (std::size_t si = s0; si < s1; ++si) {
            const auto& P = subsets[si];
            double num = 0.0;
            for (std::size_t l = 0; l < n_leaves; ++l) {
                double e = leaf_values[l] * weights[l];
                for (const auto& p : P) e *= m_leaf[l * n_pairs + pair_index(p)];
                num += e;
            }
            double den = 1.0;
            for (const auto& p : P) den *= tree.marks().atoms[p.mark].mass * tree.dt();
            TreeChaosEntry entry;
            entry.pairs = P;
            entry.basis_norm_sq = den;
            entry.coef = num / den;
            proj.entries[si] = std::move(entry);
        }
    });
    return proj;
}

std::vector<double> TreeChaosProjection::level_norms_sq(int max_level) const {
    std::vector<double> out(max_level + 1, 0.0);
    out[0] = mean * mean;
    for (const auto& e : entries) {
        const int n = static_cast<int>(e.pairs.size());
        if (n <= max_level) out[n] += e.coef * e.coef * e.basis_norm_sq;
    }
    return out;
}

double TreeChaosProjection::total_norm_sq() const {
    double s = mean * mean;
    for (const auto& e : entries) s += e.coef * e.coef * e.basis_norm_sq;
    return s;
}

StructureFlags check_structure(const TreeModel& tree, const TreeChaosProjection& proj,
                               int step, double tol) {
    StructureFlags flags;
    double scale = std::fabs(proj.mean);
    for (const auto& e : proj.entries) scale = std::max(scale, std::fabs(e.coef));
    if (scale == 0.0) scale = 1.0;

    // group coefficients of past-supported entries by their coarse signature
    struct Group {
        std::vector<std::pair<std::size_t, std::uint16_t>> signature;  // (cell, mark) sorted
        double coef;
    };
    std::vector<Group> groups;
    for (const auto& e : proj.entries) {
        bool past = true;
        for (const auto& p : e.pairs)
            if (p.step >= step) past = false;
        if (!past) {
            // adapted means these coefficients vanish
            flags.worst_adapted = std::max(flags.worst_adapted, std::fabs(e.coef) / scale);
            continue;
        }
        Group g;
        for (const auto& p : e.pairs)
            g.signature.push_back({tree.net().coarse_cell_of_interval(p.step), p.mark});
        std::sort(g.signature.begin(), g.signature.end());
        g.coef = e.coef;
        bool matched = false;
        for (const auto& other : groups) {
            if (other.signature == g.signature) {
                flags.worst_constant =
                    std::max(flags.worst_constant, std::fabs(other.coef - g.coef) / scale);
                matched = true;
                break;
            }
        }
        if (!matched) groups.push_back(std::move(g));
    }
    flags.adapted = flags.worst_adapted <= tol;
    flags.time_constant = flags.worst_constant <= tol;
    return flags;
}

double TreeLeafPaths::x(std::size_t leaf, std::size_t t_index) const {
    const int S = tree_->n_steps();
    std::size_t node = leaf;
    for (int i = static_cast<int>(t_index); i < S; ++i) node /= tree_->n_outcomes();
    return tree_->x_node(static_cast<int>(t_index), node);
}

double TreeLeafPaths::m_increment_idx(std::size_t leaf, std::size_t interval,
                                      std::size_t atom) const {
    const std::size_t o =
        tree_->outcome_on_path(tree_->n_steps(), leaf, static_cast<int>(interval));
    return tree_->outcome_m(o, atom);
}

TreeSkeletonPaths::TreeSkeletonPaths(const TreeModel& tree, std::size_t n_paths,
                                     std::uint64_t seed)
    : tree_(&tree), n_paths_(n_paths) {
    const int S = tree.n_steps();
    outcomes_.assign(n_paths * S, 0);
    x_.assign(n_paths * (S + 1), 0.0);
    parallel_chunks(n_paths, 1024, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            double xv = 0.0;
            for (int i = 0; i < S; ++i) {
                CounterRng g(seed, StreamKind::TreeOutcome, p, static_cast<std::uint32_t>(i));
                const double u = g.next_uniform();
                double cum = 0.0;
                std::size_t pick = tree.n_outcomes() - 1;
                for (std::size_t o = 0; o < tree.n_outcomes(); ++o) {
                    cum += tree.outcome_prob(o);
                    if (u <= cum) {
                        pick = o;
                        break;
                    }
                }
                outcomes_[p * S + i] = static_cast<std::uint8_t>(pick);
                xv += tree.outcome_dx(pick);
                x_[p * (S + 1) + i + 1] = xv;
            }
        }
    });
}

} // namespace levylab
