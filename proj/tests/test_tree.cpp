#include "doctest.h"

#include <cmath>
#include <vector>

#include "levylab/bsde.hpp"
#include "levylab/rng.hpp"
#include "levylab/stats.hpp"
#include "levylab/tree.hpp"

using namespace levylab;

namespace {
const LevyModel kModel{0.3, 1.0, {{1.0, 2.0}}, 1.0};
} // namespace

TEST_CASE("tree construction and moment matching") {
    const TreeModel tree = TreeModel::build(kModel, 6);
    CHECK(tree.n_outcomes() == 4);
    double psum = 0.0, mean = 0.0, var = 0.0;
    for (std::size_t o = 0; o < tree.n_outcomes(); ++o) {
        psum += tree.outcome_prob(o);
        mean += tree.outcome_prob(o) * tree.outcome_dx(o);
    }
    for (std::size_t o = 0; o < tree.n_outcomes(); ++o) {
        const double d = tree.outcome_dx(o) - mean;
        var += tree.outcome_prob(o) * d * d;
    }
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mean == doctest::Approx(kModel.gamma * tree.dt()).epsilon(1e-14));
    CHECK(var == doctest::Approx(kModel.martingale_variance_rate() * tree.dt()).epsilon(1e-12));

    // centered per-mark increments are orthogonal within a step
    const MarkMeasure& marks = tree.marks();
    for (std::size_t q = 0; q < marks.size(); ++q) {
        double m = 0.0, v = 0.0, cross = 0.0;
        for (std::size_t o = 0; o < tree.n_outcomes(); ++o) {
            m += tree.outcome_prob(o) * tree.outcome_m(o, q);
            v += tree.outcome_prob(o) * tree.outcome_m(o, q) * tree.outcome_m(o, q);
            cross += tree.outcome_prob(o) * tree.outcome_m(o, 0) * tree.outcome_m(o, q);
        }
        CHECK(std::fabs(m) < 1e-14);
        CHECK(v == doctest::Approx(marks.atoms[q].mass * tree.dt()).epsilon(1e-12));
        if (q > 0) CHECK(std::fabs(cross) < 1e-14);
    }
}

TEST_CASE("tree caps") {
    CHECK_THROWS(TreeModel::build(kModel, 9));
    const LevyModel two_atoms{0.0, 1.0, {{1.0, 2.0}, {-0.5, 1.0}}, 1.0};
    CHECK_THROWS(TreeModel::build(two_atoms, 4));  // alphabet would be 8
    const LevyModel hot{0.0, 1.0, {{1.0, 9.0}}, 1.0};
    CHECK_THROWS(TreeModel::build(hot, 4));  // lambda dt >= 1
}

TEST_CASE("exact conditional expectations") {
    const TreeModel tree = TreeModel::build(kModel, 5);
    TreeLeafPaths leaves(tree);
    std::vector<double> xt(tree.n_leaves());
    for (std::size_t l = 0; l < tree.n_leaves(); ++l) xt[l] = leaves.x(l, 5);

    SUBCASE("last step returns the functional") {
        const auto e = exact_conditional_expectation(tree, xt, 5);
        for (std::size_t l = 0; l < tree.n_leaves(); ++l) CHECK(e[l] == xt[l]);
    }
    SUBCASE("step 0 gives gamma T by moment matching") {
        const auto e = exact_conditional_expectation(tree, xt, 0);
        CHECK(e[0] == doctest::Approx(0.3).epsilon(1e-13));
    }
    SUBCASE("tower property is exact") {
        const auto e3 = exact_conditional_expectation(tree, xt, 3);
        std::vector<double> ext(tree.n_leaves());
        const std::size_t block = tree.n_leaves() / tree.n_nodes(3);
        for (std::size_t l = 0; l < tree.n_leaves(); ++l) ext[l] = e3[l / block];
        const auto e1a = exact_conditional_expectation(tree, ext, 1);
        const auto e1b = exact_conditional_expectation(tree, xt, 1);
        for (std::size_t i = 0; i < e1a.size(); ++i)
            CHECK(e1a[i] == doctest::Approx(e1b[i]).epsilon(1e-14));
    }
    SUBCASE("step out of range") {
        CHECK_THROWS(exact_conditional_expectation(tree, xt, 6));
    }
}

TEST_CASE("exact tree bsde") {
    const TreeModel tree = TreeModel::build(kModel, 5);
    TreeLeafPaths leaves(tree);
    const TerminalCondition xi = make_terminal("call", 0.2);
    std::vector<double> xi_leaf(tree.n_leaves());
    for (std::size_t l = 0; l < tree.n_leaves(); ++l) xi_leaf[l] = xi(leaves, l);

    const Generator gen0 = make_zero_generator(tree.marks());
    const TreeBsde t0 = exact_bsde(tree, gen0, xi_leaf);
    const auto e0 = exact_conditional_expectation(tree, xi_leaf, 0);
    CHECK(t0.y[0][0] == doctest::Approx(e0[0]).epsilon(1e-13));

    const Generator genc = make_constant_generator(tree.marks(), 0.4);
    const TreeBsde tc = exact_bsde(tree, genc, xi_leaf);
    for (int step = 0; step <= 5; ++step) {
        const auto es = exact_conditional_expectation(tree, xi_leaf, step);
        const double shift = 0.4 * (1.0 - tree.net().points[step]);
        for (std::size_t s = 0; s < es.size(); ++s)
            CHECK(tc.y[step][s] == doctest::Approx(es[s] + shift).epsilon(1e-12));
    }
}

TEST_CASE("skeleton paths match the tree law") {
    const TreeModel tree = TreeModel::build(kModel, 6);
    TreeSkeletonPaths paths(tree, 50000, 77);
    // increments per step agree with the outcome table
    for (std::size_t p = 0; p < 100; ++p)
        for (int i = 0; i < 6; ++i)
            CHECK(paths.x(p, i + 1) - paths.x(p, i) ==
                  doctest::Approx(tree.outcome_dx(paths.outcome(p, i))).epsilon(1e-12));
    // centered increments have the right second moment
    for (std::size_t q = 0; q < tree.marks().size(); ++q) {
        std::vector<double> m2(paths.n_paths());
        for (std::size_t p = 0; p < paths.n_paths(); ++p) {
            const double m = paths.m_increment_idx(p, 2, q);
            m2[p] = m * m;
        }
        const auto ms = mean_se(m2);
        CHECK(std::fabs(ms.mean - tree.marks().atoms[q].mass * tree.dt()) <
              3.0 * ms.se + 1e-12);
    }
}

TEST_CASE("lsmc on skeleton paths matches the exact tree") {
    const TreeModel tree = TreeModel::build(kModel, 6);
    TreeLeafPaths leaves(tree);
    const TerminalCondition xi = make_terminal("call", 0.2);
    std::vector<double> xi_leaf(tree.n_leaves());
    for (std::size_t l = 0; l < tree.n_leaves(); ++l) xi_leaf[l] = xi(leaves, l);
    const Generator gen = make_affine_generator(tree.marks(), -1.0, 0.0, 0.0);
    const TreeBsde exact = exact_bsde(tree, gen, xi_leaf);

    SolverOptions opt;
    opt.basis.degree = 3;
    const std::size_t n_batches = 16;
    std::vector<double> y0(n_batches), z0(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        TreeSkeletonPaths paths(tree, 4000, mix_seed(33, b));
        const BsdeSolution sol = solve_backward(paths, gen, xi, opt);
        y0[b] = sol.y_at(0, 0);
        z0[b] = sol.z_bar_at(0, 0);
    }
    const auto my = mean_se(y0);
    const auto mz = mean_se(z0);
    CHECK(std::fabs(my.mean - exact.y[0][0]) < 3.0 * my.se);
    CHECK(std::fabs(mz.mean - exact.z_bar[0][0]) < 3.0 * mz.se);
}

TEST_CASE("discrete chaos projection") {
    const TreeModel tree = TreeModel::build(kModel, 4);
    TreeLeafPaths leaves(tree);
    std::vector<double> xt(tree.n_leaves());
    for (std::size_t l = 0; l < tree.n_leaves(); ++l) xt[l] = leaves.x(l, 4);

    SUBCASE("skeleton terminal is level 1 with unit coefficients") {
        const auto proj = chaos_project(tree, xt, 2);
        for (const auto& e : proj.entries) {
            if (e.pairs.size() == 1)
                CHECK(e.coef == doctest::Approx(1.0).epsilon(1e-10));
            else
                CHECK(std::fabs(e.coef) < 1e-10);
        }
        CHECK(proj.mean == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("product of disjoint increments hits a single level-2 term") {
        std::vector<double> prod(tree.n_leaves());
        for (std::size_t l = 0; l < tree.n_leaves(); ++l)
            prod[l] = leaves.m_increment_idx(l, 0, 1) * leaves.m_increment_idx(l, 2, 0);
        const auto proj = chaos_project(tree, prod, 2);
        std::size_t nonzero = 0;
        for (const auto& e : proj.entries)
            if (std::fabs(e.coef) > 1e-12) {
                ++nonzero;
                REQUIRE(e.pairs.size() == 2);
                CHECK(e.pairs[0].step == 0);
                CHECK(e.pairs[0].mark == 1);
                CHECK(e.pairs[1].step == 2);
                CHECK(e.pairs[1].mark == 0);
                CHECK(e.coef == doctest::Approx(1.0).epsilon(1e-10));
            }
        CHECK(nonzero == 1);
    }
    SUBCASE("parseval at full level") {
        const TerminalCondition xi = make_terminal("call", 0.2);
        std::vector<double> g(tree.n_leaves());
        for (std::size_t l = 0; l < tree.n_leaves(); ++l) g[l] = xi(leaves, l);
        const int full = tree.n_steps() * static_cast<int>(tree.marks().size());
        const auto proj = chaos_project(tree, g, full);
        double m2 = 0.0;
        for (std::size_t l = 0; l < tree.n_leaves(); ++l)
            m2 += tree.leaf_probability(l) * g[l] * g[l];
        CHECK(proj.total_norm_sq() == doctest::Approx(m2).epsilon(1e-10));
    }
    SUBCASE("level beyond the pair count") {
        CHECK_THROWS(chaos_project(tree, xt, 9));
    }
}

TEST_CASE("structure flags of the f = 0 solution") {
    const TreeModel tree = TreeModel::build(kModel, 6, {0.0, 0.5, 1.0});
    TreeLeafPaths leaves(tree);
    const TerminalCondition xi = make_terminal("call", 0.2);
    std::vector<double> xi_leaf(tree.n_leaves());
    for (std::size_t l = 0; l < tree.n_leaves(); ++l) xi_leaf[l] = xi(leaves, l);
    const Generator gen0 = make_zero_generator(tree.marks());
    const TreeBsde sol = exact_bsde(tree, gen0, xi_leaf);
    const int full = tree.n_steps() * static_cast<int>(tree.marks().size());

    for (int step = 0; step <= tree.n_steps(); ++step) {
        std::vector<double> y_leaf(tree.n_leaves());
        const std::size_t block = tree.n_leaves() / tree.n_nodes(step);
        for (std::size_t l = 0; l < tree.n_leaves(); ++l) y_leaf[l] = sol.y[step][l / block];
        const auto proj = chaos_project(tree, y_leaf, full);
        const auto flags = check_structure(tree, proj, step);
        CHECK(flags.adapted);
        CHECK(flags.time_constant);
    }
    // an affine generator preserves both flags as well
    const Generator gena = make_affine_generator(tree.marks(), -0.5, 0.2, 0.1);
    const TreeBsde sola = exact_bsde(tree, gena, xi_leaf);
    for (int step = 0; step <= tree.n_steps(); ++step) {
        std::vector<double> y_leaf(tree.n_leaves());
        const std::size_t block = tree.n_leaves() / tree.n_nodes(step);
        for (std::size_t l = 0; l < tree.n_leaves(); ++l) y_leaf[l] = sola.y[step][l / block];
        const auto proj = chaos_project(tree, y_leaf, full);
        const auto flags = check_structure(tree, proj, step);
        CHECK(flags.adapted);
        CHECK(flags.time_constant);
    }
}
