#include "doctest.h"

#include <cmath>
#include <vector>

#include "levylab/malliavin.hpp"
#include "levylab/rng.hpp"
#include "levylab/stats.hpp"

using namespace levylab;

namespace {
const LevyModel kModel{0.0, 1.0, {{1.0, 2.0}}, 1.0};
} // namespace

TEST_CASE("difference quotient exact cases") {
    const TimeNet net = TimeNet::equidistant(1.0, 16);
    const auto b = PathBundle::simulate(kModel, net, 5000, 11);
    const TerminalCondition xt = make_terminal("x_t");

    SUBCASE("X_T has derivative 1 everywhere") {
        for (double r : {0.0, 0.3, 0.99}) {
            const auto d = difference_quotient(xt.fn, b, {r, 1.0});
            for (double v : d) CHECK(v == 1.0);
        }
    }
    SUBCASE("Lipschitz bound") {
        const TerminalCondition call = make_terminal("call", 0.5);
        const auto d = difference_quotient(call.fn, b, {0.4, 1.0});
        for (double v : d) CHECK(std::fabs(v) <= 1.0 + 1e-14);
    }
    SUBCASE("square expands exactly") {
        const TerminalCondition sq = make_terminal("square");
        const double v = 1.0;
        const auto d = difference_quotient(sq.fn, b, {0.25, v});
        for (std::size_t p = 0; p < b.n_paths(); ++p)
            CHECK(d[p] == doctest::Approx(2.0 * b.x(p, 16) + v).epsilon(1e-12));
    }
    SUBCASE("v = 0 is routed elsewhere") {
        CHECK_THROWS(difference_quotient(xt.fn, b, {0.3, 0.0}));
    }
}

TEST_CASE("brownian direction derivative") {
    const TimeNet net = TimeNet::equidistant(1.0, 16);
    const auto b = PathBundle::simulate(kModel, net, 5000, 12);
    const TerminalCondition xt = make_terminal("x_t");

    SUBCASE("linear functional is exact") {
        const auto d = brownian_direction_derivative(xt.fn, b, {0.4, 0.0, 1e-4});
        for (double v : d) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("quadratic functional is exact under central differences") {
        const TerminalCondition sq = make_terminal("square");
        const auto d = brownian_direction_derivative(sq.fn, b, {0.4, 0.0, 1e-4});
        for (std::size_t p = 0; p < b.n_paths(); ++p)
            CHECK(d[p] == doctest::Approx(2.0 * b.x(p, 16)).epsilon(1e-8));
    }
    SUBCASE("smooth functional within the Taylor remainder") {
        const TerminalCondition sine = make_terminal("sine");
        const auto d = brownian_direction_derivative(sine.fn, b, {0.4, 0.0, 1e-4});
        for (std::size_t p = 0; p < b.n_paths(); ++p)
            CHECK(std::fabs(d[p] - std::cos(b.x(p, 16))) < 1e-7);
    }
    SUBCASE("no brownian part") {
        const LevyModel pure_jump{0.0, 0.0, {{1.0, 2.0}}, 1.0};
        const auto bj = PathBundle::simulate(pure_jump, net, 100, 13);
        CHECK_THROWS(brownian_direction_derivative(xt.fn, bj, {0.4, 0.0, 1e-4}));
    }
}

TEST_CASE("derivative constant while r stays inside a coarse cell") {
    const TimeNet net = TimeNet::equidistant_with_coarse(1.0, 16, {0.0, 0.5, 1.0});
    const auto b = PathBundle::simulate(kModel, net, 2000, 14);
    const TerminalCondition xi = make_terminal("abs_pow_bounded", 0.0, 0.5, 10.0, 0.5);

    const auto d1 = difference_quotient(xi.fn, b, {0.125, 1.0});
    const auto d2 = difference_quotient(xi.fn, b, {0.3125, 1.0});
    const auto d3 = difference_quotient(xi.fn, b, {0.5, 1.0});
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        CHECK(d1[p] == d2[p]);
        CHECK(d2[p] == d3[p]);
    }
    // the functional reads X_{0.5} only, so later directions vanish
    const auto d4 = difference_quotient(xi.fn, b, {0.75, 1.0});
    for (double v : d4) CHECK(v == 0.0);
}

TEST_CASE("perturbed solution U") {
    const TimeNet net = TimeNet::equidistant(1.0, 16);
    const auto b = PathBundle::simulate(kModel, net, 30000, 15);
    const MarkMeasure marks = b.marks();
    const TerminalCondition xt = make_terminal("x_t");
    SolverOptions opt;
    opt.basis.degree = 2;

    SUBCASE("f = 0: U = 1 after r, 0 before") {
        const Generator gen = make_zero_generator(marks);
        const BsdeSolution base = solve_backward(b, gen, xt, opt);
        const PerturbationSpec spec{0.5, 1.0};
        const BsdeSolution uv = solve_uv(b, gen, xt, base, spec, opt);
        for (std::size_t p = 0; p < 100; ++p) {
            for (std::size_t i = 0; i < 8; ++i) CHECK(uv.y_at(p, i) == 0.0);
            for (std::size_t i = 8; i <= 16; ++i)
                CHECK(uv.y_at(p, i) == doctest::Approx(1.0).epsilon(1e-9));
        }
        std::vector<double> vbar(b.n_paths());
        for (std::size_t p = 0; p < b.n_paths(); ++p) vbar[p] = uv.z_bar_at(p, 12);
        CHECK(std::fabs(sample_mean(vbar)) < 0.05);
    }
    SUBCASE("f = -y: U decays like the discrete exponential") {
        const Generator gen = make_affine_generator(marks, -1.0, 0.0, 0.0);
        const BsdeSolution base = solve_backward(b, gen, xt, opt);
        const BsdeSolution uv = solve_uv(b, gen, xt, base, {0.25, 1.0}, opt);
        const double dt = 1.0 / 16.0;
        double expect = 1.0;
        for (int i = 0; i < 8; ++i) expect /= 1.0 + dt;  // value at t = 0.5
        CHECK(uv.y_at(0, 8) == doctest::Approx(expect).epsilon(1e-6));
        CHECK(std::fabs(uv.y_at(0, 8) - std::exp(-0.5)) < 2.0 * dt);
        CHECK(uv.y_at(0, 2) == 0.0);
    }
    SUBCASE("missing base solution") {
        const Generator gen = make_zero_generator(marks);
        BsdeSolution empty;
        CHECK_THROWS(solve_uv(b, gen, xt, empty, {0.5, 1.0}, opt));
    }
}

TEST_CASE("z from the derivative diagonal") {
    const TimeNet net = TimeNet::equidistant(1.0, 16);
    const auto b = PathBundle::simulate(kModel, net, 30000, 16);
    const MarkMeasure marks = b.marks();
    SolverOptions opt;
    opt.basis.degree = 2;

    SUBCASE("terminal value: Z is 1 across the grid") {
        const Generator gen = make_zero_generator(marks);
        const TerminalCondition xt = make_terminal("x_t");
        const BsdeSolution base = solve_backward(b, gen, xt, opt);
        const ZDiagonalGrid grid = z_from_diagonal(b, gen, xt, base, {4, 8, 12}, opt);
        for (const auto& cell : grid.cells)
            CHECK(std::fabs(cell.stats.mean - 1.0) < 3.0 * cell.stats.se + 1e-9);
        CHECK_THROWS(grid.cell(5, 1.0));  // not on the requested grid
    }
    SUBCASE("deterministic terminal: Z vanishes") {
        const Generator gen = make_zero_generator(marks);
        TerminalCondition one;
        one.fn = [](const PathView&) { return 1.0; };
        const BsdeSolution base = solve_backward(b, gen, one, opt);
        const ZDiagonalGrid grid = z_from_diagonal(b, gen, one, base, {8}, opt);
        for (const auto& cell : grid.cells) CHECK(std::fabs(cell.stats.mean) < 1e-9);
    }
}

TEST_CASE("clark-ocone reconstruction") {
    const TimeNet net = TimeNet::equidistant(1.0, 8);
    const auto b = PathBundle::simulate(kModel, net, 40000, 17);
    SolverOptions opt;
    opt.basis.degree = 2;

    SUBCASE("terminal value reconstructs within Monte Carlo error") {
        const TerminalCondition xt = make_terminal("x_t");
        const auto rep = clark_ocone_check(xt.fn, b, opt);
        CHECK(rep.residual_l2 <= 3.0 * rep.g_se + 1e-12);
    }
    SUBCASE("deterministic functional has zero residual") {
        TerminalCondition c;
        c.fn = [](const PathView&) { return 2.5; };
        const auto rep = clark_ocone_check(c.fn, b, opt);
        CHECK(rep.residual_l2 <= 1e-12);
    }
    SUBCASE("residual shrinks when the net is refined") {
        const TerminalCondition sq = make_terminal("square");
        const auto coarse_rep = clark_ocone_check(sq.fn, b, opt);
        const TimeNet fine = TimeNet::equidistant(1.0, 32);
        const auto bf = PathBundle::simulate(kModel, fine, 40000, 18);
        const auto fine_rep = clark_ocone_check(sq.fn, bf, opt);
        const double ratio = coarse_rep.residual_l2 / fine_rep.residual_l2;
        CHECK(ratio > 1.3);
        CHECK(ratio < 3.2);
    }
}

TEST_CASE("kernel-form terminal: derivative second moment matches the kernel norm") {
    const TimeNet net = TimeNet::equidistant_with_coarse(1.0, 16, {0.0, 0.5, 1.0});
    const auto b = PathBundle::simulate(kModel, net, 60000, 19);
    const MarkMeasure marks = b.marks();

    ChaosKernelSet xi_k({0.0, 0.5, 1.0}, marks.atoms);
    xi_k.add_entry({{0, 1}}, 0.8);
    xi_k.add_entry({{0, 0}, {1, 1}}, 0.6);
    xi_k.add_entry({{0, 1}, {1, 0}}, 0.5);  // makes the derivative path-dependent
    const TerminalCondition xi = make_kernel_terminal(xi_k);
    const Generator gen = make_zero_generator(marks);
    SolverOptions opt;
    opt.basis.degree = 2;
    opt.basis.vars = BasisVars::Components;
    const BsdeSolution base = solve_backward(b, gen, xi, opt);

    // U at T is the pathwise derivative kernel; its second moment is the
    // exact chaos norm of the shifted kernel
    const PerturbationSpec spec{0.25, 1.0};
    const BsdeSolution uv = solve_uv(b, gen, xi, base, spec, opt);
    std::vector<double> ut_sq(b.n_paths());
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        const double u = uv.y_at(p, 16);
        ut_sq[p] = u * u;
    }
    const auto ms = mean_se(ut_sq);
    const double exact = xi_k.malliavin_kernel(0, 1).chaos_norm_sq();
    CHECK(exact > 0.64);  // the derivative carries a level-1 part
    CHECK(std::fabs(ms.mean - exact) < 3.0 * ms.se + 1e-10);
}
