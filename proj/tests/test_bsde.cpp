#include "doctest.h"

#include <cmath>
#include <vector>

#include "levylab/bsde.hpp"
#include "levylab/rng.hpp"
#include "levylab/stats.hpp"

using namespace levylab;

namespace {

const LevyModel kModel{0.0, 1.0, {{1.0, 2.0}}, 1.0};

struct Setup {
    TimeNet net;
    PathBundle bundle;
    MarkMeasure marks;
};

Setup make_setup(std::size_t n_steps, std::size_t n_paths, std::uint64_t seed) {
    TimeNet net = TimeNet::equidistant(1.0, n_steps);
    PathBundle bundle = PathBundle::simulate(kModel, net, n_paths, seed);
    MarkMeasure marks = bundle.marks();
    return {std::move(net), std::move(bundle), std::move(marks)};
}

} // namespace

TEST_CASE("martingale case: f = 0, xi = X_T") {
    const auto s = make_setup(16, 100000, 101);
    const Generator gen = make_zero_generator(s.marks);
    const TerminalCondition xi = make_terminal("x_t");
    SolverOptions opt;
    opt.basis.degree = 2;
    const BsdeSolution sol = solve_backward(s.bundle, gen, xi, opt);

    // terminal consistency is exact
    for (std::size_t p = 0; p < 200; ++p)
        CHECK(sol.y_at(p, 16) == xi(s.bundle, p));

    // Y_0 estimates E X_T = 0
    std::vector<double> xt(s.bundle.n_paths());
    for (std::size_t p = 0; p < s.bundle.n_paths(); ++p) xt[p] = s.bundle.x(p, 16);
    const auto mx = mean_se(xt);
    CHECK(std::fabs(sol.y_at(0, 0)) < 3.0 * mx.se);

    // Zbar is constant = sum kappa' mass = mu(R) = 3 since Z == 1
    for (std::size_t i : {std::size_t{0}, std::size_t{7}, std::size_t{14}}) {
        std::vector<double> y_next(s.bundle.n_paths());
        for (std::size_t p = 0; p < s.bundle.n_paths(); ++p) y_next[p] = sol.y_at(p, i + 1);
        const auto target = zbar_target(s.bundle, y_next, i, i + 1, gen.kappa_prime);
        const auto mt = mean_se(target);
        std::vector<double> zhat(s.bundle.n_paths());
        for (std::size_t p = 0; p < s.bundle.n_paths(); ++p) zhat[p] = sol.z_bar_at(p, i);
        CHECK(std::fabs(sample_mean(zhat) - 3.0) < 3.0 * mt.se);
    }

    // fixed-point residual bound
    for (const auto& d : sol.diagnostics) CHECK(d.fixed_point_residual <= 1e-12);
}

TEST_CASE("constant generator shifts by c (T - t)") {
    const auto s = make_setup(16, 50000, 102);
    const double c = 0.7;
    const Generator gen = make_constant_generator(s.marks, c);
    const TerminalCondition xi = make_terminal("x_t");
    SolverOptions opt;
    opt.basis.degree = 2;
    const BsdeSolution sol = solve_backward(s.bundle, gen, xi, opt);
    std::vector<double> xt(s.bundle.n_paths());
    for (std::size_t p = 0; p < s.bundle.n_paths(); ++p) xt[p] = s.bundle.x(p, 16);
    const auto mx = mean_se(xt);
    CHECK(std::fabs(sol.y_at(0, 0) - (mx.mean + c)) < 3.0 * mx.se + 1e-9);
}

TEST_CASE("linear generator with deterministic terminal") {
    const auto s = make_setup(32, 2000, 103);
    const Generator gen = make_affine_generator(s.marks, -1.0, 0.0, 0.0);
    TerminalCondition one;
    one.fn = [](const PathView&) { return 1.0; };
    SolverOptions opt;
    opt.basis.degree = 1;
    const BsdeSolution sol = solve_backward(s.bundle, gen, one, opt);
    // the implicit scheme solves y_i = y_{i+1} / (1 + dt) exactly
    const double dt = 1.0 / 32.0;
    double expect = 1.0;
    for (int i = 0; i < 32; ++i) expect /= 1.0 + dt;
    CHECK(sol.y_at(0, 0) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(std::fabs(sol.y_at(0, 0) - std::exp(-1.0)) < 2.0 * dt);
    // interior value follows e^{-(T-t)} at the same order
    CHECK(std::fabs(sol.y_at(0, 16) - std::exp(-0.5)) < 2.0 * dt);
}

TEST_CASE("mesh condition dt L_f < 1 is enforced") {
    const auto s = make_setup(8, 100, 104);
    Generator gen = make_affine_generator(s.marks, -20.0, 0.0, 0.0);
    const TerminalCondition xi = make_terminal("x_t");
    CHECK_THROWS(solve_backward(s.bundle, gen, xi, SolverOptions{}));
}

TEST_CASE("zbar target basics") {
    const auto s = make_setup(8, 100000, 105);
    const std::vector<double> kappa(s.marks.size(), 1.0);

    SUBCASE("isometry: eta = I_1 itself") {
        std::vector<double> eta(s.bundle.n_paths());
        for (std::size_t p = 0; p < s.bundle.n_paths(); ++p) {
            double i1 = 0.0;
            for (std::size_t q = 0; q < s.marks.size(); ++q)
                i1 += s.bundle.m_increment_idx(p, 3, q);
            eta[p] = i1;
        }
        const auto target = zbar_target(s.bundle, eta, 3, 4, kappa);
        const auto ms = mean_se(target);
        // ||kappa'||^2 = sum mass = 3
        CHECK(std::fabs(ms.mean - 3.0) < 3.0 * ms.se);
    }
    SUBCASE("measurable eta gives zero") {
        std::vector<double> eta(s.bundle.n_paths());
        for (std::size_t p = 0; p < s.bundle.n_paths(); ++p) eta[p] = s.bundle.x(p, 3);
        const auto target = zbar_target(s.bundle, eta, 3, 4, kappa);
        const auto ms = mean_se(target);
        CHECK(std::fabs(ms.mean) < 3.0 * ms.se);
    }
    SUBCASE("future increment gives zero") {
        std::vector<double> eta(s.bundle.n_paths());
        for (std::size_t p = 0; p < s.bundle.n_paths(); ++p)
            eta[p] = s.bundle.x(p, 8) - s.bundle.x(p, 4);
        const auto target = zbar_target(s.bundle, eta, 3, 4, kappa);
        const auto ms = mean_se(target);
        CHECK(std::fabs(ms.mean) < 3.0 * ms.se);
    }
    SUBCASE("bad interval") {
        std::vector<double> eta(s.bundle.n_paths(), 0.0);
        CHECK_THROWS(zbar_target(s.bundle, eta, 4, 4, kappa));
    }
}

TEST_CASE("picard iteration") {
    const auto s = make_setup(16, 30000, 106);
    const Generator gen = make_affine_generator(s.marks, -1.0, 0.0, 0.0);
    const TerminalCondition xi = make_terminal("x_t");
    SolverOptions opt;
    opt.basis.degree = 2;

    const auto iterates = picard_solve(s.bundle, gen, xi, opt, 8);
    REQUIRE(iterates.size() == 8);

    SUBCASE("first iterate with f = 0 is the projected terminal") {
        const Generator zero = make_zero_generator(s.marks);
        const auto first = picard_solve(s.bundle, zero, xi, opt, 1);
        std::vector<double> xt(s.bundle.n_paths());
        for (std::size_t p = 0; p < s.bundle.n_paths(); ++p) xt[p] = xi(s.bundle, p);
        const auto fit = conditional_expectation(s.bundle, 8, xt, opt.basis);
        for (std::size_t p = 0; p < 100; ++p)
            CHECK(first[0].y_at(p, 8) == doctest::Approx(fit.fitted[p]).epsilon(1e-12));
    }
    SUBCASE("gaps contract and the fixed point matches the backward solver") {
        std::vector<double> gaps;
        for (std::size_t k = 1; k < iterates.size(); ++k) {
            double g = 0.0;
            for (std::size_t i = 0; i < 16; ++i) {
                double sy = 0.0;
                for (std::size_t p = 0; p < s.bundle.n_paths(); ++p) {
                    const double d = iterates[k].y_at(p, i) - iterates[k - 1].y_at(p, i);
                    sy += d * d;
                }
                g += (1.0 / 16.0) * sy / static_cast<double>(s.bundle.n_paths());
            }
            gaps.push_back(g);
        }
        for (std::size_t k = 1; k < gaps.size(); ++k)
            if (gaps[k - 1] > 1e-18) CHECK(gaps[k] < gaps[k - 1]);

        const BsdeSolution dp = solve_backward(s.bundle, gen, xi, opt);
        std::vector<double> xt(s.bundle.n_paths());
        for (std::size_t p = 0; p < s.bundle.n_paths(); ++p) xt[p] = xi(s.bundle, p);
        const double se = mean_se(xt).se;
        CHECK(std::fabs(iterates.back().y_at(0, 0) - dp.y_at(0, 0)) < 3.0 * se + 1e-6);
    }
}

TEST_CASE("stability gap") {
    const auto s = make_setup(16, 20000, 107);
    const Generator gen = make_affine_generator(s.marks, -1.0, 0.0, 0.0);
    const TerminalCondition xi = make_terminal("x_t");
    SolverOptions opt;
    opt.basis.degree = 2;
    const BsdeSolution sol = solve_backward(s.bundle, gen, xi, opt);

    SUBCASE("identical inputs") {
        const auto gap = stability_gap(s.bundle, s.net, sol, sol, xi, xi, gen, gen);
        CHECK(gap.lhs == 0.0);
        CHECK(gap.xi_gap_sq == 0.0);
    }
    SUBCASE("terminal shift scales as eps^2") {
        std::vector<double> ratios;
        for (double eps : {0.1, 0.01}) {
            TerminalCondition shifted;
            shifted.fn = [eps](const PathView& v) { return v.terminal() + eps; };
            const BsdeSolution sol2 = solve_backward(s.bundle, gen, shifted, opt);
            const auto gap = stability_gap(s.bundle, s.net, sol, sol2, xi, shifted, gen, gen);
            CHECK(gap.xi_gap_sq == doctest::Approx(eps * eps).epsilon(1e-9));
            ratios.push_back(gap.lhs / (eps * eps));
        }
        CHECK(ratios[1] / ratios[0] < 2.0);
        CHECK(ratios[0] / ratios[1] < 2.0);
    }
    SUBCASE("generator shift scales as eps^2") {
        std::vector<double> ratios;
        for (double eps : {0.1, 0.01}) {
            const Generator gen2 = make_affine_generator(s.marks, -1.0, 0.0, eps);
            const BsdeSolution sol2 = solve_backward(s.bundle, gen2, xi, opt);
            const auto gap = stability_gap(s.bundle, s.net, sol, sol2, xi, xi, gen, gen2);
            CHECK(gap.generator_gap_sq == doctest::Approx(eps * eps).epsilon(1e-9));
            ratios.push_back(gap.lhs / (eps * eps));
        }
        CHECK(ratios[1] / ratios[0] < 2.0);
        CHECK(ratios[0] / ratios[1] < 2.0);
    }
    SUBCASE("mismatched solutions") {
        const auto other = make_setup(8, 20000, 108);
        const BsdeSolution sol8 = solve_backward(other.bundle, gen, xi, opt);
        CHECK_THROWS(stability_gap(s.bundle, s.net, sol, sol8, xi, xi, gen, gen));
    }
}

TEST_CASE("quadrupling paths halves the Y_0 standard error") {
    const Generator gen = make_affine_generator(derive_mark_measure(kModel), -1.0, 0.0, 0.0);
    const TerminalCondition xi = make_terminal("x_t");
    SolverOptions opt;
    opt.basis.degree = 2;
    const TimeNet net = TimeNet::equidistant(1.0, 8);

    auto batch_sd = [&](std::size_t n_paths, std::uint64_t tag) {
        const std::size_t n_batches = 32;
        std::vector<double> y0(n_batches);
        for (std::size_t b = 0; b < n_batches; ++b) {
            const auto bundle =
                PathBundle::simulate(kModel, net, n_paths, mix_seed(500 + tag, b));
            const BsdeSolution sol = solve_backward(bundle, gen, xi, opt);
            y0[b] = sol.y_at(0, 0);
        }
        return std::sqrt(sample_variance(y0));
    };
    const double sd_small = batch_sd(2000, 1);
    const double sd_big = batch_sd(8000, 2);
    const double ratio = sd_small / sd_big;
    CHECK(ratio > 1.4);
    CHECK(ratio < 2.6);
}

TEST_CASE("generator validation") {
    const MarkMeasure marks = derive_mark_measure(kModel);
    Generator ok = make_affine_generator(marks, -1.0, 0.5, 0.2);
    ok.validate(marks, 999);

    Generator lying = ok;
    lying.lipschitz = 0.1;  // declared constant too small
    CHECK_THROWS(lying.validate(marks, 999));

    Generator bad_kappa = ok;
    bad_kappa.kappa_prime = {1.0};
    CHECK_THROWS(bad_kappa.validate(marks, 999));
}
