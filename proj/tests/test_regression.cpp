#include "doctest.h"

#include <cmath>
#include <vector>

#include "levylab/parallel.hpp"
#include "levylab/paths.hpp"
#include "levylab/regression.hpp"
#include "levylab/rng.hpp"

using namespace levylab;

TEST_CASE("jacobi eigen on a known matrix") {
    // [[2,1],[1,2]] has eigenvalues 1 and 3
    const auto e = SymmetricEigen::compute({2.0, 1.0, 1.0, 2.0}, 2);
    CHECK(e.values[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("least squares recovers exact linear data") {
    const std::size_t n = 5000;
    std::vector<double> x(n * 2), y(n);
    CounterRng g(7, StreamKind::Generic);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = 2.0 * g.next_uniform() - 1.0;
        x[i * 2] = 1.0;
        x[i * 2 + 1] = v;
        y[i] = 3.0 - 2.0 * v;
    }
    const auto fit = fit_least_squares(x, n, 2, y);
    REQUIRE(fit.ok);
    CHECK(fit.coef[0] == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(fit.coef[1] == doctest::Approx(-2.0).epsilon(1e-10));
}

TEST_CASE("rank deficiency is reported, not hidden") {
    const std::size_t n = 100;
    std::vector<double> x(n * 2), y(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        x[i * 2] = 1.0;
        x[i * 2 + 1] = 2.0;  // collinear with the intercept
    }
    const auto fit = fit_least_squares(x, n, 2, y);
    CHECK(!fit.ok);
    CHECK(fit.message.find("rank-deficient") != std::string::npos);
}

TEST_CASE("deterministic across thread counts") {
    const std::size_t n = 100000;
    std::vector<double> x(n * 3), y(n);
    CounterRng g(11, StreamKind::Generic);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = g.next_gaussian();
        x[i * 3] = 1.0;
        x[i * 3 + 1] = v;
        x[i * 3 + 2] = v * v;
        y[i] = std::sin(v);
    }
    set_thread_count(1);
    const auto f1 = fit_least_squares(x, n, 3, y);
    set_thread_count(8);
    const auto f8 = fit_least_squares(x, n, 3, y);
    set_thread_count(0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(f1.coef[j] == f8.coef[j]);
}

TEST_CASE("conditional expectation via basis on paths") {
    const LevyModel model{0.0, 1.0, {}, 1.0};  // pure Brownian
    const TimeNet net = TimeNet::equidistant(1.0, 4);
    const auto b = PathBundle::simulate(model, net, 50000, 3);
    // E[X_T | F_{t}] = X_t exactly; degree-1 basis must reproduce it
    std::vector<double> xt(b.n_paths());
    for (std::size_t p = 0; p < b.n_paths(); ++p) xt[p] = b.x(p, 4);
    RegressionSpec spec;
    spec.degree = 1;
    const auto fit = conditional_expectation(b, 2, xt, spec);
    REQUIRE(fit.ok);
    double worst = 0.0;
    for (std::size_t p = 0; p < b.n_paths(); ++p)
        worst = std::max(worst, std::fabs(fit.fitted[p] - b.x(p, 2)));
    // the regression is exact in the basis up to sampling noise in the coefficients
    CHECK(worst < 0.05);
}

TEST_CASE("t = 0 reduces to the sample mean") {
    const LevyModel model{0.0, 1.0, {}, 1.0};
    const TimeNet net = TimeNet::equidistant(1.0, 2);
    const auto b = PathBundle::simulate(model, net, 1000, 5);
    std::vector<double> y(b.n_paths());
    double mean = 0.0;
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        y[p] = b.x(p, 2);
        mean += y[p];
    }
    mean /= static_cast<double>(b.n_paths());
    const auto fit = conditional_expectation(b, 0, y, RegressionSpec{});
    CHECK(fit.fitted[0] == doctest::Approx(mean).epsilon(1e-12));
}
