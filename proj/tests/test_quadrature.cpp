#include "doctest.h"

#include <cmath>

#include "levylab/quadrature.hpp"
#include "levylab/stats.hpp"

using namespace levylab;

TEST_CASE("polynomials are exact") {
    const double v = integrate_adaptive([](double x) { return x * x * x; }, 0.0, 1.0);
    CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("exponential") {
    const double v = integrate_adaptive([](double x) { return std::exp(x); }, 0.0, 2.0);
    CHECK(v == doctest::Approx(std::exp(2.0) - 1.0).epsilon(1e-10));
}

TEST_CASE("steep integrand near endpoint") {
    // (1 - r)^{-3/2} on [0, 0.999]; closed form 2((1-b)^{-1/2} - 1)
    const double b = 0.999;
    const double v = integrate_adaptive(
        [](double r) { return std::pow(1.0 - r, -1.5); }, 0.0, b, 1e-9, 50);
    const double exact = 2.0 * (1.0 / std::sqrt(1.0 - b) - 1.0);
    CHECK(v == doctest::Approx(exact).epsilon(1e-8));
}

TEST_CASE("oscillatory integrand") {
    const double v = integrate_adaptive([](double x) { return std::sin(10.0 * x); }, 0.0, 3.0);
    CHECK(v == doctest::Approx((1.0 - std::cos(30.0)) / 10.0).epsilon(1e-9));
}

TEST_CASE("golden section finds the minimum") {
    const double x = golden_section_minimize(
        [](double t) { return (t - 0.37) * (t - 0.37) + 1.0; }, 0.05, 1.0, 1e-6);
    CHECK(x == doctest::Approx(0.37).epsilon(1e-4));
}

TEST_CASE("ks test accepts equal laws and rejects different ones") {
    std::vector<double> a(4000), b(4000), c(4000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(a.size());
        a[i] = u;
        b[i] = 1.0 - u;       // same law
        c[i] = u * u;         // different law
    }
    CHECK(ks_two_sample(a, b).p_value > 0.5);
    CHECK(ks_two_sample(a, c).p_value < 0.01);
}
