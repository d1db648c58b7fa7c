#include "doctest.h"

#include <cmath>
#include <vector>

#include "levylab/counterexample.hpp"
#include "levylab/rng.hpp"

using namespace levylab;

TEST_CASE("series at s = 0 is beta_1^2") {
    CounterexampleSpec spec;
    const auto v = counterexample_series(spec, 0.0);
    CHECK(v.z_norm_sq == doctest::Approx(1.0));
}

TEST_CASE("beta sequence values") {
    CHECK(CounterexampleSpec::beta_sq(1) == 1.0);
    CHECK(CounterexampleSpec::beta_sq(2) == 0.0);
    const double l2 = std::log(2.0);
    CHECK(CounterexampleSpec::beta_sq(3) == doctest::Approx(1.0 / (3.0 * l2 * l2)));
}

TEST_CASE("series tracks the asymptotic comparator") {
    CounterexampleSpec spec;
    spec.truncation = 500000;
    double lo = 1e300, hi = 0.0;
    for (double s : {0.9, 0.99, 0.999, 0.9999}) {
        const auto v = counterexample_series(spec, s);
        CHECK(v.tail_bound < 1e-10);
        const double ratio = v.z_norm_sq / v.asymptotic;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    // the equivalence constant stays within a fixed interval
    CHECK(lo > 1.5);
    CHECK(hi < 5.5);
    // series diverges as s -> 1, so no (iii)-type bound can hold
    const double v1 = counterexample_series(spec, 0.9).z_norm_sq;
    const double v2 = counterexample_series(spec, 0.9999).z_norm_sq;
    CHECK(v2 > 10.0 * v1);
}

TEST_CASE("errors") {
    CounterexampleSpec spec;
    CHECK_THROWS(counterexample_series(spec, 1.0));
    CHECK_THROWS(counterexample_series(spec, -0.1));
    spec.truncation = 10;
    CHECK_THROWS(counterexample_series(spec, 0.9999));
}

TEST_CASE("weighted difference never exceeds 1/log(2)^2") {
    const double bound = counterexample_weighted_bound();
    CHECK(bound == doctest::Approx(2.0813689810056077).epsilon(1e-12));
    CounterRng g(31337, StreamKind::Generic);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 3 + g.next_u64() % 200;
        std::vector<double> alpha(dim);
        double norm = 0.0;
        for (auto& a : alpha) {
            a = g.next_gaussian();
            norm += a * a;
        }
        norm = std::sqrt(norm);
        for (auto& a : alpha) a /= norm;
        const double s = 0.9 * g.next_uniform();
        const double t = s + (1.0 - s) * g.next_uniform();
        CHECK(counterexample_weighted_difference(alpha, s, t) <= bound + 1e-12);
        // the extreme window [0, 1] as well
        CHECK(counterexample_weighted_difference(alpha, 0.0, 1.0) <= bound + 1e-12);
    }
}
