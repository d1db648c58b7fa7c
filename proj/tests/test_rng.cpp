#include "doctest.h"

#include <vector>

#include "levylab/parallel.hpp"
#include "levylab/rng.hpp"
#include "levylab/stats.hpp"

using namespace levylab;

TEST_CASE("philox known-answer vectors") {
    // reference vectors from the Random123 distribution (kat_vectors)
    auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);

    out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                            {0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);

    out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            {0xa4093822u, 0x299f31d0u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("streams are reproducible and distinct") {
    CounterRng a(42, StreamKind::BrownianIncrement, 7, 3);
    CounterRng b(42, StreamKind::BrownianIncrement, 7, 3);
    CounterRng c(42, StreamKind::BrownianIncrement, 8, 3);
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
}

TEST_CASE("gaussian moments") {
    CounterRng g(2024, StreamKind::Generic);
    const std::size_t n = 200000;
    std::vector<double> z(n);
    for (auto& v : z) v = g.next_gaussian();
    const auto m = mean_se(z);
    CHECK(std::fabs(m.mean) < 3.0 * m.se);
    const double var = sample_variance(z);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("poisson moments") {
    CounterRng g(99, StreamKind::Generic);
    const double lambda = 2.5;
    const std::size_t n = 200000;
    std::vector<double> k(n);
    for (auto& v : k) v = static_cast<double>(g.next_poisson(lambda));
    const auto m = mean_se(k);
    CHECK(std::fabs(m.mean - lambda) < 3.0 * m.se);
    CHECK(sample_variance(k) == doctest::Approx(lambda).epsilon(0.03));
}

TEST_CASE("uniform range") {
    CounterRng g(1, StreamKind::Generic);
    for (int i = 0; i < 10000; ++i) {
        const double u = g.next_uniform();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}
