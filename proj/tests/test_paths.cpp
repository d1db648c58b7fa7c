#include "doctest.h"

#include <cmath>
#include <vector>

#include "levylab/parallel.hpp"
#include "levylab/paths.hpp"
#include "levylab/stats.hpp"

using namespace levylab;

namespace {
const LevyModel kModel{0.0, 1.0, {{1.0, 2.0}}, 1.0};
const LevyModel kDrifted{0.7, 1.0, {{1.0, 2.0}, {-0.5, 1.0}}, 1.0};
} // namespace

TEST_CASE("terminal mean and variance") {
    const TimeNet net = TimeNet::equidistant(1.0, 16);
    const auto b = PathBundle::simulate(kDrifted, net, 100000, 11);
    std::vector<double> xt(b.n_paths());
    for (std::size_t p = 0; p < b.n_paths(); ++p) xt[p] = b.x(p, 16);
    const auto m = mean_se(xt);
    CHECK(std::fabs(m.mean - kDrifted.gamma * 1.0) < 3.0 * m.se);
    const double var = sample_variance(xt);
    const double expected = kDrifted.martingale_variance_rate() * 1.0;
    const double var_se = var * std::sqrt(2.0 / static_cast<double>(b.n_paths() - 1));
    CHECK(std::fabs(var - expected) < 4.0 * var_se);
}

TEST_CASE("determinism across thread counts") {
    const TimeNet net = TimeNet::equidistant(1.0, 8);
    set_thread_count(1);
    const auto b1 = PathBundle::simulate(kModel, net, 2000, 7);
    set_thread_count(8);
    const auto b8 = PathBundle::simulate(kModel, net, 2000, 7);
    set_thread_count(0);
    for (std::size_t p = 0; p < 2000; ++p) {
        for (std::size_t i = 0; i <= 8; ++i) CHECK(b1.x(p, i) == b8.x(p, i));
        REQUIRE(b1.jumps(p).size() == b8.jumps(p).size());
        for (std::size_t e = 0; e < b1.jumps(p).size(); ++e) {
            CHECK(b1.jumps(p)[e].time == b8.jumps(p)[e].time);
            CHECK(b1.jumps(p)[e].atom == b8.jumps(p)[e].atom);
        }
    }
}

TEST_CASE("m increment basics") {
    const TimeNet net = TimeNet::equidistant(1.0, 8);
    const auto b = PathBundle::simulate(kModel, net, 100000, 23);

    SUBCASE("length zero interval") {
        CHECK(b.m_increment(0, 0.25, 0.25, 0.0) == 0.0);
        CHECK(b.m_increment(0, 0.25, 0.25, 1.0) == 0.0);
    }
    SUBCASE("unknown mark") {
        CHECK_THROWS(b.m_increment(0, 0.0, 0.25, 0.7));
    }
    SUBCASE("isometry per atom") {
        for (double mark : {0.0, 1.0}) {
            std::vector<double> sq(b.n_paths());
            for (std::size_t p = 0; p < b.n_paths(); ++p) {
                const double m = b.m_increment(p, 0.25, 0.75, mark);
                sq[p] = m * m;
            }
            const auto ms = mean_se(sq);
            const double mass = mark == 0.0 ? 1.0 : 2.0;
            CHECK(std::fabs(ms.mean - mass * 0.5) < 3.0 * ms.se);
        }
    }
    SUBCASE("disjoint intervals uncorrelated") {
        std::vector<double> a(b.n_paths()), c(b.n_paths()), prod(b.n_paths());
        for (std::size_t p = 0; p < b.n_paths(); ++p) {
            a[p] = b.m_increment(p, 0.0, 0.5, 1.0);
            c[p] = b.m_increment(p, 0.5, 1.0, 1.0);
            prod[p] = a[p] * c[p];
        }
        const auto ms = mean_se(prod);
        CHECK(std::fabs(ms.mean) < 3.0 * ms.se);
    }
    SUBCASE("compensated jump part is centered") {
        std::vector<double> m(b.n_paths());
        for (std::size_t p = 0; p < b.n_paths(); ++p) m[p] = b.m_increment(p, 0.0, 1.0, 1.0);
        const auto ms = mean_se(m);
        CHECK(std::fabs(ms.mean) < 3.0 * ms.se);
    }
}

TEST_CASE("independent increments of X") {
    const TimeNet net = TimeNet::equidistant(1.0, 8);
    const auto b = PathBundle::simulate(kDrifted, net, 100000, 5);
    std::vector<double> inc1(b.n_paths()), inc2(b.n_paths()), prod(b.n_paths());
    for (std::size_t p = 0; p < b.n_paths(); ++p) {
        inc1[p] = b.x(p, 2) - b.x(p, 0);
        inc2[p] = b.x(p, 6) - b.x(p, 4);
        prod[p] = (inc1[p] - 0.7 * 0.25) * (inc2[p] - 0.7 * 0.25);
    }
    const auto ms = mean_se(prod);
    CHECK(std::fabs(ms.mean) < 3.0 * ms.se);
}

TEST_CASE("window resampling") {
    const TimeNet net = TimeNet::equidistant(1.0, 8);
    const auto b = PathBundle::simulate(kModel, net, 100000, 31);

    SUBCASE("full replacement is independent") {
        const auto rb = b.resample_window(0.0, 1.0, 77);
        std::vector<double> x0(b.n_paths()), x1(b.n_paths());
        for (std::size_t p = 0; p < b.n_paths(); ++p) {
            x0[p] = b.x(p, 8);
            x1[p] = rb.x(p, 8);
        }
        const double corr = sample_correlation(x0, x1);
        CHECK(std::fabs(corr) < 3.0 / std::sqrt(static_cast<double>(b.n_paths())));
    }
    SUBCASE("coupling outside the window is exact") {
        const auto rb = b.resample_window(0.375, 0.75, 78);
        for (std::size_t p = 0; p < 512; ++p) {
            CHECK(rb.x(p, 0) == b.x(p, 0));
            CHECK(rb.x(p, 1) == b.x(p, 1));
            CHECK(rb.x(p, 2) == b.x(p, 2));
            CHECK(rb.x(p, 3) == b.x(p, 3));  // t = 0.375
            CHECK(rb.x(p, 8) != b.x(p, 8));
        }
    }
    SUBCASE("coupled second moment matches 2 C (r - t)") {
        const double t = 0.25, r = 0.625;
        const auto rb = b.resample_window(t, r, 79);
        std::vector<double> d2(b.n_paths());
        for (std::size_t p = 0; p < b.n_paths(); ++p) {
            const double d = b.x(p, 7) - rb.x(p, 7);  // s = 0.875 > r
            d2[p] = d * d;
        }
        const auto ms = mean_se(d2);
        const double expected = 2.0 * kModel.martingale_variance_rate() * (r - t);
        CHECK(std::fabs(ms.mean - expected) < 3.0 * ms.se);
    }
    SUBCASE("interior window time with bridge split") {
        // t strictly inside a net interval
        const double t = 0.3, r = 0.75;
        const auto rb = b.resample_window(t, r, 80);
        for (std::size_t p = 0; p < 512; ++p) {
            CHECK(rb.x(p, 1) == b.x(p, 1));
            CHECK(rb.x(p, 2) == b.x(p, 2));  // 0.25 <= t
        }
        std::vector<double> d2(b.n_paths());
        for (std::size_t p = 0; p < b.n_paths(); ++p) {
            const double d = b.x(p, 8) - rb.x(p, 8);
            d2[p] = d * d;
        }
        const auto ms = mean_se(d2);
        const double expected = 2.0 * kModel.martingale_variance_rate() * (r - t);
        CHECK(std::fabs(ms.mean - expected) < 3.0 * ms.se);
    }
    SUBCASE("law is preserved") {
        const auto rb = b.resample_window(0.3, 0.8, 81);
        std::vector<double> x0(20000), x1(20000);
        for (std::size_t p = 0; p < x0.size(); ++p) {
            x0[p] = b.x(p, 8);
            x1[p] = rb.x(p + 40000, 8);  // disjoint path blocks for independence
        }
        const auto ks = ks_two_sample(x0, x1);
        CHECK(ks.p_value >= 0.01);
    }
    SUBCASE("bad window") {
        CHECK_THROWS(b.resample_window(0.5, 0.5, 1));
        CHECK_THROWS(b.resample_window(0.7, 0.5, 1));
    }
}
