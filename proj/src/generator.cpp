#include "levylab/generator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "levylab/rng.hpp"

namespace levylab {

double Generator::kappa_norm_sq(const MarkMeasure& marks) const {
    if (kappa_prime.size() != marks.size())
        throw std::invalid_argument("Generator: kappa_prime must have one value per mark atom");
    double s = 0.0;
    for (std::size_t q = 0; q < marks.size(); ++q)
        s += kappa_prime[q] * kappa_prime[q] * marks.atoms[q].mass;
    return s;
}

void Generator::validate(const MarkMeasure& marks, std::uint64_t seed,
                         std::size_t n_pairs, double range) const {
    if (!f) throw std::invalid_argument("Generator: missing driver");
    if (lipschitz < 0.0) throw std::invalid_argument("Generator: negative Lipschitz constant");
    kappa_norm_sq(marks);
    CounterRng g(seed, StreamKind::Generic);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const double t = g.next_uniform();
        const double x = range * (2.0 * g.next_uniform() - 1.0);
        const double y1 = range * (2.0 * g.next_uniform() - 1.0);
        const double z1 = range * (2.0 * g.next_uniform() - 1.0);
        const double y2 = range * (2.0 * g.next_uniform() - 1.0);
        const double z2 = range * (2.0 * g.next_uniform() - 1.0);
        const double lhs = std::fabs(f(t, x, y1, z1) - f(t, x, y2, z2));
        const double rhs = lipschitz * (std::fabs(y1 - y2) + std::fabs(z1 - z2));
        if (lhs > rhs * (1.0 + 1e-9) + 1e-12)
            throw std::runtime_error("Generator: Lipschitz spot-check failed at pair " +
                                     std::to_string(i));
    }
}

Generator make_zero_generator(const MarkMeasure& marks) {
    Generator g;
    g.f = [](double, double, double, double) { return 0.0; };
    g.lipschitz = 0.0;
    g.kappa_prime.assign(marks.size(), 1.0);
    return g;
}

Generator make_constant_generator(const MarkMeasure& marks, double c) {
    Generator g;
    g.f = [c](double, double, double, double) { return c; };
    g.lipschitz = 0.0;
    g.kappa_prime.assign(marks.size(), 1.0);
    return g;
}

Generator make_affine_generator(const MarkMeasure& marks, double a, double b, double c) {
    Generator g;
    g.f = [a, b, c](double, double, double y, double z) { return a * y + b * z + c; };
    g.lipschitz = std::fabs(a) + std::fabs(b);
    g.kappa_prime.assign(marks.size(), 1.0);
    return g;
}

} // namespace levylab
