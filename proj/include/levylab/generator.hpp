#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "levylab/model.hpp"

namespace levylab {

// BSDE driver f(t, x, y, zbar) with its declared Lipschitz constant and the
// density kappa' of the Z-coupling measure against mu, given per mark atom.
struct Generator {
    std::function<double(double, double, double, double)> f;
    double lipschitz = 0.0;
    std::vector<double> kappa_prime;  // aligned with MarkMeasure::atoms

    double kappa_norm_sq(const MarkMeasure& marks) const;

    // spot-check the declared Lipschitz constant on random argument pairs;
    // throws when a violating pair is found
    void validate(const MarkMeasure& marks, std::uint64_t seed,
                  std::size_t n_pairs = 10000, double range = 5.0) const;
};

Generator make_zero_generator(const MarkMeasure& marks);
Generator make_constant_generator(const MarkMeasure& marks, double c);
// f(t,x,y,z) = a y + b z + c
Generator make_affine_generator(const MarkMeasure& marks, double a, double b, double c);

} // namespace levylab
