#pragma once

#include <cstddef>
#include <span>

namespace levylab {

// The beta sequence that separates the pointwise Z-norm growth condition
// from the weighted-difference condition: beta_1^2 = 1, beta_2^2 = 0,
// beta_n^2 = 1/(n (log(n-1))^2) for n >= 3. Only the norms enter; the
// orthonormal basis behind it is never materialized.
struct CounterexampleSpec {
    std::size_t truncation = 200000;

    static double beta_sq(std::size_t n);
    // smallest N with tail bound sum_{n>N} n beta_n^2 s^{n-1} < tail_tol
    static std::size_t required_truncation(double s, double tail_tol = 1e-10);
};

struct CounterexampleValue {
    double z_norm_sq = 0.0;    // sum_{n>=1} n beta_n^2 s^{n-1}, truncated
    double asymptotic = 0.0;   // (1-s)^{-1} (1 - log(1-s))^{-2}
    double tail_bound = 0.0;
    std::size_t terms = 0;
};

// truncated series and the comparator; throws for s >= 1 or an
// insufficient truncation
CounterexampleValue counterexample_series(const CounterexampleSpec& spec, double s);

// sum_{n>=3} alpha_n^2 (log(n-1))^{-2} (t^{n-1} - s^{n-1}) for weights
// alpha (alpha[0] is alpha_1); bounded by 1/(log 2)^2 for unit weights
double counterexample_weighted_difference(std::span<const double> alpha, double s, double t);

// the universal bound 1/(log 2)^2
double counterexample_weighted_bound();

} // namespace levylab
