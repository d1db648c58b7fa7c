#include "levylab/counterexample.hpp"

#include <cmath>
#include <stdexcept>

namespace levylab {

double CounterexampleSpec::beta_sq(std::size_t n) {
    if (n == 1) return 1.0;
    if (n == 2) return 0.0;
    const double l = std::log(static_cast<double>(n - 1));
    return 1.0 / (static_cast<double>(n) * l * l);
}

std::size_t CounterexampleSpec::required_truncation(double s, double tail_tol) {
    if (s <= 0.0) return 3;
    // tail sum_{n>N} s^{n-1}/(log(n-1))^2 <= s^N / ((1-s) (log(N-1))^2)
    std::size_t n = 8;
    while (n < 100000000) {
        const double l = std::log(static_cast<double>(n - 1));
        const double bound = std::pow(s, static_cast<double>(n)) / ((1.0 - s) * l * l);
        if (bound < tail_tol) return n;
        n = n < 1024 ? n * 2 : n + n / 4;
    }
    throw std::runtime_error("required_truncation: no admissible truncation found");
}

CounterexampleValue counterexample_series(const CounterexampleSpec& spec, double s) {
    if (s < 0.0 || s >= 1.0)
        throw std::invalid_argument("counterexample_series: need 0 <= s < 1");
    CounterexampleValue out;
    const std::size_t needed = CounterexampleSpec::required_truncation(s);
    if (spec.truncation < needed)
        throw std::invalid_argument("counterexample_series: truncation too small for requested s");
    const std::size_t N = spec.truncation;
    // n beta_n^2 s^{n-1} = s^{n-1}/(log(n-1))^2 for n >= 3; n = 1 gives 1
    double sum = 1.0;
    double s_pow = s * s;  // s^{n-1} at n = 3
    for (std::size_t n = 3; n <= N; ++n) {
        const double l = std::log(static_cast<double>(n - 1));
        sum += s_pow / (l * l);
        s_pow *= s;
        if (s_pow < 1e-300) break;
    }
    out.z_norm_sq = sum;
    const double log_n = std::log(static_cast<double>(N - 1));
    out.tail_bound = s > 0.0
                         ? std::pow(s, static_cast<double>(N)) / ((1.0 - s) * log_n * log_n)
                         : 0.0;
    const double one_minus = 1.0 - s;
    const double lg = 1.0 - std::log(one_minus);
    out.asymptotic = 1.0 / (one_minus * lg * lg);
    out.terms = N;
    return out;
}

double counterexample_weighted_difference(std::span<const double> alpha, double s, double t) {
    if (!(0.0 <= s && s <= t && t <= 1.0))
        throw std::invalid_argument("counterexample_weighted_difference: need 0 <= s <= t <= 1");
    double sum = 0.0;
    for (std::size_t i = 2; i < alpha.size(); ++i) {
        const std::size_t n = i + 1;  // alpha[i] multiplies p_n
        const double l = std::log(static_cast<double>(n - 1));
        sum += alpha[i] * alpha[i] *
               (std::pow(t, static_cast<double>(n - 1)) - std::pow(s, static_cast<double>(n - 1))) /
               (l * l);
    }
    return sum;
}

double counterexample_weighted_bound() {
    const double l2 = std::log(2.0);
    return 1.0 / (l2 * l2);
}

} // namespace levylab
