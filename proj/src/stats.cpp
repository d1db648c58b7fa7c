#include "levylab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace levylab {

MeanSe mean_se(std::span<const double> values) {
    MeanSe r;
    r.n = values.size();
    if (r.n == 0) return r;
    double s = 0.0;
    for (double v : values) s += v;
    r.mean = s / static_cast<double>(r.n);
    if (r.n > 1) {
        double ss = 0.0;
        for (double v : values) {
            const double d = v - r.mean;
            ss += d * d;
        }
        const double var = ss / static_cast<double>(r.n - 1);
        r.se = std::sqrt(var / static_cast<double>(r.n));
    }
    return r;
}

double sample_mean(std::span<const double> values) { return mean_se(values).mean; }

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = sample_mean(values);
    double ss = 0.0;
    for (double v : values) {
        const double d = v - m;
        ss += d * d;
    }
    return ss / static_cast<double>(values.size() - 1);
}

double sample_covariance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("sample_covariance: size mismatch");
    if (a.size() < 2) return 0.0;
    const double ma = sample_mean(a);
    const double mb = sample_mean(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size() - 1);
}

double sample_correlation(std::span<const double> a, std::span<const double> b) {
    const double c = sample_covariance(a, b);
    const double va = sample_variance(a);
    const double vb = sample_variance(b);
    if (va <= 0.0 || vb <= 0.0) return 0.0;
    return c / std::sqrt(va * vb);
}

double sample_max(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("sample_max: empty");
    double m = values[0];
    for (double v : values) m = std::max(m, v);
    return m;
}

namespace {
// asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2)
double kolmogorov_q(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}
} // namespace

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double x = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= x) ++ia;
        while (ib < b.size() && b[ib] <= x) ++ib;
        d = std::max(d, std::fabs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
    }
    KsResult r;
    r.statistic = d;
    const double ne = na * nb / (na + nb);
    // Stephens' finite-sample adjustment
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    r.p_value = kolmogorov_q(lambda);
    return r;
}

double golden_section_minimize(const std::function<double(double)>& f,
                               double lo, double hi, double tol) {
    if (!(hi > lo)) throw std::invalid_argument("golden_section_minimize: bad interval");
    constexpr double phi = 0.61803398874989484820;
    double a = lo, b = hi;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace levylab
