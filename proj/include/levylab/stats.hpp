#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace levylab {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

// serial reduction in index order so results do not depend on thread count
MeanSe mean_se(std::span<const double> values);

double sample_mean(std::span<const double> values);
double sample_variance(std::span<const double> values);  // unbiased
double sample_covariance(std::span<const double> a, std::span<const double> b);
double sample_correlation(std::span<const double> a, std::span<const double> b);
double sample_max(std::span<const double> values);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// two-sample Kolmogorov-Smirnov with the asymptotic p-value
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// golden-section minimisation of a unimodal function on [lo, hi]
double golden_section_minimize(const std::function<double(double)>& f,
                               double lo, double hi, double tol);

} // namespace levylab
