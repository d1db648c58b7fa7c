#pragma once

#include <functional>

namespace levylab {

// Adaptive Gauss-Kronrod (G7/K15) integration on [a,b] to a relative
// tolerance. Interval bisection driven by the K15-G7 error estimate.
double integrate_adaptive(const std::function<double(double)>& f,
                          double a, double b,
                          double rel_tol = 1e-8, int max_depth = 40);

} // namespace levylab
