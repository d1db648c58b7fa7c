#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "levylab/paths.hpp"

namespace levylab {

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Deterministic, which matters for bit-identical reruns.
struct SymmetricEigen {
    std::vector<double> values;   // ascending
    std::vector<double> vectors;  // column-major, p x p

    static SymmetricEigen compute(const std::vector<double>& a, std::size_t p);
};

struct RegressionResult {
    std::vector<double> coef;
    double condition = 0.0;  // eigenvalue ratio of the Gram matrix
    bool ok = false;
    std::string message;
};

// Ordinary least squares via the normal equations, solved through the
// spectral decomposition of the Gram matrix. The Gram accumulation runs
// over fixed-size path blocks combined in index order, so the result does
// not depend on the thread count. Rank deficiency reports instead of
// silently truncating. Fits rows [row_begin, row_begin + n_rows).
RegressionResult fit_least_squares(const std::vector<double>& features, std::size_t n_rows,
                                   std::size_t n_cols, const std::vector<double>& target,
                                   double rank_tol = 1e-12, std::size_t row_begin = 0);

std::vector<double> predict(const std::vector<double>& features, std::size_t n_rows,
                            std::size_t n_cols, const std::vector<double>& coef);

enum class BasisVars {
    X,           // X_{t_i} plus completed coarse increments
    Components,  // additionally the Brownian part and per-atom jump counts
};

struct RegressionSpec {
    int degree = 3;
    BasisVars vars = BasisVars::X;
    std::size_t fit_paths = 0;   // number of paths the fit sees; 0 = all
    std::size_t fit_offset = 0;  // first path of the fit window
};

// Polynomial basis in the filtration variables at a net point: the
// completed coarse increments X_{r_j} - X_{r_{j-1}} for r_j <= t_i and the
// running increment since the last coarse point. All monomials up to the
// requested total degree, constant term first. Features are standardized
// in-place (sample mean/scale over the fit rows) to tame conditioning.
class BasisBuilder {
public:
    BasisBuilder(const PathEnsemble& paths, std::size_t t_index, const RegressionSpec& spec);

    std::size_t n_cols() const { return n_cols_; }
    // features for all paths, row-major n_paths x n_cols
    const std::vector<double>& features() const { return features_; }

private:
    std::size_t raw_vars(const PathEnsemble& paths, std::size_t t_index,
                         std::size_t path, std::vector<double>& out) const;

    RegressionSpec spec_;
    std::size_t n_cols_ = 0;
    std::vector<double> features_;
    std::vector<std::vector<int>> monomials_;  // exponent vectors
};

// regression of `target` on the basis at t_index; returns fitted values per
// path (the conditional-expectation surrogate)
struct ConditionalFit {
    std::vector<double> fitted;
    double condition = 0.0;
    bool ok = false;
    std::string message;
};

ConditionalFit conditional_expectation(const PathEnsemble& paths, std::size_t t_index,
                                       const std::vector<double>& target,
                                       const RegressionSpec& spec,
                                       bool allow_failure = false);

} // namespace levylab
