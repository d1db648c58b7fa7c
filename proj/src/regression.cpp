#include "levylab/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "levylab/parallel.hpp"

namespace levylab {

SymmetricEigen SymmetricEigen::compute(const std::vector<double>& a_in, std::size_t p) {
    if (a_in.size() != p * p) throw std::invalid_argument("SymmetricEigen: bad dimensions");
    std::vector<double> a = a_in;
    std::vector<double> v(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) v[i * p + i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i + 1; j < p; ++j) off += a[i * p + j] * a[i * p + j];
        if (off < 1e-30) break;
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = i + 1; j < p; ++j) {
                const double apq = a[i * p + j];
                if (std::fabs(apq) < 1e-300) continue;
                const double app = a[i * p + i];
                const double aqq = a[j * p + j];
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < p; ++k) {
                    const double aik = a[i * p + k];
                    const double ajk = a[j * p + k];
                    a[i * p + k] = c * aik - s * ajk;
                    a[j * p + k] = s * aik + c * ajk;
                }
                for (std::size_t k = 0; k < p; ++k) {
                    const double aki = a[k * p + i];
                    const double akj = a[k * p + j];
                    a[k * p + i] = c * aki - s * akj;
                    a[k * p + j] = s * aki + c * akj;
                    const double vki = v[k * p + i];
                    const double vkj = v[k * p + j];
                    v[k * p + i] = c * vki - s * vkj;
                    v[k * p + j] = s * vki + c * vkj;
                }
            }
        }
    }
    SymmetricEigen out;
    out.values.resize(p);
    for (std::size_t i = 0; i < p; ++i) out.values[i] = a[i * p + i];
    // sort ascending, permuting columns accordingly
    std::vector<std::size_t> order(p);
    for (std::size_t i = 0; i < p; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t l, std::size_t r) { return out.values[l] < out.values[r]; });
    SymmetricEigen sorted;
    sorted.values.resize(p);
    sorted.vectors.assign(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        sorted.values[i] = out.values[order[i]];
        for (std::size_t k = 0; k < p; ++k) sorted.vectors[k * p + i] = v[k * p + order[i]];
    }
    return sorted;
}

RegressionResult fit_least_squares(const std::vector<double>& features, std::size_t n_rows,
                                   std::size_t n_cols, const std::vector<double>& target,
                                   double rank_tol, std::size_t row_begin) {
    RegressionResult res;
    if (features.size() < (row_begin + n_rows) * n_cols || target.size() < row_begin + n_rows)
        throw std::invalid_argument("fit_least_squares: dimension mismatch");
    if (n_rows < n_cols) {
        res.message = "fewer rows than basis functions";
        return res;
    }
    const std::size_t p = n_cols;
    constexpr std::size_t kBlock = 16384;
    const std::size_t n_blocks = (n_rows + kBlock - 1) / kBlock;
    std::vector<double> partial((p * p + p) * n_blocks, 0.0);
    parallel_chunks(n_blocks, 1, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            double* gram = &partial[(p * p + p) * b];
            double* rhs = gram + p * p;
            const std::size_t lo = row_begin + b * kBlock;
            const std::size_t hi = std::min(row_begin + n_rows, lo + kBlock);
            for (std::size_t r = lo; r < hi; ++r) {
                const double* row = &features[r * p];
                const double y = target[r];
                for (std::size_t i = 0; i < p; ++i) {
                    rhs[i] += row[i] * y;
                    for (std::size_t j = i; j < p; ++j) gram[i * p + j] += row[i] * row[j];
                }
            }
        }
    });
    std::vector<double> gram(p * p, 0.0);
    std::vector<double> rhs(p, 0.0);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        const double* g = &partial[(p * p + p) * b];
        for (std::size_t i = 0; i < p * p; ++i) gram[i] += g[i];
        for (std::size_t i = 0; i < p; ++i) rhs[i] += g[p * p + i];
    }
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < i; ++j) gram[i * p + j] = gram[j * p + i];

    const SymmetricEigen eig = SymmetricEigen::compute(gram, p);
    const double lam_max = eig.values.back();
    const double lam_min = eig.values.front();
    res.condition = lam_min > 0.0 ? lam_max / lam_min : std::numeric_limits<double>::infinity();
    if (!(lam_max > 0.0) || lam_min <= rank_tol * lam_max) {
        res.message = "rank-deficient regression, condition number " + std::to_string(res.condition);
        return res;
    }
    // coef = V diag(1/lambda) V^T rhs
    std::vector<double> tmp(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < p; ++k) s += eig.vectors[k * p + i] * rhs[k];
        tmp[i] = s / eig.values[i];
    }
    res.coef.assign(p, 0.0);
    for (std::size_t k = 0; k < p; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < p; ++i) s += eig.vectors[k * p + i] * tmp[i];
        res.coef[k] = s;
    }
    res.ok = true;
    return res;
}

std::vector<double> predict(const std::vector<double>& features, std::size_t n_rows,
                            std::size_t n_cols, const std::vector<double>& coef) {
    std::vector<double> out(n_rows, 0.0);
    parallel_chunks(n_rows, 16384, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const double* row = &features[r * n_cols];
            double s = 0.0;
            for (std::size_t j = 0; j < n_cols; ++j) s += row[j] * coef[j];
            out[r] = s;
        }
    });
    return out;
}

namespace {
void enumerate_monomials(std::size_t n_vars, int max_degree,
                         std::vector<int>& current, std::size_t var,
                         int remaining, std::vector<std::vector<int>>& out) {
    if (var == n_vars) {
        out.push_back(current);
        return;
    }
    for (int d = 0; d <= remaining; ++d) {
        current[var] = d;
        enumerate_monomials(n_vars, max_degree, current, var + 1, remaining - d, out);
    }
    current[var] = 0;
}
} // namespace

std::size_t BasisBuilder::raw_vars(const PathEnsemble& paths, std::size_t t_index,
                                   std::size_t path, std::vector<double>& out) const {
    const TimeNet& net = paths.net();
    const double t = net.points[t_index];
    std::size_t n = 0;
    double prev_x = 0.0;
    double prev_r = 0.0;
    for (std::size_t k = 1; k < net.coarse.size(); ++k) {
        if (net.coarse[k] > t * (1.0 + 1e-12) + 1e-15) break;
        const double xr = paths.x(path, net.index_of(net.coarse[k]));
        out[n++] = xr - prev_x;
        prev_x = xr;
        prev_r = net.coarse[k];
    }
    if (t > prev_r + 1e-15)  // running increment since the last coarse point
        out[n++] = paths.x(path, t_index) - prev_x;
    if (spec_.vars == BasisVars::Components) {
        const auto* bundle = dynamic_cast<const PathBundle*>(&paths);
        if (bundle) {
            const auto& model = bundle->model();
            for (std::uint32_t j = 0; j < model.jump_atoms.size(); ++j)
                out[n++] = static_cast<double>(bundle->jump_count(path, 0.0, t, j));
        }
    }
    return n;
}

BasisBuilder::BasisBuilder(const PathEnsemble& paths, std::size_t t_index,
                           const RegressionSpec& spec)
    : spec_(spec) {
    const std::size_t n_paths = paths.n_paths();
    const std::size_t var_cap = paths.net().coarse.size() + paths.marks().size() + 4;
    std::vector<double> probe(var_cap, 0.0);
    const std::size_t n_vars = raw_vars(paths, t_index, 0, probe);

    monomials_.clear();
    if (n_vars == 0) {
        monomials_.push_back({});
    } else {
        std::vector<int> current(n_vars, 0);
        enumerate_monomials(n_vars, spec.degree, current, 0, spec.degree, monomials_);
        // constant term first
        std::sort(monomials_.begin(), monomials_.end(),
                  [](const std::vector<int>& a, const std::vector<int>& b) {
                      int da = 0, db = 0;
                      for (int x : a) da += x;
                      for (int x : b) db += x;
                      return da != db ? da < db : a < b;
                  });
    }
    n_cols_ = monomials_.size();
    features_.assign(n_paths * n_cols_, 0.0);

    // standardization constants from the first pass (serial, fixed order)
    std::vector<double> raw(n_paths * std::max<std::size_t>(n_vars, 1), 0.0);
    parallel_chunks(n_paths, 4096, [&](std::size_t p0, std::size_t p1) {
        std::vector<double> vars(var_cap, 0.0);
        for (std::size_t p = p0; p < p1; ++p) {
            raw_vars(paths, t_index, p, vars);
            for (std::size_t v = 0; v < n_vars; ++v) raw[p * n_vars + v] = vars[v];
        }
    });
    std::vector<double> mean(n_vars, 0.0), scale(n_vars, 1.0);
    for (std::size_t v = 0; v < n_vars; ++v) {
        double s = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) s += raw[p * n_vars + v];
        mean[v] = s / static_cast<double>(n_paths);
        double ss = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const double d = raw[p * n_vars + v] - mean[v];
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(n_paths - 1, 1)));
        scale[v] = sd > 1e-300 ? sd : 1.0;
    }
    parallel_chunks(n_paths, 4096, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            for (std::size_t m = 0; m < n_cols_; ++m) {
                double val = 1.0;
                for (std::size_t v = 0; v < n_vars; ++v) {
                    const int d = monomials_[m][v];
                    if (d == 0) continue;
                    const double z = (raw[p * n_vars + v] - mean[v]) / scale[v];
                    for (int e = 0; e < d; ++e) val *= z;
                }
                features_[p * n_cols_ + m] = val;
            }
        }
    });
}

ConditionalFit conditional_expectation(const PathEnsemble& paths, std::size_t t_index,
                                       const std::vector<double>& target,
                                       const RegressionSpec& spec, bool allow_failure) {
    ConditionalFit out;
    const std::size_t offset = std::min(spec.fit_offset, paths.n_paths() - 1);
    const std::size_t fit_rows =
        spec.fit_paths > 0 ? std::min(spec.fit_paths, paths.n_paths() - offset)
                           : paths.n_paths() - offset;
    if (t_index == 0) {
        // F_0 is trivial: the conditional expectation is the plain mean
        double s = 0.0;
        for (std::size_t r = offset; r < offset + fit_rows; ++r) s += target[r];
        out.fitted.assign(target.size(), s / static_cast<double>(fit_rows));
        out.condition = 1.0;
        out.ok = true;
        return out;
    }
    BasisBuilder basis(paths, t_index, spec);
    RegressionResult fit = fit_least_squares(basis.features(), fit_rows,
                                             basis.n_cols(), target, 1e-12, offset);
    out.condition = fit.condition;
    out.message = fit.message;
    if (!fit.ok) {
        if (allow_failure) return out;
        throw std::runtime_error("conditional_expectation: " + fit.message);
    }
    out.fitted = predict(basis.features(), paths.n_paths(), basis.n_cols(), fit.coef);
    out.ok = true;
    return out;
}

} // namespace levylab
