#include "levylab/bsde.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "levylab/parallel.hpp"

namespace levylab {

double BsdeSolution::s_norm_sq(const TimeNet& net) const {
    (void)net;
    double total = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        double m = 0.0;
        for (std::size_t i = 0; i < n_points; ++i)
            m = std::max(m, y[p * n_points + i] * y[p * n_points + i]);
        total += m;
    }
    return total / static_cast<double>(n_paths);
}

double BsdeSolution::zbar_norm_sq(const TimeNet& net) const {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < n_points; ++i) {
        double s = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const double z = z_bar[p * (n_points - 1) + i];
            s += z * z;
        }
        total += net.dt(i) * s / static_cast<double>(n_paths);
    }
    return total;
}

std::vector<double> zbar_target(const PathEnsemble& paths, const std::vector<double>& eta_at_a,
                                std::size_t s_index, std::size_t a_index,
                                const std::vector<double>& kappa_prime) {
    if (a_index <= s_index) throw std::invalid_argument("zbar_target: need s < a");
    const TimeNet& net = paths.net();
    const std::size_t n_paths = paths.n_paths();
    const double span = net.points[a_index] - net.points[s_index];
    std::vector<double> out(n_paths, 0.0);
    parallel_chunks(n_paths, 4096, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            double i1 = 0.0;
            for (std::size_t i = s_index; i < a_index; ++i)
                for (std::size_t q = 0; q < kappa_prime.size(); ++q)
                    i1 += kappa_prime[q] * paths.m_increment_idx(p, i, q);
            out[p] = eta_at_a[p] * i1 / span;
        }
    });
    return out;
}

namespace {

void check_mesh(const TimeNet& net, const Generator& gen) {
    for (std::size_t i = 0; i < net.n_intervals(); ++i)
        if (net.dt(i) * gen.lipschitz >= 1.0)
            throw std::runtime_error(
                "solve_backward: dt * L_f >= 1 on interval " + std::to_string(i) +
                "; refine the time net");
}

// implicit step y = base + dt f(t, x, y, z); contraction since dt L_f < 1
double implicit_y(const Generator& gen, double t, double x, double base, double z,
                  double dt, int max_iter, double tol, double* residual) {
    double y = base;
    double r = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const double next = base + dt * gen.f(t, x, y, z);
        r = std::fabs(next - y);
        y = next;
        if (r <= tol) break;
    }
    if (residual) *residual = std::max(*residual, r);
    return y;
}

} // namespace

BsdeSolution solve_backward(const PathEnsemble& paths, const Generator& gen,
                            const TerminalCondition& xi, const SolverOptions& opt) {
    const TimeNet& net = paths.net();
    check_mesh(net, gen);
    if (gen.kappa_prime.size() != paths.marks().size())
        throw std::invalid_argument("solve_backward: kappa_prime does not match mark atoms");

    const std::size_t n_paths = paths.n_paths();
    const std::size_t n_points = net.points.size();
    BsdeSolution sol;
    sol.n_paths = n_paths;
    sol.n_points = n_points;
    sol.y.assign(n_paths * n_points, 0.0);
    sol.z_bar.assign(n_paths * (n_points - 1), 0.0);
    if (opt.z_per_atom)
        sol.z_atom.assign(paths.marks().size(),
                          std::vector<double>(n_paths * (n_points - 1), 0.0));
    sol.diagnostics.resize(n_points - 1);

    // terminal values, path by path
    std::vector<double> y_next(n_paths, 0.0);
    parallel_chunks(n_paths, 2048, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) y_next[p] = xi(paths, p);
    });
    for (std::size_t p = 0; p < n_paths; ++p) sol.y[p * n_points + (n_points - 1)] = y_next[p];

    const std::size_t fit_off = std::min(opt.basis.fit_offset, n_paths - 1);
    const std::size_t fit_rows = opt.basis.fit_paths > 0
                                     ? std::min(opt.basis.fit_paths, n_paths - fit_off)
                                     : n_paths - fit_off;

    for (std::size_t i = n_points - 1; i-- > 0;) {
        const double t = net.points[i];
        const double dt = net.dt(i);
        StepDiagnostics diag;

        // regression basis at t_i, shared by the Y and Z regressions
        std::vector<double> e_y;
        double cond_y = 1.0, cond_z = 1.0;
        if (i == 0) {
            double s = 0.0;
            for (std::size_t p = fit_off; p < fit_off + fit_rows; ++p) s += y_next[p];
            e_y.assign(n_paths, s / static_cast<double>(fit_rows));
            const auto zt = zbar_target(paths, y_next, 0, 1, gen.kappa_prime);
            double sz = 0.0;
            for (std::size_t p = fit_off; p < fit_off + fit_rows; ++p) sz += zt[p];
            const double zmean = sz / static_cast<double>(fit_rows);
            for (std::size_t p = 0; p < n_paths; ++p) sol.z_bar[p * (n_points - 1)] = zmean;
            if (opt.z_per_atom) {
                for (std::size_t q = 0; q < paths.marks().size(); ++q) {
                    std::vector<double> kq(paths.marks().size(), 0.0);
                    kq[q] = 1.0;
                    const auto ztq = zbar_target(paths, y_next, 0, 1, kq);
                    double sq = 0.0;
                    for (std::size_t p = fit_off; p < fit_off + fit_rows; ++p) sq += ztq[p];
                    const double zq = sq / (static_cast<double>(fit_rows) * paths.marks().atoms[q].mass);
                    for (std::size_t p = 0; p < n_paths; ++p) sol.z_atom[q][p * (n_points - 1)] = zq;
                }
            }
            diag.basis_size = 1;
        } else {
            BasisBuilder basis(paths, i, opt.basis);
            diag.basis_size = basis.n_cols();

            const auto zt = zbar_target(paths, y_next, i, i + 1, gen.kappa_prime);
            RegressionResult zfit =
                fit_least_squares(basis.features(), fit_rows, basis.n_cols(), zt, 1e-12, fit_off);
            if (!zfit.ok)
                throw std::runtime_error("solve_backward: Z regression at step " +
                                         std::to_string(i) + ": " + zfit.message);
            cond_z = zfit.condition;
            const auto zhat = predict(basis.features(), n_paths, basis.n_cols(), zfit.coef);
            for (std::size_t p = 0; p < n_paths; ++p) sol.z_bar[p * (n_points - 1) + i] = zhat[p];

            if (opt.z_per_atom) {
                for (std::size_t q = 0; q < paths.marks().size(); ++q) {
                    std::vector<double> kq(paths.marks().size(), 0.0);
                    kq[q] = 1.0;
                    auto ztq = zbar_target(paths, y_next, i, i + 1, kq);
                    const double mass = paths.marks().atoms[q].mass;
                    for (double& v : ztq) v /= mass;
                    RegressionResult qfit = fit_least_squares(basis.features(), fit_rows,
                                                               basis.n_cols(), ztq, 1e-12, fit_off);
                    if (!qfit.ok) {
                        if (!opt.allow_z_atom_failure)
                            throw std::runtime_error(
                                "solve_backward: per-atom Z regression at step " +
                                std::to_string(i) + ": " + qfit.message);
                        diag.z_atom_excluded = true;
                        for (std::size_t p = 0; p < n_paths; ++p)
                            sol.z_atom[q][p * (n_points - 1) + i] =
                                std::numeric_limits<double>::quiet_NaN();
                        continue;
                    }
                    const auto qhat = predict(basis.features(), n_paths, basis.n_cols(), qfit.coef);
                    for (std::size_t p = 0; p < n_paths; ++p)
                        sol.z_atom[q][p * (n_points - 1) + i] = qhat[p];
                }
            }

            RegressionResult yfit =
                fit_least_squares(basis.features(), fit_rows, basis.n_cols(), y_next, 1e-12, fit_off);
            if (!yfit.ok)
                throw std::runtime_error("solve_backward: Y regression at step " +
                                         std::to_string(i) + ": " + yfit.message);
            cond_y = yfit.condition;
            e_y = predict(basis.features(), n_paths, basis.n_cols(), yfit.coef);
        }

        diag.condition_y = cond_y;
        diag.condition_z = cond_z;

        // implicit Y step, pathwise
        std::vector<double> residuals((n_paths + 4095) / 4096, 0.0);
        parallel_chunks(n_paths, 4096, [&](std::size_t p0, std::size_t p1) {
            double res = 0.0;
            for (std::size_t p = p0; p < p1; ++p) {
                const double z = sol.z_bar[p * (n_points - 1) + i];
                sol.y[p * n_points + i] =
                    implicit_y(gen, t, paths.x(p, i), e_y[p], z, dt, opt.max_fixed_point,
                               opt.fixed_point_tol, &res);
            }
            residuals[p0 / 4096] = res;
        });
        for (double r : residuals) diag.fixed_point_residual = std::max(diag.fixed_point_residual, r);
        sol.diagnostics[i] = diag;
        for (std::size_t p = 0; p < n_paths; ++p) y_next[p] = sol.y[p * n_points + i];
    }
    return sol;
}

std::vector<BsdeSolution> picard_solve(const PathEnsemble& paths, const Generator& gen,
                                       const TerminalCondition& xi, const SolverOptions& opt,
                                       int iterations) {
    if (iterations < 1) throw std::invalid_argument("picard_solve: need at least one iteration");
    const TimeNet& net = paths.net();
    check_mesh(net, gen);
    const std::size_t n_paths = paths.n_paths();
    const std::size_t n_points = net.points.size();
    const std::size_t fit_rows =
        opt.basis.fit_paths > 0 ? std::min(opt.basis.fit_paths, n_paths) : n_paths;

    std::vector<double> xi_vals(n_paths, 0.0);
    parallel_chunks(n_paths, 2048, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) xi_vals[p] = xi(paths, p);
    });

    std::vector<BsdeSolution> iterates;
    BsdeSolution prev;
    prev.n_paths = n_paths;
    prev.n_points = n_points;
    prev.y.assign(n_paths * n_points, 0.0);
    prev.z_bar.assign(n_paths * (n_points - 1), 0.0);

    for (int k = 0; k < iterations; ++k) {
        BsdeSolution cur = prev;  // shapes
        cur.diagnostics.assign(n_points - 1, {});
        // driver values along the previous iterate
        std::vector<double> fvals(n_paths * (n_points - 1), 0.0);
        parallel_chunks(n_paths, 2048, [&](std::size_t p0, std::size_t p1) {
            for (std::size_t p = p0; p < p1; ++p)
                for (std::size_t i = 0; i + 1 < n_points; ++i)
                    fvals[p * (n_points - 1) + i] =
                        gen.f(net.points[i], paths.x(p, i), prev.y[p * n_points + i],
                              prev.z_bar[p * (n_points - 1) + i]);
        });
        for (std::size_t p = 0; p < n_paths; ++p) cur.y[p * n_points + n_points - 1] = xi_vals[p];

        // running terminal-plus-integral functional, regressed per net point
        std::vector<double> target = xi_vals;
        for (std::size_t i = n_points - 1; i-- > 0;) {
            for (std::size_t p = 0; p < n_paths; ++p)
                target[p] += net.dt(i) * fvals[p * (n_points - 1) + i];
            ConditionalFit fit;
            RegressionSpec spec = opt.basis;
            spec.fit_paths = fit_rows;
            fit = conditional_expectation(paths, i, target, spec);
            for (std::size_t p = 0; p < n_paths; ++p) cur.y[p * n_points + i] = fit.fitted[p];
            cur.diagnostics[i].condition_y = fit.condition;

            const auto zt = zbar_target(paths, target, i, i + 1, gen.kappa_prime);
            ConditionalFit zfit = conditional_expectation(paths, i, zt, spec);
            for (std::size_t p = 0; p < n_paths; ++p)
                cur.z_bar[p * (n_points - 1) + i] = zfit.fitted[p];
            cur.diagnostics[i].condition_z = zfit.condition;
        }
        iterates.push_back(cur);
        prev = std::move(cur);
    }
    return iterates;
}

StabilityGap stability_gap(const PathEnsemble& paths, const TimeNet& net,
                           const BsdeSolution& sol, const BsdeSolution& sol_prime,
                           const TerminalCondition& xi, const TerminalCondition& xi_prime,
                           const Generator& gen, const Generator& gen_prime) {
    if (sol.n_paths != sol_prime.n_paths || sol.n_points != sol_prime.n_points)
        throw std::invalid_argument("stability_gap: mismatched solutions");
    const std::size_t n_paths = sol.n_paths;
    const std::size_t n_points = sol.n_points;

    double s_gap = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        double m = 0.0;
        for (std::size_t i = 0; i < n_points; ++i) {
            const double d = sol.y[p * n_points + i] - sol_prime.y[p * n_points + i];
            m = std::max(m, d * d);
        }
        s_gap += m;
    }
    s_gap /= static_cast<double>(n_paths);

    double z_gap = 0.0;
    for (std::size_t i = 0; i + 1 < n_points; ++i) {
        double s = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const double d =
                sol.z_bar[p * (n_points - 1) + i] - sol_prime.z_bar[p * (n_points - 1) + i];
            s += d * d;
        }
        z_gap += net.dt(i) * s / static_cast<double>(n_paths);
    }

    StabilityGap out;
    out.lhs = s_gap + z_gap;

    double xg = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double d = xi(paths, p) - xi_prime(paths, p);
        xg += d * d;
    }
    out.xi_gap_sq = xg / static_cast<double>(n_paths);

    double gg = 0.0;
    for (std::size_t i = 0; i + 1 < n_points; ++i) {
        double s = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) {
            const double y = sol.y[p * n_points + i];
            const double z = sol.z_bar[p * (n_points - 1) + i];
            const double d = gen.f(net.points[i], paths.x(p, i), y, z) -
                             gen_prime.f(net.points[i], paths.x(p, i), y, z);
            s += d * d;
        }
        gg += net.dt(i) * s / static_cast<double>(n_paths);
    }
    out.generator_gap_sq = gg;
    const double denom = out.xi_gap_sq + out.generator_gap_sq;
    out.ratio = denom > 0.0 ? out.lhs / denom : 0.0;
    return out;
}

} // namespace levylab
