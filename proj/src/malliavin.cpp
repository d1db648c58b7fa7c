#include "levylab/malliavin.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "levylab/parallel.hpp"

namespace levylab {

std::vector<double> difference_quotient(const PathFunctional& phi, const PathEnsemble& paths,
                                        const PerturbationSpec& spec) {
    if (spec.v == 0.0)
        throw std::invalid_argument("difference_quotient: v = 0 is the Brownian direction");
    if (spec.r < 0.0 || spec.r > paths.net().horizon())
        throw std::invalid_argument("difference_quotient: r outside [0, T]");
    const std::size_t n = paths.n_paths();
    std::vector<double> out(n, 0.0);
    parallel_chunks(n, 2048, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            PathView base{&paths, p};
            PathView bumped{&paths, p, spec.v, spec.r};
            out[p] = (phi(bumped) - phi(base)) / spec.v;
        }
    });
    return out;
}

std::vector<double> brownian_direction_derivative(const PathFunctional& phi,
                                                  const PathEnsemble& paths,
                                                  const PerturbationSpec& spec) {
    if (!(spec.h > 0.0)) throw std::invalid_argument("brownian_direction_derivative: h must be > 0");
    // the direction only exists when the model carries a Brownian mark
    bool has_brownian = false;
    for (const auto& a : paths.marks().atoms)
        if (a.mark == 0.0) has_brownian = true;
    if (!has_brownian)
        throw std::invalid_argument("brownian_direction_derivative: model has no Brownian part");
    const std::size_t n = paths.n_paths();
    std::vector<double> out(n, 0.0);
    parallel_chunks(n, 2048, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            PathView up{&paths, p, spec.h, spec.r};
            PathView down{&paths, p, -spec.h, spec.r};
            out[p] = (phi(up) - phi(down)) / (2.0 * spec.h);
        }
    });
    return out;
}

std::vector<double> malliavin_derivative(const PathFunctional& phi, const PathEnsemble& paths,
                                         const PerturbationSpec& spec) {
    return spec.v == 0.0 ? brownian_direction_derivative(phi, paths, spec)
                         : difference_quotient(phi, paths, spec);
}

namespace {

// backward solve for a driver that reads per-path state; the U analogue of
// solve_backward with an optional zero floor before a given net index
BsdeSolution solve_perturbed_backward(
    const PathEnsemble& paths,
    const std::function<double(std::size_t, std::size_t, double, double)>& driver,
    const std::vector<double>& terminal, double lipschitz,
    const std::vector<double>& kappa_prime, std::size_t zero_before,
    const SolverOptions& opt) {
    const TimeNet& net = paths.net();
    for (std::size_t i = 0; i < net.n_intervals(); ++i)
        if (net.dt(i) * lipschitz >= 1.0)
            throw std::runtime_error("solve_uv: dt * L_f >= 1; refine the time net");

    const std::size_t n_paths = paths.n_paths();
    const std::size_t n_points = net.points.size();
    BsdeSolution sol;
    sol.n_paths = n_paths;
    sol.n_points = n_points;
    sol.y.assign(n_paths * n_points, 0.0);
    sol.z_bar.assign(n_paths * (n_points - 1), 0.0);
    sol.diagnostics.resize(n_points - 1);

    std::vector<double> u_next = terminal;
    for (std::size_t p = 0; p < n_paths; ++p) sol.y[p * n_points + n_points - 1] = u_next[p];

    for (std::size_t i = n_points - 1; i-- > 0;) {
        if (i < zero_before) break;  // U and V vanish before r
        const double dt = net.dt(i);
        StepDiagnostics diag;
        std::vector<double> e_u;
        if (i == 0) {
            double s = 0.0;
            for (double v : u_next) s += v;
            e_u.assign(n_paths, s / static_cast<double>(n_paths));
            const auto zt = zbar_target(paths, u_next, 0, 1, kappa_prime);
            double sz = 0.0;
            for (double v : zt) sz += v;
            for (std::size_t p = 0; p < n_paths; ++p)
                sol.z_bar[p * (n_points - 1)] = sz / static_cast<double>(n_paths);
            diag.basis_size = 1;
        } else {
            BasisBuilder basis(paths, i, opt.basis);
            diag.basis_size = basis.n_cols();
            const auto zt = zbar_target(paths, u_next, i, i + 1, kappa_prime);
            RegressionResult zfit =
                fit_least_squares(basis.features(), n_paths, basis.n_cols(), zt);
            if (!zfit.ok)
                throw std::runtime_error("solve_uv: V regression at step " + std::to_string(i) +
                                         ": " + zfit.message);
            diag.condition_z = zfit.condition;
            const auto zhat = predict(basis.features(), n_paths, basis.n_cols(), zfit.coef);
            for (std::size_t p = 0; p < n_paths; ++p) sol.z_bar[p * (n_points - 1) + i] = zhat[p];

            RegressionResult ufit =
                fit_least_squares(basis.features(), n_paths, basis.n_cols(), u_next);
            if (!ufit.ok)
                throw std::runtime_error("solve_uv: U regression at step " + std::to_string(i) +
                                         ": " + ufit.message);
            diag.condition_y = ufit.condition;
            e_u = predict(basis.features(), n_paths, basis.n_cols(), ufit.coef);
        }

        std::vector<double> residuals((n_paths + 4095) / 4096, 0.0);
        parallel_chunks(n_paths, 4096, [&](std::size_t p0, std::size_t p1) {
            double res = 0.0;
            for (std::size_t p = p0; p < p1; ++p) {
                const double vbar = sol.z_bar[p * (n_points - 1) + i];
                double u = e_u[p];
                double r = 0.0;
                for (int it = 0; it < opt.max_fixed_point; ++it) {
                    const double next = e_u[p] + dt * driver(p, i, u, vbar);
                    r = std::fabs(next - u);
                    u = next;
                    if (r <= opt.fixed_point_tol) break;
                }
                res = std::max(res, r);
                sol.y[p * n_points + i] = u;
            }
            residuals[p0 / 4096] = res;
        });
        for (double r : residuals) diag.fixed_point_residual = std::max(diag.fixed_point_residual, r);
        sol.diagnostics[i] = diag;
        for (std::size_t p = 0; p < n_paths; ++p) u_next[p] = sol.y[p * n_points + i];
    }
    return sol;
}

} // namespace

BsdeSolution solve_uv(const PathEnsemble& paths, const Generator& gen,
                      const TerminalCondition& xi, const BsdeSolution& base,
                      const PerturbationSpec& spec, const SolverOptions& opt) {
    if (base.y.empty())
        throw std::invalid_argument("solve_uv: base solution missing");
    if (base.n_paths != paths.n_paths() || base.n_points != paths.net().points.size())
        throw std::invalid_argument("solve_uv: base solution does not match the bundle");
    const TimeNet& net = paths.net();
    const std::size_t n_points = net.points.size();

    // terminal D_{r,v} xi
    std::vector<double> terminal;
    if (xi.has_fn()) {
        terminal = malliavin_derivative(xi.fn, paths, spec);
    } else if (xi.kernel) {
        if (spec.v == 0.0 && paths.marks().atoms.front().mark != 0.0)
            throw std::invalid_argument("solve_uv: no Brownian direction for this model");
        const std::size_t atom = paths.marks().index_of_mark(spec.v);
        std::size_t cell = 0;
        for (std::size_t k = 0; k < xi.kernel->n_cells(); ++k)
            if (spec.r > xi.kernel->partition()[k] && spec.r <= xi.kernel->partition()[k + 1])
                cell = k;
        const ChaosKernelSet dk = xi.kernel->malliavin_kernel(cell, atom);
        terminal.assign(paths.n_paths(), 0.0);
        parallel_chunks(paths.n_paths(), 2048, [&](std::size_t p0, std::size_t p1) {
            for (std::size_t p = p0; p < p1; ++p) terminal[p] = dk.evaluate(paths, p);
        });
    } else {
        throw std::invalid_argument("solve_uv: empty terminal condition");
    }

    // first net index with t_i >= r: U lives on [r, T]
    std::size_t zero_before = 0;
    while (zero_before < n_points && net.points[zero_before] < spec.r - 1e-12) ++zero_before;

    const double gh = 1e-6;
    std::function<double(std::size_t, std::size_t, double, double)> driver;
    if (spec.v != 0.0) {
        driver = [&paths, &gen, &base, &net, spec, n_points](std::size_t p, std::size_t i,
                                                             double u, double vbar) {
            const double t = net.points[i];
            const double x = paths.x(p, i);
            const double y = base.y[p * n_points + i];
            const double z = base.z_bar[p * (n_points - 1) + i];
            const double bump = t >= spec.r ? spec.v : 0.0;
            return (gen.f(t, x + bump, y + spec.v * u, z + spec.v * vbar) - gen.f(t, x, y, z)) /
                   spec.v;
        };
    } else {
        driver = [&paths, &gen, &base, &net, spec, n_points, gh](std::size_t p, std::size_t i,
                                                                 double u, double vbar) {
            const double t = net.points[i];
            const double x = paths.x(p, i);
            const double y = base.y[p * n_points + i];
            const double z = base.z_bar[p * (n_points - 1) + i];
            const double ind = t >= spec.r ? 1.0 : 0.0;
            const double fx = (gen.f(t, x + gh, y, z) - gen.f(t, x - gh, y, z)) / (2.0 * gh);
            const double fy = (gen.f(t, x, y + gh, z) - gen.f(t, x, y - gh, z)) / (2.0 * gh);
            const double fz = (gen.f(t, x, y, z + gh) - gen.f(t, x, y, z - gh)) / (2.0 * gh);
            return fx * ind + fy * u + fz * vbar;
        };
    }

    return solve_perturbed_backward(paths, driver, terminal, gen.lipschitz, gen.kappa_prime,
                                    zero_before, opt);
}

const ZDiagonalCell& ZDiagonalGrid::cell(std::size_t r_index, double v) const {
    for (const auto& c : cells)
        if (c.r_index == r_index && std::fabs(c.v - v) <= 1e-12 * std::max(1.0, std::fabs(v)))
            return c;
    throw std::invalid_argument("ZDiagonalGrid: missing grid point");
}

std::vector<double> ZDiagonalGrid::kappa_integrated(const MarkMeasure& marks,
                                                    const std::vector<double>& kappa_prime,
                                                    std::size_t r_index) const {
    std::vector<double> out;
    for (std::size_t q = 0; q < marks.size(); ++q) {
        const auto& c = cell(r_index, marks.atoms[q].mark);
        if (out.empty()) out.assign(c.projected.size(), 0.0);
        for (std::size_t p = 0; p < c.projected.size(); ++p)
            out[p] += kappa_prime[q] * marks.atoms[q].mass * c.projected[p];
    }
    return out;
}

ZDiagonalGrid z_from_diagonal(const PathEnsemble& paths, const Generator& gen,
                              const TerminalCondition& xi, const BsdeSolution& base,
                              const std::vector<std::size_t>& r_indices,
                              const SolverOptions& opt, double h) {
    ZDiagonalGrid grid;
    const TimeNet& net = paths.net();
    for (std::size_t r_index : r_indices) {
        if (r_index + 1 >= net.points.size())
            throw std::invalid_argument("z_from_diagonal: r must have a net point after it");
        for (const auto& atom : paths.marks().atoms) {
            PerturbationSpec spec{net.points[r_index], atom.mark, h};
            const BsdeSolution uv = solve_uv(paths, gen, xi, base, spec, opt);
            ZDiagonalCell cell;
            cell.r_index = r_index;
            cell.v = atom.mark;
            // U at the first net point after r, projected back to F_{t_r}
            std::vector<double> u_next(paths.n_paths(), 0.0);
            for (std::size_t p = 0; p < paths.n_paths(); ++p)
                u_next[p] = uv.y[p * uv.n_points + r_index + 1];
            ConditionalFit fit = conditional_expectation(paths, r_index, u_next, opt.basis);
            cell.projected = std::move(fit.fitted);
            cell.stats = mean_se(cell.projected);
            grid.cells.push_back(std::move(cell));
        }
    }
    return grid;
}

ClarkOconeReport clark_ocone_check(const PathFunctional& phi, const PathEnsemble& paths,
                                   const SolverOptions& opt, double h) {
    const TimeNet& net = paths.net();
    const std::size_t n_paths = paths.n_paths();
    const MarkMeasure& marks = paths.marks();

    std::vector<double> g(n_paths, 0.0);
    parallel_chunks(n_paths, 2048, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) g[p] = phi({&paths, p});
    });
    const MeanSe g_stats = mean_se(g);

    std::vector<double> recon(n_paths, g_stats.mean);
    for (std::size_t i = 0; i < net.n_intervals(); ++i) {
        // the integrand is predictable; perturb strictly inside the interval
        const double r_mid = 0.5 * (net.points[i] + net.points[i + 1]);
        for (std::size_t q = 0; q < marks.size(); ++q) {
            PerturbationSpec spec{r_mid, marks.atoms[q].mark, h};
            const auto d = malliavin_derivative(phi, paths, spec);
            ConditionalFit fit = conditional_expectation(paths, i, d, opt.basis);
            parallel_chunks(n_paths, 4096, [&](std::size_t p0, std::size_t p1) {
                for (std::size_t p = p0; p < p1; ++p)
                    recon[p] += fit.fitted[p] * paths.m_increment_idx(p, i, q);
            });
        }
    }

    ClarkOconeReport rep;
    rep.mean = g_stats.mean;
    rep.g_se = g_stats.se;
    std::vector<double> res_sq(n_paths, 0.0);
    double acc = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double d = g[p] - recon[p];
        res_sq[p] = d * d;
        acc += d * d;
    }
    rep.residual_sq = mean_se(res_sq);
    rep.residual_l2 = std::sqrt(acc / static_cast<double>(n_paths));
    return rep;
}

} // namespace levylab
