#include "levylab/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "levylab/parallel.hpp"
#include "levylab/rng.hpp"
#include "levylab/stats.hpp"

namespace levylab {

namespace {

MeanSe squared_mean(const std::vector<double>& diffs) {
    std::vector<double> sq(diffs.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) sq[i] = diffs[i] * diffs[i];
    return mean_se(sq);
}

void check_cell(const PathEnsemble& paths, std::size_t k) {
    if (k + 1 >= paths.net().coarse.size())
        throw std::invalid_argument("regularity: coarse cell out of range");
}

} // namespace

Curve condition_i(const PathEnsemble& paths, const BsdeSolution& sol, std::size_t k,
                  const std::vector<std::size_t>& s_indices, const RegressionSpec& spec) {
    check_cell(paths, k);
    const TimeNet& net = paths.net();
    const double r_lo = net.coarse[k];
    const double r_hi = net.coarse[k + 1];
    const std::size_t rk_index = net.index_of(r_hi);
    std::vector<double> y_rk(paths.n_paths());
    for (std::size_t p = 0; p < paths.n_paths(); ++p) y_rk[p] = sol.y_at(p, rk_index);

    Curve curve;
    curve.condition = RegCondition::I;
    curve.k = k;
    for (std::size_t s_idx : s_indices) {
        const double s = net.points[s_idx];
        if (s < r_lo - 1e-12 || s > r_hi + 1e-12)
            throw std::invalid_argument("condition_i: s outside the coarse cell");
        CurvePoint pt;
        pt.s = s;
        if (s_idx == rk_index) {
            pt.value = 0.0;
            curve.points.push_back(pt);
            continue;
        }
        ConditionalFit fit = conditional_expectation(paths, s_idx, y_rk, spec, true);
        if (!fit.ok) {
            pt.excluded = true;
            curve.points.push_back(pt);
            continue;
        }
        std::vector<double> d(paths.n_paths());
        for (std::size_t p = 0; p < paths.n_paths(); ++p) d[p] = y_rk[p] - fit.fitted[p];
        const auto ms = squared_mean(d);
        pt.value = ms.mean;
        pt.se = ms.se;
        curve.points.push_back(pt);
    }
    return curve;
}

Curve condition_ii(const PathEnsemble& paths, const BsdeSolution& sol, std::size_t k,
                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    check_cell(paths, k);
    const TimeNet& net = paths.net();
    Curve curve;
    curve.condition = RegCondition::II;
    curve.k = k;
    for (const auto& [s_idx, t_idx] : pairs) {
        if (t_idx < s_idx) throw std::invalid_argument("condition_ii: need s <= t");
        CurvePoint pt;
        pt.s = net.points[s_idx];
        pt.t = net.points[t_idx];
        if (s_idx == t_idx) {
            curve.points.push_back(pt);
            continue;
        }
        std::vector<double> d(paths.n_paths());
        for (std::size_t p = 0; p < paths.n_paths(); ++p)
            d[p] = sol.y_at(p, t_idx) - sol.y_at(p, s_idx);
        const auto ms = squared_mean(d);
        pt.value = ms.mean;
        pt.se = ms.se;
        curve.points.push_back(pt);
    }
    return curve;
}

Curve condition_iii(const PathEnsemble& paths, const BsdeSolution& sol, std::size_t k,
                    const std::vector<std::size_t>& s_intervals) {
    check_cell(paths, k);
    if (sol.z_atom.empty())
        throw std::invalid_argument("condition_iii: per-atom Z estimates not enabled");
    const TimeNet& net = paths.net();
    const MarkMeasure& marks = paths.marks();
    Curve curve;
    curve.condition = RegCondition::III;
    curve.k = k;
    for (std::size_t i : s_intervals) {
        CurvePoint pt;
        pt.s = net.points[i];
        std::vector<double> v(paths.n_paths(), 0.0);
        bool excluded = false;
        for (std::size_t p = 0; p < paths.n_paths() && !excluded; ++p) {
            double acc = 0.0;
            for (std::size_t q = 0; q < marks.size(); ++q) {
                const double z = sol.z_atom_at(q, p, i);
                if (std::isnan(z)) {
                    excluded = true;
                    break;
                }
                acc += marks.atoms[q].mass * z * z;
            }
            v[p] = acc;
        }
        if (excluded) {
            pt.excluded = true;
        } else {
            const auto ms = mean_se(v);
            pt.value = ms.mean;
            pt.se = ms.se;
        }
        curve.points.push_back(pt);
    }
    return curve;
}

Curve condition_iv(const PathEnsemble& paths, const BsdeSolution& sol, std::size_t k,
                   const std::vector<std::pair<std::size_t, std::size_t>>& interval_pairs,
                   const std::vector<double>& h) {
    check_cell(paths, k);
    if (sol.z_atom.empty())
        throw std::invalid_argument("condition_iv: per-atom Z estimates not enabled");
    const MarkMeasure& marks = paths.marks();
    if (h.size() != marks.size())
        throw std::invalid_argument("condition_iv: h must have one weight per mark atom");
    double h_norm = 0.0;
    for (std::size_t q = 0; q < marks.size(); ++q) h_norm += h[q] * h[q] * marks.atoms[q].mass;
    if (h_norm == 0.0) throw std::invalid_argument("condition_iv: h has zero L2(mu) norm");

    const TimeNet& net = paths.net();
    Curve curve;
    curve.condition = RegCondition::IV;
    curve.k = k;
    for (const auto& [s_idx, t_idx] : interval_pairs) {
        if (t_idx < s_idx) throw std::invalid_argument("condition_iv: need s <= t");
        CurvePoint pt;
        pt.s = net.points[s_idx];
        pt.t = net.points[t_idx];
        if (s_idx == t_idx) {
            curve.points.push_back(pt);
            continue;
        }
        std::vector<double> d(paths.n_paths(), 0.0);
        bool excluded = false;
        for (std::size_t p = 0; p < paths.n_paths() && !excluded; ++p) {
            double acc = 0.0;
            for (std::size_t q = 0; q < marks.size(); ++q) {
                const double zt = sol.z_atom_at(q, p, t_idx);
                const double zs = sol.z_atom_at(q, p, s_idx);
                if (std::isnan(zt) || std::isnan(zs)) {
                    excluded = true;
                    break;
                }
                acc += (zt - zs) * h[q] * marks.atoms[q].mass;
            }
            d[p] = acc;
        }
        if (excluded) {
            pt.excluded = true;
        } else {
            const auto ms = squared_mean(d);
            pt.value = ms.mean;
            pt.se = ms.se;
        }
        curve.points.push_back(pt);
    }
    return curve;
}

namespace {

// closed-form rate shapes of the four conditions
double condition_shape(RegCondition cond, double theta, double r_k, double s, double t) {
    switch (cond) {
        case RegCondition::I:
            return std::pow(r_k - s, theta);
        case RegCondition::II:
            return (std::pow(r_k - s, theta) - std::pow(r_k - t, theta)) / theta;
        case RegCondition::III:
            return std::pow(r_k - s, theta - 1.0);
        case RegCondition::IV:
            if (std::fabs(theta - 1.0) < 1e-9) return std::log((r_k - s) / (r_k - t));
            return (std::pow(r_k - t, theta - 1.0) - std::pow(r_k - s, theta - 1.0)) /
                   (1.0 - theta);
    }
    return 0.0;
}

} // namespace

ThetaFit fit_theta(const Curve& curve, double r_k) {
    std::vector<double> log_v;
    std::vector<std::pair<double, double>> st;
    for (const auto& pt : curve.points) {
        if (pt.excluded) continue;
        if (pt.value <= 0.0) continue;
        if (r_k - pt.s <= 0.0) continue;
        if ((curve.condition == RegCondition::II || curve.condition == RegCondition::IV) &&
            (pt.t <= pt.s || r_k - pt.t <= 0.0))
            continue;
        log_v.push_back(std::log(pt.value));
        st.push_back({pt.s, pt.t});
    }
    if (log_v.size() < 5)
        throw std::invalid_argument("fit_theta: need at least 5 positive curve points");

    const std::size_t n = log_v.size();
    auto sse = [&](double theta) {
        double mean_r = 0.0;
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = log_v[i] -
                   std::log(condition_shape(curve.condition, theta, r_k, st[i].first, st[i].second));
            mean_r += r[i];
        }
        mean_r /= static_cast<double>(n);
        double s = 0.0;
        for (double v : r) {
            const double d = v - mean_r;
            s += d * d;
        }
        return s;
    };
    ThetaFit fit;
    fit.n_used = n;
    fit.theta = golden_section_minimize(sse, 0.05, 1.0, 1e-3);

    // R^2 against the shape at the fitted theta
    double tss = 0.0, mean_v = 0.0;
    for (double v : log_v) mean_v += v;
    mean_v /= static_cast<double>(n);
    for (double v : log_v) tss += (v - mean_v) * (v - mean_v);
    const double rss = sse(fit.theta);
    fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;

    // Gauss-Newton standard error via the shape's theta-sensitivity
    const double dh = 1e-5;
    std::vector<double> grad(n);
    double mean_g = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double up =
            std::log(condition_shape(curve.condition, fit.theta + dh, r_k, st[i].first, st[i].second));
        const double dn =
            std::log(condition_shape(curve.condition, fit.theta - dh, r_k, st[i].first, st[i].second));
        grad[i] = (up - dn) / (2.0 * dh);
        mean_g += grad[i];
    }
    mean_g /= static_cast<double>(n);
    double g2 = 0.0;
    for (double g : grad) g2 += (g - mean_g) * (g - mean_g);
    const double sigma2 = n > 2 ? rss / static_cast<double>(n - 2) : 0.0;
    const double se = g2 > 0.0 ? std::sqrt(sigma2 / g2) : 0.0;
    fit.ci_low = fit.theta - 1.96 * se;
    fit.ci_high = fit.theta + 1.96 * se;
    return fit;
}

Curve synthetic_condition_curve(RegCondition cond, std::size_t k, double r_lo, double r_hi,
                                double c, double theta, std::size_t n_points,
                                double noise_level, std::uint64_t seed) {
    Curve curve;
    curve.condition = cond;
    curve.k = k;
    CounterRng g(seed, StreamKind::Generic);
    const double len = r_hi - r_lo;
    for (std::size_t i = 0; i < n_points; ++i) {
        CurvePoint pt;
        pt.s = r_lo + len * (0.05 + 0.85 * static_cast<double>(i) / static_cast<double>(n_points));
        pt.t = std::min(pt.s + 0.08 * len, r_lo + 0.97 * len);
        double v = condition_shape(cond, theta, r_hi, pt.s, pt.t) * c;
        if (noise_level > 0.0) v *= 1.0 + noise_level * g.next_gaussian();
        pt.value = std::max(v, 1e-300);
        curve.points.push_back(pt);
    }
    return curve;
}

SuffcondResult suffcond_experiment(const PathBundle& bundle, const Generator& gen,
                                   const TerminalCondition& xi, std::size_t k,
                                   const std::vector<std::size_t>& t_indices,
                                   const SolverOptions& opt, std::uint64_t seed2) {
    check_cell(bundle, k);
    const TimeNet& net = bundle.net();
    const double r_k = net.coarse[k + 1];

    SuffcondResult out;
    out.xi_curve.condition = RegCondition::I;
    out.xi_curve.k = k;

    // coupled resampling estimates of ||xi - xi^{t, r_k}||^2
    std::vector<double> xi_base(bundle.n_paths());
    parallel_chunks(bundle.n_paths(), 2048, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) xi_base[p] = xi(bundle, p);
    });
    for (std::size_t t_idx : t_indices) {
        const double t = net.points[t_idx];
        CurvePoint pt;
        pt.s = t;
        if (t >= r_k) {
            out.xi_curve.points.push_back(pt);
            continue;
        }
        const PathBundle resampled =
            bundle.resample_window(t, r_k, mix_seed(seed2, t_idx));
        std::vector<double> d(bundle.n_paths());
        parallel_chunks(bundle.n_paths(), 2048, [&](std::size_t p0, std::size_t p1) {
            for (std::size_t p = p0; p < p1; ++p) d[p] = xi_base[p] - xi(resampled, p);
        });
        const auto ms = squared_mean(d);
        pt.value = ms.mean;
        pt.se = ms.se;
        out.xi_curve.points.push_back(pt);
    }

    // regression estimate of ||Y_{r_k} - E_t Y_{r_k}||^2 on the same grid
    const BsdeSolution sol = solve_backward(bundle, gen, xi, opt);
    out.y_curve = condition_i(bundle, sol, k, t_indices, opt.basis);

    out.theta_xi = fit_theta(out.xi_curve, r_k);
    out.theta_y = fit_theta(out.y_curve, r_k);
    return out;
}

RatesResult discretization_error(const LevyModel& model, const Generator& gen,
                                 const TerminalCondition& xi,
                                 const std::vector<std::size_t>& coarse_steps,
                                 std::size_t ref_steps, std::size_t n_paths,
                                 std::uint64_t seed, const SolverOptions& opt) {
    for (std::size_t c : coarse_steps)
        if (c == 0 || ref_steps % c != 0)
            throw std::invalid_argument("discretization_error: nets must nest in the reference");

    const TimeNet ref_net = TimeNet::equidistant(model.horizon, ref_steps);
    const std::size_t total_paths = 4 * n_paths;
    const std::size_t half = total_paths / 2;
    const PathBundle bundle = PathBundle::simulate(model, ref_net, total_paths, seed);
    const MarkMeasure& marks = bundle.marks();

    // Every estimator is fitted twice, on disjoint path halves, and the
    // discrepancies enter through the cross moment of the two fits. The
    // fit noises are independent, so the noise floor of a squared
    // difference drops out and only the discretization gap remains.
    auto solve_split = [&](std::size_t steps, std::size_t fit_count, std::size_t offset) {
        SolverOptions o = opt;
        o.z_per_atom = true;
        o.basis.fit_paths = fit_count;
        o.basis.fit_offset = offset;
        if (steps == ref_steps) return solve_backward(bundle, gen, xi, o);
        const TimeNet cnet = TimeNet::equidistant(model.horizon, steps);
        CoarsenedPaths cpaths(bundle, cnet);
        return solve_backward(cpaths, gen, xi, o);
    };
    const BsdeSolution ref_a = solve_split(ref_steps, half, 0);
    const BsdeSolution ref_b = solve_split(ref_steps, half, half);

    // signed cross moment; clamp only aggregates so symmetric cross-noise
    // cancels instead of rectifying into a floor
    auto cross_mean = [&](auto&& value_a, auto&& value_b) {
        double acc = 0.0;
        for (std::size_t p = 0; p < total_paths; ++p) acc += value_a(p) * value_b(p);
        return acc / static_cast<double>(total_paths);
    };

    auto err_against_ref = [&](const BsdeSolution& ca, const BsdeSolution& cb,
                               std::size_t steps) {
        const std::size_t stride = ref_steps / steps;
        double sup_y = 0.0;
        for (std::size_t i = 0; i <= ref_steps; ++i) {
            const std::size_t left = std::min(i / stride, steps);
            const double v = cross_mean(
                [&](std::size_t p) { return ref_a.y_at(p, i) - ca.y_at(p, left); },
                [&](std::size_t p) { return ref_b.y_at(p, i) - cb.y_at(p, left); });
            sup_y = std::max(sup_y, v);
        }
        double z_term = 0.0;
        for (std::size_t i = 0; i < ref_steps; ++i) {
            const std::size_t cell = i / stride;
            double acc = 0.0;
            for (std::size_t q = 0; q < marks.size(); ++q) {
                acc += marks.atoms[q].mass *
                       cross_mean(
                           [&](std::size_t p) {
                               return ref_a.z_atom_at(q, p, i) - ca.z_atom_at(q, p, cell);
                           },
                           [&](std::size_t p) {
                               return ref_b.z_atom_at(q, p, i) - cb.z_atom_at(q, p, cell);
                           });
            }
            z_term += ref_net.dt(i) * acc;
        }
        return std::sqrt(std::max(sup_y, 0.0) + std::max(z_term, 0.0));
    };

    auto var2_of = [&](std::size_t steps) {
        const std::size_t stride = ref_steps / steps;
        double sup_y = 0.0;
        for (std::size_t cell = 0; cell < steps; ++cell) {
            const std::size_t left = cell * stride;
            for (std::size_t i = left + 1; i <= left + stride; ++i) {
                const double v = cross_mean(
                    [&](std::size_t p) { return ref_a.y_at(p, i) - ref_a.y_at(p, left); },
                    [&](std::size_t p) { return ref_b.y_at(p, i) - ref_b.y_at(p, left); });
                sup_y = std::max(sup_y, v);
            }
        }
        // deviation of Z from its projected average over each coarse cell
        double z_term = 0.0;
        for (std::size_t cell = 0; cell < steps; ++cell) {
            const std::size_t left = cell * stride;
            const double cell_len = ref_net.points[left + stride] - ref_net.points[left];
            for (std::size_t q = 0; q < marks.size(); ++q) {
                std::vector<double> avg_a(total_paths, 0.0), avg_b(total_paths, 0.0);
                for (std::size_t p = 0; p < total_paths; ++p) {
                    double aa = 0.0, ab = 0.0;
                    for (std::size_t i = left; i < left + stride; ++i) {
                        aa += ref_a.z_atom_at(q, p, i) * ref_net.dt(i);
                        ab += ref_b.z_atom_at(q, p, i) * ref_net.dt(i);
                    }
                    avg_a[p] = aa / cell_len;
                    avg_b[p] = ab / cell_len;
                }
                RegressionSpec sa = opt.basis;
                sa.fit_paths = half;
                sa.fit_offset = 0;
                RegressionSpec sb = opt.basis;
                sb.fit_paths = half;
                sb.fit_offset = half;
                ConditionalFit proj_a = conditional_expectation(bundle, left, avg_a, sa);
                ConditionalFit proj_b = conditional_expectation(bundle, left, avg_b, sb);
                for (std::size_t i = left; i < left + stride; ++i) {
                    z_term += marks.atoms[q].mass * ref_net.dt(i) *
                              cross_mean(
                                  [&](std::size_t p) {
                                      return ref_a.z_atom_at(q, p, i) - proj_a.fitted[p];
                                  },
                                  [&](std::size_t p) {
                                      return ref_b.z_atom_at(q, p, i) - proj_b.fitted[p];
                                  });
                }
            }
        }
        return std::sqrt(std::max(sup_y, 0.0)) + std::sqrt(std::max(z_term, 0.0));
    };

    RatesResult out;
    for (std::size_t steps : coarse_steps) {
        const BsdeSolution ca = solve_split(steps, n_paths, 0);
        const BsdeSolution cb = solve_split(steps, n_paths, half);
        ErrorFunctionals ef;
        ef.n_steps = steps;
        ef.mesh = model.horizon / static_cast<double>(steps);
        ef.err_tau = steps == ref_steps ? 0.0 : err_against_ref(ca, cb, steps);
        ef.var_2 = var2_of(steps);
        out.per_net.push_back(ef);
    }

    // least-squares slope of log err against log mesh
    std::vector<double> lx, ly;
    for (const auto& ef : out.per_net)
        if (ef.err_tau > 0.0) {
            lx.push_back(std::log(ef.mesh));
            ly.push_back(std::log(ef.err_tau));
        }
    if (lx.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= static_cast<double>(lx.size());
        my /= static_cast<double>(lx.size());
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (ly[i] - my);
        }
        out.slope = sxy / sxx;
        out.intercept = my - out.slope * mx;
    }

    // surrogate-bias report: reference against its half resolution
    const BsdeSolution ha = solve_split(ref_steps / 2, n_paths, 0);
    const BsdeSolution hb = solve_split(ref_steps / 2, n_paths, half);
    out.ref_half_gap = err_against_ref(ha, hb, ref_steps / 2);
    return out;
}

} // namespace levylab
