#include "levylab/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "levylab/parallel.hpp"
#include "levylab/rng.hpp"

namespace levylab {

namespace {
bool close(double a, double b) {
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) <= 1e-12 * scale;
}
} // namespace

PathBundle PathBundle::simulate(const LevyModel& model, const TimeNet& net,
                                std::size_t n_paths, std::uint64_t seed) {
    model.validate();
    net.validate();
    if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be >= 1");
    if (!close(net.horizon(), model.horizon))
        throw std::invalid_argument("simulate: net horizon does not match model horizon");

    PathBundle b;
    b.model_ = model;
    b.marks_ = derive_mark_measure(model);
    b.net_ = net;
    b.n_paths_ = n_paths;
    b.seed_ = seed;
    const std::size_t ni = net.n_intervals();
    b.dw_.assign(n_paths * ni, 0.0);
    b.jumps_.resize(n_paths);

    parallel_chunks(n_paths, 256, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            for (std::size_t i = 0; i < ni; ++i) {
                CounterRng g(seed, StreamKind::BrownianIncrement, p, static_cast<std::uint32_t>(i));
                b.dw_[p * ni + i] = std::sqrt(net.dt(i)) * g.next_gaussian();
            }
            auto& ev = b.jumps_[p];
            for (std::uint32_t j = 0; j < model.jump_atoms.size(); ++j) {
                const double lam = model.jump_atoms[j].intensity;
                for (std::size_t i = 0; i < ni; ++i) {
                    CounterRng gc(seed, StreamKind::JumpCount, p, static_cast<std::uint32_t>(i), j);
                    const std::uint64_t count = gc.next_poisson(lam * net.dt(i));
                    CounterRng gt(seed, StreamKind::JumpTime, p, static_cast<std::uint32_t>(i), j);
                    for (std::uint64_t e = 0; e < count; ++e)
                        ev.push_back({net.points[i] + gt.next_uniform() * net.dt(i), j});
                }
            }
            std::sort(ev.begin(), ev.end(), [](const JumpEvent& a, const JumpEvent& c) {
                return a.time != c.time ? a.time < c.time : a.atom < c.atom;
            });
        }
    });
    b.rebuild_x();
    return b;
}

void PathBundle::rebuild_x() {
    const std::size_t np = net_.points.size();
    const std::size_t ni = net_.n_intervals();
    x_.assign(n_paths_ * np, 0.0);
    const double comp = model_.compensator_rate();
    parallel_chunks(n_paths_, 256, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            double w = 0.0;
            double jump_sum = 0.0;
            std::size_t e = 0;
            const auto& ev = jumps_[p];
            for (std::size_t i = 0; i < ni; ++i) {
                w += dw_[p * ni + i];
                const double t = net_.points[i + 1];
                while (e < ev.size() && ev[e].time <= t) {
                    jump_sum += model_.jump_atoms[ev[e].atom].size;
                    ++e;
                }
                x_[p * np + i + 1] = model_.gamma * t + model_.sigma * w + jump_sum - t * comp;
            }
        }
    });
}

double PathBundle::m_increment_idx(std::size_t path, std::size_t interval,
                                   std::size_t atom) const {
    const MarkAtom& a = marks_.atoms[atom];
    if (a.mark == 0.0)
        return model_.sigma * dw_[path * net_.n_intervals() + interval];
    const std::uint32_t j = static_cast<std::uint32_t>(model_.sigma > 0.0 ? atom - 1 : atom);
    const double s = net_.points[interval];
    const double t = net_.points[interval + 1];
    const double lam = model_.jump_atoms[j].intensity;
    const double n = static_cast<double>(jump_count(path, s, t, j));
    return a.mark * (n - lam * (t - s));
}

std::size_t PathBundle::jump_count(std::size_t path, double s, double t,
                                   std::uint32_t atom) const {
    const auto& ev = jumps_[path];
    std::size_t n = 0;
    // events are few per path; linear scan with early exit
    for (const auto& e : ev) {
        if (e.time > t) break;
        if (e.time > s && e.atom == atom) ++n;
    }
    return n;
}

double PathBundle::m_increment(std::size_t path, double s, double t, double mark) const {
    if (s > t) throw std::invalid_argument("m_increment: need s <= t");
    if (s < 0.0 || t > net_.horizon() * (1.0 + 1e-12))
        throw std::invalid_argument("m_increment: interval outside [0, T]");
    const std::size_t atom = marks_.index_of_mark(mark);  // throws for unknown marks
    if (close(s, t)) return 0.0;
    const std::size_t is = net_.index_of(s);
    const std::size_t it = net_.index_of(t);
    double m = 0.0;
    for (std::size_t i = is; i < it; ++i) m += m_increment_idx(path, i, atom);
    return m;
}

PathBundle PathBundle::resample_window(double t, double r, std::uint64_t seed2) const {
    if (!(t < r)) throw std::invalid_argument("resample_window: need t < r");
    if (t < 0.0 || r > net_.horizon() * (1.0 + 1e-12))
        throw std::invalid_argument("resample_window: window outside [0, T]");

    PathBundle b;
    b.model_ = model_;
    b.marks_ = marks_;
    b.net_ = net_;
    b.n_paths_ = n_paths_;
    b.seed_ = seed_;
    const std::size_t ni = net_.n_intervals();
    b.dw_.assign(n_paths_ * ni, 0.0);
    b.jumps_.resize(n_paths_);

    parallel_chunks(n_paths_, 256, [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
            for (std::size_t i = 0; i < ni; ++i) {
                const double a = net_.points[i];
                const double c = net_.points[i + 1];
                const double orig = dw_[p * ni + i];
                const double lo = std::max(a, t);   // window piece inside ]a,c]
                const double hi = std::min(c, r);
                if (hi <= lo) {                     // fully outside the window
                    b.dw_[p * ni + i] = orig;
                    continue;
                }
                CounterRng fresh(seed2, StreamKind::WindowBrownian, p, static_cast<std::uint32_t>(i));
                if (lo <= a && hi >= c) {           // fully inside
                    b.dw_[p * ni + i] = std::sqrt(c - a) * fresh.next_gaussian();
                    continue;
                }
                // Interval straddles a window edge. Split the original
                // increment with Brownian-bridge draws so the shared pieces
                // agree exactly with the original path.
                CounterRng split(seed2, StreamKind::BridgeSplit, p, static_cast<std::uint32_t>(i));
                const double len = c - a;
                double left = 0.0;  // W(]a, lo]), kept when lo > a
                double kept_right = 0.0;
                double rest = orig;
                double rest_len = len;
                if (lo > a) {
                    const double tau = lo - a;
                    left = rest * tau / rest_len +
                           std::sqrt(tau * (rest_len - tau) / rest_len) * split.next_gaussian();
                    rest -= left;
                    rest_len -= tau;
                }
                if (hi < c) {
                    // split the remainder ]lo, c] at hi; keep the tail
                    const double tau = hi - lo;
                    const double mid = rest * tau / rest_len +
                                       std::sqrt(tau * (rest_len - tau) / rest_len) * split.next_gaussian();
                    kept_right = rest - mid;
                }
                const double fresh_mid = std::sqrt(hi - lo) * fresh.next_gaussian();
                b.dw_[p * ni + i] = left + fresh_mid + kept_right;
            }
            // jumps: keep events outside ]t, r], draw fresh ones inside
            auto& ev = b.jumps_[p];
            for (const auto& e : jumps_[p])
                if (e.time <= t || e.time > r) ev.push_back(e);
            for (std::uint32_t j = 0; j < model_.jump_atoms.size(); ++j) {
                const double lam = model_.jump_atoms[j].intensity;
                CounterRng gc(seed2, StreamKind::WindowJumpCount, p, 0, j);
                const std::uint64_t count = gc.next_poisson(lam * (r - t));
                CounterRng gt(seed2, StreamKind::WindowJumpTime, p, 0, j);
                for (std::uint64_t e = 0; e < count; ++e)
                    ev.push_back({t + gt.next_uniform() * (r - t), j});
            }
            std::sort(ev.begin(), ev.end(), [](const JumpEvent& a, const JumpEvent& c) {
                return a.time != c.time ? a.time < c.time : a.atom < c.atom;
            });
        }
    });
    b.rebuild_x();
    return b;
}

CoarsenedPaths::CoarsenedPaths(const PathEnsemble& fine, TimeNet coarse_net)
    : fine_(&fine), net_(std::move(coarse_net)) {
    net_.validate();
    fine_index_.resize(net_.points.size());
    for (std::size_t i = 0; i < net_.points.size(); ++i)
        fine_index_[i] = fine.net().index_of(net_.points[i]);
}

double CoarsenedPaths::m_increment_idx(std::size_t path, std::size_t interval,
                                       std::size_t atom) const {
    double m = 0.0;
    for (std::size_t i = fine_index_[interval]; i < fine_index_[interval + 1]; ++i)
        m += fine_->m_increment_idx(path, i, atom);
    return m;
}

void PathBundle::export_csv(const std::string& file_path) const {
    std::FILE* f = std::fopen(file_path.c_str(), "wb");
    if (!f) throw std::runtime_error("export_csv: cannot open " + file_path);
    std::fprintf(f, "path,interval_index,dW,jump_list\n");
    const std::size_t ni = net_.n_intervals();
    for (std::size_t p = 0; p < n_paths_; ++p) {
        for (std::size_t i = 0; i < ni; ++i) {
            std::fprintf(f, "%zu,%zu,%.17g,", p, i, dw_[p * ni + i]);
            bool first = true;
            for (const auto& e : jumps_[p]) {
                if (e.time > net_.points[i] && e.time <= net_.points[i + 1]) {
                    std::fprintf(f, "%s%.17g:%u", first ? "" : ";", e.time, e.atom);
                    first = false;
                }
            }
            std::fprintf(f, "\n");
        }
    }
    std::fclose(f);
}

} // namespace levylab
