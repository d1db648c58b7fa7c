#include "levylab/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace levylab {

namespace {
bool close(double a, double b) {
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) <= 1e-12 * scale;
}
} // namespace

void LevyModel::validate() const {
    if (!(horizon > 0.0)) throw std::invalid_argument("LevyModel: horizon must be positive");
    if (!(sigma >= 0.0)) throw std::invalid_argument("LevyModel: sigma must be nonnegative");
    for (std::size_t j = 0; j < jump_atoms.size(); ++j) {
        if (jump_atoms[j].size == 0.0)
            throw std::invalid_argument("LevyModel: jump size must be nonzero");
        if (!(jump_atoms[j].intensity > 0.0))
            throw std::invalid_argument("LevyModel: jump intensity must be positive");
        for (std::size_t l = 0; l < j; ++l)
            if (jump_atoms[l].size == jump_atoms[j].size)
                throw std::invalid_argument("LevyModel: jump sizes must be distinct");
    }
}

double LevyModel::martingale_variance_rate() const {
    double v = sigma * sigma;
    for (const auto& a : jump_atoms) v += a.size * a.size * a.intensity;
    return v;
}

double LevyModel::compensator_rate() const {
    double c = 0.0;
    for (const auto& a : jump_atoms) c += a.size * a.intensity;
    return c;
}

std::size_t MarkMeasure::index_of_mark(double mark) const {
    for (std::size_t q = 0; q < atoms.size(); ++q)
        if (close(atoms[q].mark, mark)) return q;
    throw std::invalid_argument("MarkMeasure: unknown mark " + std::to_string(mark));
}

MarkMeasure derive_mark_measure(const LevyModel& model) {
    model.validate();
    MarkMeasure mm;
    if (model.sigma > 0.0)
        mm.atoms.push_back({0.0, model.sigma * model.sigma});
    for (const auto& a : model.jump_atoms)
        mm.atoms.push_back({a.size, a.size * a.size * a.intensity});
    mm.total_mass = 0.0;
    for (const auto& a : mm.atoms) mm.total_mass += a.mass;
    return mm;
}

void TimeNet::validate() const {
    if (points.size() < 2) throw std::invalid_argument("TimeNet: need at least two points");
    if (points.front() != 0.0) throw std::invalid_argument("TimeNet: first point must be 0");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i] > points[i - 1]))
            throw std::invalid_argument("TimeNet: points must be strictly increasing");
    if (coarse.size() < 2) throw std::invalid_argument("TimeNet: coarse partition needs two points");
    if (coarse.front() != 0.0 || !close(coarse.back(), points.back()))
        throw std::invalid_argument("TimeNet: coarse partition must run from 0 to T");
    for (std::size_t k = 1; k < coarse.size(); ++k)
        if (!(coarse[k] > coarse[k - 1]))
            throw std::invalid_argument("TimeNet: coarse partition must be strictly increasing");
    for (double r : coarse)
        if (!has_point(r))
            throw std::invalid_argument("TimeNet: coarse point is not a net point");
}

bool TimeNet::has_point(double t) const {
    for (double p : points)
        if (close(p, t)) return true;
    return false;
}

std::size_t TimeNet::index_of(double t) const {
    const auto it = std::lower_bound(points.begin(), points.end(), t - 1e-12 * std::max(1.0, std::fabs(t)));
    if (it != points.end() && close(*it, t)) return static_cast<std::size_t>(it - points.begin());
    throw std::invalid_argument("TimeNet: " + std::to_string(t) + " is not a net point");
}

std::size_t TimeNet::coarse_cell_of_interval(std::size_t interval) const {
    const double mid = 0.5 * (points[interval] + points[interval + 1]);
    for (std::size_t k = 1; k < coarse.size(); ++k)
        if (mid <= coarse[k]) return k;
    return coarse.size() - 1;
}

TimeNet TimeNet::equidistant(double horizon, std::size_t n_steps) {
    return equidistant_with_coarse(horizon, n_steps, {0.0, horizon});
}

TimeNet TimeNet::equidistant_with_coarse(double horizon, std::size_t n_steps,
                                         const std::vector<double>& coarse) {
    if (n_steps == 0) throw std::invalid_argument("TimeNet: n_steps must be positive");
    TimeNet net;
    net.points.resize(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i)
        net.points[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
    net.points.back() = horizon;
    net.coarse = coarse;
    // snap / insert coarse points
    TimeNet out = net.with_points(coarse);
    out.coarse = coarse;
    out.validate();
    return out;
}

TimeNet TimeNet::with_points(const std::vector<double>& extra) const {
    TimeNet out;
    out.points = points;
    for (double t : extra) {
        bool found = false;
        for (double& p : out.points)
            if (close(p, t)) { p = (p == 0.0 || close(p, points.back())) ? p : t; found = true; break; }
        if (!found) out.points.push_back(t);
    }
    std::sort(out.points.begin(), out.points.end());
    out.coarse = coarse;
    out.validate();
    return out;
}

TimeNet TimeNet::refined(std::size_t factor) const {
    if (factor == 0) throw std::invalid_argument("TimeNet: refinement factor must be positive");
    TimeNet out;
    out.points.reserve(n_intervals() * factor + 1);
    for (std::size_t i = 0; i < n_intervals(); ++i) {
        for (std::size_t s = 0; s < factor; ++s)
            out.points.push_back(points[i] + dt(i) * static_cast<double>(s) / static_cast<double>(factor));
    }
    out.points.push_back(points.back());
    out.coarse = coarse;
    out.validate();
    return out;
}

bool TimeNet::refines(const TimeNet& coarse_net) const {
    for (double t : coarse_net.points)
        if (!has_point(t)) return false;
    return true;
}

} // namespace levylab
