#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "levylab/model.hpp"

namespace levylab {

struct JumpEvent {
    double time;        // in ]0, T]
    std::uint32_t atom; // index into LevyModel::jump_atoms
};

// Read-only view over an ensemble of simulated paths on a time net.
// Everything the solver and the derivative machinery consume goes through
// this interface, so the Levy simulator and the oracle skeleton are
// interchangeable.
class PathEnsemble {
public:
    virtual ~PathEnsemble() = default;
    virtual const TimeNet& net() const = 0;
    virtual const MarkMeasure& marks() const = 0;
    virtual std::size_t n_paths() const = 0;
    // X at net point index
    virtual double x(std::size_t path, std::size_t t_index) const = 0;
    // M(]t_i, t_{i+1}] x {atom}): sigma dW for the mark-0 atom, the
    // compensated jump increment x_j (N - lambda dt) otherwise
    virtual double m_increment_idx(std::size_t path, std::size_t interval,
                                   std::size_t atom) const = 0;
};

// A single path with an optional additive shift v 1_{[r,T]} applied to X.
// Path functionals are evaluated through this view, which is how the
// perturbation machinery reaches them.
struct PathView {
    const PathEnsemble* ensemble = nullptr;
    std::size_t path = 0;
    double shift = 0.0;
    double shift_from = std::numeric_limits<double>::infinity();

    double x(std::size_t t_index) const {
        const double v = ensemble->x(path, t_index);
        return ensemble->net().points[t_index] >= shift_from ? v + shift : v;
    }
    double x_at(double t) const { return x(ensemble->net().index_of(t)); }
    double terminal() const { return x(ensemble->net().points.size() - 1); }
    const TimeNet& net() const { return ensemble->net(); }
};

using PathFunctional = std::function<double(const PathView&)>;

// Simulated Brownian + compound-Poisson path data on a net. Immutable after
// construction; all accessors are pure reads and safe to share across
// threads. Jumps are stored as exact (time, atom) events so any
// sub-interval query is exact.
class PathBundle : public PathEnsemble {
public:
    static PathBundle simulate(const LevyModel& model, const TimeNet& net,
                               std::size_t n_paths, std::uint64_t seed);

    // coupled copy: same randomness outside ]t, r], fresh inside
    PathBundle resample_window(double t, double r, std::uint64_t seed2) const;

    const TimeNet& net() const override { return net_; }
    const MarkMeasure& marks() const override { return marks_; }
    std::size_t n_paths() const override { return n_paths_; }
    double x(std::size_t path, std::size_t t_index) const override {
        return x_[path * (net_.points.size()) + t_index];
    }
    double m_increment_idx(std::size_t path, std::size_t interval,
                           std::size_t atom) const override;

    // spec-level query by net times and mark value; s == t gives 0
    double m_increment(std::size_t path, double s, double t, double mark) const;

    const LevyModel& model() const { return model_; }
    std::uint64_t seed() const { return seed_; }
    double dw(std::size_t path, std::size_t interval) const {
        return dw_[path * net_.n_intervals() + interval];
    }
    const std::vector<JumpEvent>& jumps(std::size_t path) const { return jumps_[path]; }

    // jump count of one atom on ]s, t]
    std::size_t jump_count(std::size_t path, double s, double t, std::uint32_t atom) const;

    void export_csv(const std::string& file_path) const;

private:
    PathBundle() = default;
    void rebuild_x();

    LevyModel model_;
    MarkMeasure marks_;
    TimeNet net_;
    std::size_t n_paths_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> dw_;                    // unit-volatility W increments, path-major
    std::vector<std::vector<JumpEvent>> jumps_; // per path, sorted by time
    std::vector<double> x_;                     // X at net points, path-major
};

// View of an ensemble restricted to a sub-net (every point of the coarse
// net must be a point of the fine one). M-increments aggregate the fine
// intervals inside each coarse interval.
class CoarsenedPaths : public PathEnsemble {
public:
    CoarsenedPaths(const PathEnsemble& fine, TimeNet coarse_net);
    const TimeNet& net() const override { return net_; }
    const MarkMeasure& marks() const override { return fine_->marks(); }
    std::size_t n_paths() const override { return fine_->n_paths(); }
    double x(std::size_t path, std::size_t t_index) const override {
        return fine_->x(path, fine_index_[t_index]);
    }
    double m_increment_idx(std::size_t path, std::size_t interval,
                           std::size_t atom) const override;

private:
    const PathEnsemble* fine_;
    TimeNet net_;
    std::vector<std::size_t> fine_index_;
};

} // namespace levylab
