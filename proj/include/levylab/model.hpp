#pragma once

#include <cstddef>
#include <vector>

namespace levylab {

struct JumpAtom {
    double size;       // x_j != 0
    double intensity;  // lambda_j > 0
};

// Square-integrable Levy model: drift, Brownian volatility and a finite
// atomic jump measure. The atomic restriction keeps every mu-integral a
// finite sum, so the chaos algebra downstream is exact.
struct LevyModel {
    double gamma = 0.0;
    double sigma = 0.0;
    std::vector<JumpAtom> jump_atoms;
    double horizon = 1.0;

    void validate() const;

    // variance rate of the martingale part: sigma^2 + sum x_j^2 lambda_j
    double martingale_variance_rate() const;
    // drift of the raw (uncompensated) jump part: sum lambda_j x_j
    double compensator_rate() const;
};

struct MarkAtom {
    double mark;  // 0 for the Brownian component, x_j for jumps
    double mass;  // sigma^2 resp. x_j^2 lambda_j
};

// The measure mu(dx) = sigma^2 delta_0(dx) + x^2 nu(dx). Together with
// Lebesgue time it carries the isometry E M(B)^2 = (lambda x mu)(B).
struct MarkMeasure {
    std::vector<MarkAtom> atoms;
    double total_mass = 0.0;

    std::size_t size() const { return atoms.size(); }
    // index of the atom with the given mark value; throws for unknown marks
    std::size_t index_of_mark(double mark) const;
};

MarkMeasure derive_mark_measure(const LevyModel& model);

// Deterministic time net with a distinguished coarse partition
// 0 = r_0 < r_1 < ... < r_m = T, every r_k being a net point.
struct TimeNet {
    std::vector<double> points;  // 0 = t_0 < ... < t_n = T
    std::vector<double> coarse;  // r_0 .. r_m, subset of points

    void validate() const;

    std::size_t n_intervals() const { return points.size() - 1; }
    double horizon() const { return points.back(); }
    double dt(std::size_t i) const { return points[i + 1] - points[i]; }

    // index of a net point equal to t (within 1e-12 relative); throws otherwise
    std::size_t index_of(double t) const;
    bool has_point(double t) const;

    // coarse interval 1..m containing ]t_{i}, t_{i+1}]
    std::size_t coarse_cell_of_interval(std::size_t interval) const;

    static TimeNet equidistant(double horizon, std::size_t n_steps);
    static TimeNet equidistant_with_coarse(double horizon, std::size_t n_steps,
                                           const std::vector<double>& coarse);
    // net containing all points of *this plus the given extra points
    TimeNet with_points(const std::vector<double>& extra) const;
    // equidistant refinement: each interval split into `factor` pieces
    TimeNet refined(std::size_t factor) const;
    // true if every point of coarse_net is a point of *this
    bool refines(const TimeNet& coarse_net) const;
};

} // namespace levylab
