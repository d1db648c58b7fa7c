#include "levylab/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "levylab/quadrature.hpp"
#include "levylab/rng.hpp"

namespace levylab {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= static_cast<double>(i);
    return f;
}

// number of distinct orderings of a sorted multiset
double permutation_count(const std::vector<KernelPair>& pairs) {
    double denom = 1.0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= pairs.size(); ++i) {
        if (i < pairs.size() && pairs[i] == pairs[i - 1]) {
            ++run;
        } else {
            denom *= factorial(static_cast<int>(run));
            run = 1;
        }
    }
    return factorial(static_cast<int>(pairs.size())) / denom;
}

// multiset with one copy of pairs[idx] removed
std::vector<KernelPair> without_index(const std::vector<KernelPair>& pairs, std::size_t idx) {
    std::vector<KernelPair> out;
    out.reserve(pairs.size() - 1);
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (i != idx) out.push_back(pairs[i]);
    return out;
}

} // namespace

std::vector<int> multiplicity_vector(const KernelEntry& entry, std::size_t n_cells) {
    std::vector<int> gamma(n_cells, 0);
    for (const auto& p : entry.pairs) ++gamma[p.cell];
    return gamma;
}

ChaosKernelSet::ChaosKernelSet(std::vector<double> partition, std::vector<MarkAtom> atoms)
    : partition_(std::move(partition)), atoms_(std::move(atoms)) {
    check_state();
}

void ChaosKernelSet::check_state() const {
    if (partition_.size() < 2 || partition_.front() != 0.0)
        throw std::invalid_argument("ChaosKernelSet: partition must start at 0");
    for (std::size_t k = 1; k < partition_.size(); ++k)
        if (!(partition_[k] > partition_[k - 1]))
            throw std::invalid_argument("ChaosKernelSet: partition must increase");
    if (atoms_.empty()) throw std::invalid_argument("ChaosKernelSet: no mark atoms");
    for (const auto& a : atoms_)
        if (!(a.mass > 0.0)) throw std::invalid_argument("ChaosKernelSet: atom mass must be positive");
}

void ChaosKernelSet::add_entry(std::vector<KernelPair> pairs, double coef) {
    if (pairs.empty()) {
        level0_ += coef;
        return;
    }
    for (const auto& p : pairs) {
        if (p.cell >= n_cells()) throw std::invalid_argument("add_entry: cell out of range");
        if (p.atom >= atoms_.size()) throw std::invalid_argument("add_entry: atom out of range");
    }
    std::sort(pairs.begin(), pairs.end());
    const int n = static_cast<int>(pairs.size());
    if (static_cast<int>(levels_.size()) <= n) levels_.resize(n + 1);
    auto& lv = levels_[n];
    for (auto& e : lv) {
        if (e.pairs == pairs) {
            e.coef += coef;
            return;
        }
    }
    lv.push_back({std::move(pairs), coef});
}

int ChaosKernelSet::max_level() const {
    for (int n = static_cast<int>(levels_.size()) - 1; n >= 1; --n)
        if (!levels_[n].empty()) return n;
    return 0;
}

const std::vector<KernelEntry>& ChaosKernelSet::entries(int level) const {
    static const std::vector<KernelEntry> empty;
    if (level < 1 || level >= static_cast<int>(levels_.size())) return empty;
    return levels_[level];
}

double ChaosKernelSet::cell_overlap(std::size_t cell, double t) const {
    const double lo = partition_[cell];
    const double hi = partition_[cell + 1];
    return std::clamp(t, lo, hi) - lo;
}

double ChaosKernelSet::chaos_norm_sq() const {
    return projection_norm_sq(horizon());
}

double ChaosKernelSet::projection_norm_sq(double t) const {
    if (t < -1e-12 || t > horizon() * (1.0 + 1e-12))
        throw std::invalid_argument("projection_norm_sq: t outside [0, T]");
    double total = level0_ * level0_;
    for (int n = 1; n < static_cast<int>(levels_.size()); ++n) {
        const double nfac = factorial(n);
        for (const auto& e : levels_[n]) {
            double prod = 1.0;
            for (const auto& p : e.pairs)
                prod *= atoms_[p.atom].mass * cell_overlap(p.cell, t);
            total += nfac * permutation_count(e.pairs) * e.coef * e.coef * prod;
        }
    }
    return total;
}

double ChaosKernelSet::projection_distance_sq(double s, double t) const {
    if (s > t) throw std::invalid_argument("projection_distance_sq: need s <= t");
    return projection_norm_sq(t) - projection_norm_sq(s);
}

double ChaosKernelSet::projection_distance_sq_direct(double s, double t) const {
    if (s > t) throw std::invalid_argument("projection_distance_sq_direct: need s <= t");
    double total = 0.0;
    for (int n = 1; n < static_cast<int>(levels_.size()); ++n) {
        const double nfac = factorial(n);
        for (const auto& e : levels_[n]) {
            double prod_t = 1.0, prod_s = 1.0;
            for (const auto& p : e.pairs) {
                prod_t *= atoms_[p.atom].mass * cell_overlap(p.cell, t);
                prod_s *= atoms_[p.atom].mass * cell_overlap(p.cell, s);
            }
            total += nfac * permutation_count(e.pairs) * e.coef * e.coef * (prod_t - prod_s);
        }
    }
    return total;
}

double ChaosKernelSet::d12_norm_sq() const {
    double total = level0_ * level0_;
    for (int n = 1; n < static_cast<int>(levels_.size()); ++n) {
        const double w = factorial(n + 1);
        for (const auto& e : levels_[n]) {
            double prod = 1.0;
            for (const auto& p : e.pairs)
                prod *= atoms_[p.atom].mass * cell_length(p.cell);
            total += w * permutation_count(e.pairs) * e.coef * e.coef * prod;
        }
    }
    if (!std::isfinite(total))
        throw std::runtime_error("d12_norm_sq: diverging norm at truncation");
    return total;
}

ChaosKernelSet ChaosKernelSet::malliavin_kernel(std::size_t cell, std::size_t atom) const {
    if (cell >= n_cells() || atom >= atoms_.size())
        throw std::invalid_argument("malliavin_kernel: index out of range");
    d12_norm_sq();  // membership check at truncation
    ChaosKernelSet d(partition_, atoms_);
    const KernelPair target{static_cast<std::uint16_t>(cell), static_cast<std::uint16_t>(atom)};
    for (int n = 1; n < static_cast<int>(levels_.size()); ++n) {
        for (const auto& e : levels_[n]) {
            for (std::size_t i = 0; i < e.pairs.size(); ++i) {
                if (e.pairs[i] == target) {
                    d.add_entry(without_index(e.pairs, i), static_cast<double>(n) * e.coef);
                    break;  // one copy; multiplicity does not multiply the value
                }
            }
        }
    }
    return d;
}

double ChaosKernelSet::dsmooth_norm_sq() const {
    double total = 0.0;
    for (int n = 1; n < static_cast<int>(levels_.size()); ++n) {
        const double nfac = factorial(n);
        for (const auto& e : levels_[n]) {
            double prod = 1.0;
            for (const auto& p : e.pairs)
                prod *= atoms_[p.atom].mass * cell_length(p.cell);
            const auto gamma = multiplicity_vector(e, n_cells());
            double gamma_sum = 0.0;
            for (std::size_t k = 0; k < gamma.size(); ++k) gamma_sum += gamma[k];
            total += nfac * permutation_count(e.pairs) * e.coef * e.coef * prod * gamma_sum;
        }
    }
    return total;
}

double ChaosKernelSet::dsmooth_norm_sq_by_integration() const {
    double total = 0.0;
    for (std::size_t k = 0; k < n_cells(); ++k)
        for (std::size_t q = 0; q < atoms_.size(); ++q)
            total += cell_length(k) * atoms_[q].mass * malliavin_kernel(k, q).chaos_norm_sq();
    return total;
}

double ChaosKernelSet::resampling_distance_sq(double t, double r) const {
    if (!(t < r)) throw std::invalid_argument("resampling_distance_sq: need t < r");
    if (t < 0.0 || r > horizon() * (1.0 + 1e-12))
        throw std::invalid_argument("resampling_distance_sq: window outside [0, T]");
    double total = 0.0;
    for (int n = 1; n < static_cast<int>(levels_.size()); ++n) {
        const double nfac = factorial(n);
        for (const auto& e : levels_[n]) {
            double prod_full = 1.0, prod_off = 1.0;
            for (const auto& p : e.pairs) {
                const double len = cell_length(p.cell);
                const double window = cell_overlap(p.cell, r) - cell_overlap(p.cell, t);
                prod_full *= atoms_[p.atom].mass * len;
                prod_off *= atoms_[p.atom].mass * (len - window);
            }
            total += 2.0 * nfac * permutation_count(e.pairs) * e.coef * e.coef *
                     (prod_full - prod_off);
        }
    }
    return total;
}

double ChaosKernelSet::resampling_sup_ratio(double rel_stability,
                                            std::size_t initial_grid) const {
    double sup = 0.0;
    for (std::size_t k = 0; k < n_cells(); ++k) {
        const double rk = partition_[k + 1];
        const double lo = partition_[k];
        const double len = rk - lo;
        std::size_t grid = initial_grid;
        int geo_depth = 20;
        double prev = -1.0;
        double cell_sup = 0.0;
        // the ratio increases towards r_k, so refine with points clustering
        // geometrically at r_k until the grid sup stops moving
        for (int round = 0; round < 24; ++round) {
            cell_sup = 0.0;
            for (std::size_t i = 0; i < grid; ++i) {
                const double t = lo + len * static_cast<double>(i) / static_cast<double>(grid);
                cell_sup = std::max(cell_sup, resampling_distance_sq(t, rk) / (rk - t));
            }
            for (int j = 1; j <= geo_depth; ++j) {
                const double t = rk - len * std::pow(2.0, -j);
                if (t <= lo) continue;
                cell_sup = std::max(cell_sup, resampling_distance_sq(t, rk) / (rk - t));
            }
            if (prev >= 0.0 && std::fabs(cell_sup - prev) <= rel_stability * std::max(cell_sup, 1e-300))
                break;
            prev = cell_sup;
            grid *= 2;
            geo_depth += 8;
        }
        sup = std::max(sup, cell_sup);
    }
    return sup;
}

double ChaosKernelSet::projected_derivative_norm_sq(std::size_t k, double t) const {
    double total = 0.0;
    for (int n = 1; n < static_cast<int>(levels_.size()); ++n) {
        const double w = static_cast<double>(n) * factorial(n);
        for (const auto& e : levels_[n]) {
            for (std::size_t i = 0; i < e.pairs.size(); ++i) {
                if (e.pairs[i].cell != k) continue;
                if (i > 0 && e.pairs[i] == e.pairs[i - 1]) continue;  // distinct first pairs only
                const auto rest = without_index(e.pairs, i);
                double prod = atoms_[e.pairs[i].atom].mass;
                for (const auto& q : rest)
                    prod *= atoms_[q.atom].mass * cell_overlap(q.cell, t);
                total += w * permutation_count(rest) * e.coef * e.coef * prod;
            }
        }
    }
    return total;
}

double ChaosKernelSet::projected_derivative_distance_sq(std::size_t k, double s, double t) const {
    double total = 0.0;
    for (int n = 2; n < static_cast<int>(levels_.size()); ++n) {
        const double w = static_cast<double>(n) * factorial(n);
        for (const auto& e : levels_[n]) {
            for (std::size_t i = 0; i < e.pairs.size(); ++i) {
                if (e.pairs[i].cell != k) continue;
                if (i > 0 && e.pairs[i] == e.pairs[i - 1]) continue;
                const auto rest = without_index(e.pairs, i);
                double prod_t = 1.0, prod_s = 1.0;
                for (const auto& q : rest) {
                    prod_t *= atoms_[q.atom].mass * cell_overlap(q.cell, t);
                    prod_s *= atoms_[q.atom].mass * cell_overlap(q.cell, s);
                }
                total += w * permutation_count(rest) * e.coef * e.coef *
                         atoms_[e.pairs[i].atom].mass * (prod_t - prod_s);
            }
        }
    }
    return total;
}

double ChaosKernelSet::evaluate(const PathEnsemble& paths, std::size_t path) const {
    const TimeNet& net = paths.net();
    const auto& ensemble_atoms = paths.marks().atoms;
    if (ensemble_atoms.size() != atoms_.size())
        throw std::invalid_argument("evaluate: kernel atoms do not match the path ensemble");
    for (std::size_t q = 0; q < atoms_.size(); ++q)
        if (std::fabs(ensemble_atoms[q].mark - atoms_[q].mark) > 1e-12)
            throw std::invalid_argument("evaluate: kernel atoms do not match the path ensemble");
    double value = level0_;
    // net intervals belonging to each coarse cell of the kernel partition
    std::vector<std::vector<std::size_t>> cell_intervals(n_cells());
    for (std::size_t i = 0; i < net.n_intervals(); ++i) {
        const double mid = 0.5 * (net.points[i] + net.points[i + 1]);
        for (std::size_t k = 0; k < n_cells(); ++k)
            if (mid > partition_[k] && mid <= partition_[k + 1]) {
                cell_intervals[k].push_back(i);
                break;
            }
    }
    for (int n = 1; n < static_cast<int>(levels_.size()); ++n) {
        const double nfac = factorial(n);
        for (const auto& e : levels_[n]) {
            double prod = 1.0;
            std::size_t i = 0;
            while (i < e.pairs.size() && prod != 0.0) {
                std::size_t j = i;
                while (j < e.pairs.size() && e.pairs[j] == e.pairs[i]) ++j;
                const std::size_t mult = j - i;
                const auto& ivals = cell_intervals[e.pairs[i].cell];
                if (mult == 1) {
                    double m = 0.0;
                    for (std::size_t iv : ivals)
                        m += paths.m_increment_idx(path, iv, e.pairs[i].atom);
                    prod *= m;
                } else {
                    // elementary symmetric polynomial over the sub-intervals:
                    // repeated pairs take distinct cells, diagonals drop out
                    if (ivals.size() < mult)
                        throw std::runtime_error("evaluate: net too coarse for repeated kernel cell");
                    std::vector<double> esym(mult + 1, 0.0);
                    esym[0] = 1.0;
                    for (std::size_t iv : ivals) {
                        const double v = paths.m_increment_idx(path, iv, e.pairs[i].atom);
                        for (std::size_t d = mult; d >= 1; --d)
                            esym[d] += esym[d - 1] * v;
                    }
                    prod *= esym[mult];
                }
                i = j;
            }
            value += e.coef * nfac * prod;
        }
    }
    return value;
}

double ChaosKernelSet::diagonal_bias_fraction(const TimeNet& net) const {
    // volume-weighted fraction of each entry's cuboid that falls on a
    // dropped diagonal cell
    double vol = 0.0, lost = 0.0;
    std::vector<std::size_t> cell_count(n_cells(), 0);
    for (std::size_t i = 0; i < net.n_intervals(); ++i) {
        const double mid = 0.5 * (net.points[i] + net.points[i + 1]);
        for (std::size_t k = 0; k < n_cells(); ++k)
            if (mid > partition_[k] && mid <= partition_[k + 1]) ++cell_count[k];
    }
    for (int n = 1; n < static_cast<int>(levels_.size()); ++n) {
        for (const auto& e : levels_[n]) {
            double v = 1.0;
            double keep = 1.0;
            std::size_t i = 0;
            while (i < e.pairs.size()) {
                std::size_t j = i;
                while (j < e.pairs.size() && e.pairs[j] == e.pairs[i]) ++j;
                const double mult = static_cast<double>(j - i);
                const double g = static_cast<double>(cell_count[e.pairs[i].cell]);
                v *= std::pow(atoms_[e.pairs[i].atom].mass * cell_length(e.pairs[i].cell), mult);
                for (double d = 0.0; d < mult; d += 1.0) keep *= (g - d) / g;
                i = j;
            }
            vol += std::fabs(e.coef) * v;
            lost += std::fabs(e.coef) * v * (1.0 - keep);
        }
    }
    return vol > 0.0 ? lost / vol : 0.0;
}

std::pair<double, double> hsmooth_bound_check(const ChaosKernelSet& eta, std::size_t k,
                                              double s, double t, double quad_rel_tol) {
    const auto& part = eta.partition();
    if (k >= eta.n_cells()) throw std::invalid_argument("hsmooth_bound_check: bad cell");
    const double lo = part[k];
    const double rk = part[k + 1];
    if (s == t) return {0.0, 0.0};
    if (!(lo < s && s < t && t < rk))
        throw std::invalid_argument("hsmooth_bound_check: need r_{k-1} < s < t < r_k");
    const double lhs = eta.projected_derivative_distance_sq(k, s, t);
    const double tail = eta.projection_norm_sq(rk);
    const double rhs = 4.0 * integrate_adaptive(
                                 [&](double r) {
                                     const double num = tail - eta.projection_norm_sq(r);
                                     const double den = rk - r;
                                     return num / (den * den);
                                 },
                                 s, t, quad_rel_tol);
    return {lhs, rhs};
}

std::pair<double, double> hsmooth_pointwise_check(const ChaosKernelSet& eta, std::size_t k,
                                                  double t) {
    const auto& part = eta.partition();
    if (k >= eta.n_cells()) throw std::invalid_argument("hsmooth_pointwise_check: bad cell");
    const double lo = part[k];
    const double rk = part[k + 1];
    if (!(lo < t && t < rk))
        throw std::invalid_argument("hsmooth_pointwise_check: need r_{k-1} < t < r_k");
    const double lhs = eta.projected_derivative_norm_sq(k, t);
    const double rhs = (eta.projection_norm_sq(rk) - eta.projection_norm_sq(t)) / (rk - t);
    return {lhs, rhs};
}

ChaosKernelSet terminal_x_kernels(const LevyModel& model,
                                  const std::vector<double>& partition) {
    const MarkMeasure mm = derive_mark_measure(model);
    ChaosKernelSet xi(partition, mm.atoms);
    xi.set_level0(model.gamma * model.horizon);
    for (std::size_t k = 0; k + 1 < partition.size(); ++k)
        for (std::size_t q = 0; q < mm.atoms.size(); ++q)
            xi.add_entry({{static_cast<std::uint16_t>(k), static_cast<std::uint16_t>(q)}}, 1.0);
    return xi;
}

ChaosKernelSet random_kernel_set(std::uint64_t seed,
                                 const std::vector<double>& partition,
                                 const std::vector<MarkAtom>& atoms,
                                 int max_level, int entries_per_level,
                                 std::size_t max_cell) {
    ChaosKernelSet xi(partition, atoms);
    CounterRng g(seed, StreamKind::Generic);
    xi.set_level0(2.0 * g.next_uniform() - 1.0);
    for (int n = 1; n <= max_level; ++n) {
        for (int e = 0; e < entries_per_level; ++e) {
            std::vector<KernelPair> pairs(n);
            for (int i = 0; i < n; ++i) {
                pairs[i].cell = static_cast<std::uint16_t>(g.next_u64() % (max_cell + 1));
                pairs[i].atom = static_cast<std::uint16_t>(g.next_u64() % atoms.size());
            }
            xi.add_entry(std::move(pairs), 2.0 * g.next_uniform() - 1.0);
        }
    }
    return xi;
}

} // namespace levylab
