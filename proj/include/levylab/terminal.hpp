#pragma once

#include <memory>
#include <optional>
#include <string>

#include "levylab/chaos.hpp"
#include "levylab/paths.hpp"

namespace levylab {

// Terminal condition: either a functional of the path at net points or a
// chaos kernel set (evaluated pathwise through the multiple-integral
// machinery). The two forms are not converted into each other here; the
// oracle's projection is the only bridge.
struct TerminalCondition {
    PathFunctional fn;
    std::shared_ptr<const ChaosKernelSet> kernel;

    bool has_fn() const { return static_cast<bool>(fn); }
    double operator()(const PathEnsemble& paths, std::size_t path) const {
        if (fn) return fn({&paths, path});
        if (kernel) return kernel->evaluate(paths, path);
        throw std::runtime_error("TerminalCondition: empty");
    }
    double operator()(const PathView& view) const {
        if (fn) return fn(view);
        throw std::runtime_error("TerminalCondition: kernel form has no path-shift evaluation");
    }
};

// built-ins addressable from configs; params are interpreted per id
// ids: x_t | call | square | sine | indicator | abs_pow_bounded |
//      increment_product
TerminalCondition make_terminal(const std::string& id, double strike = 0.0,
                                double power = 0.5, double cap = 10.0,
                                double at_time = -1.0);

TerminalCondition make_kernel_terminal(ChaosKernelSet kernel);

} // namespace levylab
