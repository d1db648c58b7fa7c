#include "levylab/terminal.hpp"

#include <cmath>
#include <stdexcept>

namespace levylab {

TerminalCondition make_terminal(const std::string& id, double strike, double power,
                                double cap, double at_time) {
    TerminalCondition tc;
    if (id == "x_t") {
        tc.fn = [](const PathView& v) { return v.terminal(); };
    } else if (id == "call") {
        tc.fn = [strike](const PathView& v) { return std::max(v.terminal() - strike, 0.0); };
    } else if (id == "square") {
        tc.fn = [](const PathView& v) { const double x = v.terminal(); return x * x; };
    } else if (id == "sine") {
        tc.fn = [](const PathView& v) { return std::sin(v.terminal()); };
    } else if (id == "indicator") {
        tc.fn = [strike](const PathView& v) { return v.terminal() > strike ? 1.0 : 0.0; };
    } else if (id == "abs_pow_bounded") {
        // |X_r|^power capped; non-Lipschitz at 0 for power < 1
        tc.fn = [power, cap, at_time](const PathView& v) {
            const double t = at_time >= 0.0 ? at_time : v.net().horizon();
            return std::min(std::pow(std::fabs(v.x_at(t)), power), cap);
        };
    } else if (id == "increment_product") {
        tc.fn = [](const PathView& v) {
            const auto& coarse = v.net().coarse;
            if (coarse.size() < 3)
                throw std::runtime_error("increment_product: needs at least two coarse cells");
            const double x1 = v.x_at(coarse[1]);
            const double x2 = v.x_at(coarse[2]);
            return x1 * (x2 - x1);
        };
    } else {
        throw std::invalid_argument("make_terminal: unknown id '" + id + "'");
    }
    return tc;
}

TerminalCondition make_kernel_terminal(ChaosKernelSet kernel) {
    TerminalCondition tc;
    tc.kernel = std::make_shared<const ChaosKernelSet>(std::move(kernel));
    return tc;
}

} // namespace levylab
