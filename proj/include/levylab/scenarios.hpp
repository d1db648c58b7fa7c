#pragma once

#include <string>
#include <vector>

#include "levylab/experiments.hpp"

namespace levylab {

struct Scenario {
    std::string name;
    std::string kind;
    std::string description;
};

// built-in scenarios; each acceptance-style check ships as one
const std::vector<Scenario>& scenario_catalog();

// full config of a built-in scenario; throws for unknown names
ExperimentConfig scenario_config(const std::string& name);

} // namespace levylab
