#pragma once

#include <string>

#include "sfc/simulator.hpp"

namespace sfc {

// YAML scenario documents. Errors are Error(Parse) naming the offending key
// and its line.
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text);

// Fully resolved scenario (defaults applied) in the same schema.
std::string dump_scenario(const Scenario& scenario);

}  // namespace sfc
