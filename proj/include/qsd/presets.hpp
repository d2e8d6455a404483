#pragma once

#include "qsd/chain.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace qsd {

/// Three-state chain with fast mixing: 0 absorbing, two live states.
Matrix paper_three_state();

/// Ten-state chain with slow fixed points at 2, 5 and 8.
Matrix paper_ten_state();

/// Names accepted by preset_matrix: "paper-3state", "paper-10state".
std::vector<std::string> preset_names();

/// Throws ConfigError on an unknown name.
Matrix preset_matrix(std::string_view name);

bool is_preset(std::string_view name);

}  // namespace qsd
