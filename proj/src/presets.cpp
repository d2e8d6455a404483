#include "qsd/presets.hpp"

#include "qsd/error.hpp"

namespace qsd {

Matrix paper_three_state() {
  Matrix p(3, 3);
  p << 1.0, 0.0, 0.0,
       0.2, 0.5, 0.3,
       0.3, 0.3, 0.4;
  return p;
}

Matrix paper_ten_state() {
  Matrix p(10, 10);
  p << 1, 0, 0, 0, 0, 0, 0, 0, 0, 0,
       0.2, 0.1, 0.7, 0, 0, 0, 0, 0, 0, 0,
       0, 0.1, 0.8, 0.1, 0, 0, 0, 0, 0, 0,
       0, 0, 0.8, 0.1, 0.1, 0, 0, 0, 0, 0,
       0, 0, 0, 0.8, 0.1, 0.1, 0, 0, 0, 0,
       0, 0, 0, 0, 0.01, 0.98, 0.01, 0, 0, 0,
       0, 0, 0, 0, 0, 0.1, 0.1, 0.8, 0, 0,
       0, 0, 0, 0, 0, 0, 0.1, 0.1, 0.8, 0,
       0, 0, 0, 0, 0, 0, 0, 0.1, 0.8, 0.1,
       0.2, 0, 0, 0, 0, 0, 0, 0, 0.7, 0.1;
  return p;
}

std::vector<std::string> preset_names() { return {"paper-3state", "paper-10state"}; }

bool is_preset(std::string_view name) { return name == "paper-3state" || name == "paper-10state"; }

Matrix preset_matrix(std::string_view name) {
  if (name == "paper-3state") return paper_three_state();
  if (name == "paper-10state") return paper_ten_state();
  throw Error(Errc::ConfigError, "chain: unknown preset '" + std::string(name) + "'");
}

}  // namespace qsd
