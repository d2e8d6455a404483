#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qsd {

enum class Errc {
  // input errors
  NonStochasticRow,
  NotAbsorbing,
  ParseError,
  ConfigError,
  IoError,
  DimensionMismatch,
  GridMismatch,
  // model-assumption violations
  Reducible,
  NoAbsorption,
  NotHurwitz,
  NotStable,
  BelowThreshold,
  // numerical failures
  NoConvergence,
  SingularSystem,
};

std::string_view to_string(Errc code);

// Process exit code for a failure of this kind: 2 input, 3 model assumption, 4 numerical.
int exit_code(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace qsd
