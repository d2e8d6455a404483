#include "qsd/error.hpp"

namespace qsd {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonStochasticRow: return "NonStochasticRow";
    case Errc::NotAbsorbing: return "NotAbsorbing";
    case Errc::ParseError: return "ParseError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::Reducible: return "Reducible";
    case Errc::NoAbsorption: return "NoAbsorption";
    case Errc::NotHurwitz: return "NotHurwitz";
    case Errc::NotStable: return "NotStable";
    case Errc::BelowThreshold: return "BelowThreshold";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::SingularSystem: return "SingularSystem";
  }
  return "Unknown";
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::Reducible:
    case Errc::NoAbsorption:
    case Errc::NotHurwitz:
    case Errc::NotStable:
    case Errc::BelowThreshold:
      return 3;
    case Errc::NoConvergence:
    case Errc::SingularSystem:
      return 4;
    default:
      return 2;
  }
}

}  // namespace qsd
