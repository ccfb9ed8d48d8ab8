#include "feedaudit/error.hpp"

namespace feedaudit {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NotStochastic: return "NotStochastic";
        case ErrorKind::NotIrreducible: return "NotIrreducible";
        case ErrorKind::NegativeEntry: return "NegativeEntry";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::CapExceeded: return "CapExceeded";
        case ErrorKind::BudgetExceeded: return "BudgetExceeded";
        case ErrorKind::InsufficientCoverage: return "InsufficientCoverage";
        case ErrorKind::InsufficientSamples: return "InsufficientSamples";
        case ErrorKind::RegimeViolation: return "RegimeViolation";
        case ErrorKind::CalibrationFailed: return "CalibrationFailed";
        case ErrorKind::ConfigMismatch: return "ConfigMismatch";
        case ErrorKind::PairingMismatch: return "PairingMismatch";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::InfeasibleGap: return "InfeasibleGap";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace feedaudit
