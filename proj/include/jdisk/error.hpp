#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jdisk {

enum class ErrorKind {
    InvalidGrid,
    OutsideDisk,
    OutsideInterpolationRange,
    GridMismatch,
    Singular,
    UnknownName,
    InvalidParams,
    Diverged,
    NewtonFailed,
    InvalidChain,
    NoChainFound,
    NotHolomorphicMap,
    HypothesisViolated,
    ZeroDerivative,
    NotConverged,
    Config,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::OutsideDisk: return "OutsideDisk";
    case ErrorKind::OutsideInterpolationRange: return "OutsideInterpolationRange";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::UnknownName: return "UnknownName";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::NewtonFailed: return "NewtonFailed";
    case ErrorKind::InvalidChain: return "InvalidChain";
    case ErrorKind::NoChainFound: return "NoChainFound";
    case ErrorKind::NotHolomorphicMap: return "NotHolomorphicMap";
    case ErrorKind::HypothesisViolated: return "HypothesisViolated";
    case ErrorKind::ZeroDerivative: return "ZeroDerivative";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::Config: return "Config";
    }
    return "Unknown";
}

/// Single exception type for the library; `kind()` carries the failure class.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace jdisk
