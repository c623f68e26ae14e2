#include "s2vae/error.hpp"

namespace s2vae {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::InvalidDimension: return "InvalidDimension";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::AntipodalPoints: return "AntipodalPoints";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ZeroChunk: return "ZeroChunk";
    case ErrorKind::NonFiniteDensity: return "NonFiniteDensity";
    case ErrorKind::NonPositiveUncertainty: return "NonPositiveUncertainty";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::DegenerateLayer: return "DegenerateLayer";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
  }
  return "Unknown";
}

}  // namespace s2vae
