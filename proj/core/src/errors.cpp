#include "keepclose/errors.hpp"

namespace keepclose {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::VertexExplosion: return "VertexExplosion";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::BoundOrder: return "BoundOrder";
    case ErrorCode::NegativeBound: return "NegativeBound";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::SingularFeedthrough: return "SingularFeedthrough";
    case ErrorCode::ModelMismatch: return "ModelMismatch";
    case ErrorCode::NonPositiveGamma: return "NonPositiveGamma";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::NonPositiveS: return "NonPositiveS";
    case ErrorCode::InfeasibleAtUpper: return "InfeasibleAtUpper";
    case ErrorCode::GammaOutOfRange: return "GammaOutOfRange";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::DomainExceeded: return "DomainExceeded";
    case ErrorCode::MassDepleted: return "MassDepleted";
    case ErrorCode::NoPositiveTgo: return "NoPositiveTgo";
    case ErrorCode::NonPositiveTgo: return "NonPositiveTgo";
    case ErrorCode::ValidationFailure: return "ValidationFailure";
    case ErrorCode::UnsupportedStructure: return "UnsupportedStructure";
    case ErrorCode::InputError: return "InputError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace keepclose
