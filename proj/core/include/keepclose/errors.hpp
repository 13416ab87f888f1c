#pragma once

#include <stdexcept>
#include <string>

namespace keepclose {

enum class ErrorCode {
  DimensionMismatch,
  NonFiniteEntry,
  EigenFailure,
  EmptyList,
  VertexExplosion,
  GridTooCoarse,
  Diverged,
  BoundOrder,
  NegativeBound,
  GridMismatch,
  SingularFeedthrough,
  ModelMismatch,
  NonPositiveGamma,
  NonPositiveSigma,
  NonPositiveS,
  InfeasibleAtUpper,
  GammaOutOfRange,
  NonFiniteState,
  ZeroDenominator,
  DomainExceeded,
  MassDepleted,
  NoPositiveTgo,
  NonPositiveTgo,
  ValidationFailure,
  UnsupportedStructure,
  InputError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& what);

}  // namespace keepclose
