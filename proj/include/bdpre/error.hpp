#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bdpre {

enum class ErrorCode {
  InvalidLaw,
  InvalidArgument,
  ConfigError,
  ZeroLambda,
  ZeroMuL,
  ConditionsViolated,
  NumericalUnderflow,
  NoConvergence,
  AbsorbedState,
  WindowOverflow,
  PathNotFirstPassage,
  CensoredRealization,
  ZeroLambdaAtSite,
  ExcessCensoring,
  EmptySample,
  RegimeNotApplicable,
};

std::string_view to_string(ErrorCode code);

/// Error raised by every module. The code identifies the failure class;
/// the message carries the offending site, key, or value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bdpre
