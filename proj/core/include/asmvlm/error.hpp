#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asmvlm {

enum class ErrorCode {
  InvalidScenario,
  ObjectOutOfFrame,
  UnknownLabel,
  CommandOutOfRange,
  WrongKind,
  UnknownObject,
  AnnotationOutOfBounds,
  DuplicateMarkerId,
  DuplicateMarkerIdAcrossTriplet,
  InvalidStyle,
  BackendUnavailable,
  MalformedPoints,
  EmptyReply,
  ReplayMismatch,
  EmptyLabelSet,
  MissingAnnotations,
  InvalidTemplate,
  UnknownMarker,
  UnreachableTarget,
  PolicyFailure,
  PreconditionViolated,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; `code()` distinguishes failure modes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace asmvlm
