#include "asmvlm/error.hpp"

namespace asmvlm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::ObjectOutOfFrame: return "ObjectOutOfFrame";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::CommandOutOfRange: return "CommandOutOfRange";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::AnnotationOutOfBounds: return "AnnotationOutOfBounds";
    case ErrorCode::DuplicateMarkerId: return "DuplicateMarkerId";
    case ErrorCode::DuplicateMarkerIdAcrossTriplet: return "DuplicateMarkerIdAcrossTriplet";
    case ErrorCode::InvalidStyle: return "InvalidStyle";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedPoints: return "MalformedPoints";
    case ErrorCode::EmptyReply: return "EmptyReply";
    case ErrorCode::ReplayMismatch: return "ReplayMismatch";
    case ErrorCode::EmptyLabelSet: return "EmptyLabelSet";
    case ErrorCode::MissingAnnotations: return "MissingAnnotations";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::UnknownMarker: return "UnknownMarker";
    case ErrorCode::UnreachableTarget: return "UnreachableTarget";
    case ErrorCode::PolicyFailure: return "PolicyFailure";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace asmvlm
