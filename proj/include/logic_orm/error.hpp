#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace logic_orm {

enum class ErrorKind {
  MalformedRecord,
  UnknownLabel,
  PreconditionViolated,
  EmptyReasoning,
  BackendUnavailable,
  BackendTransient,
  MalformedBackendReply,
  ScriptMiss,
  DoubleAssignment,
  DuplicateKey,
  EmptyReferences,
  GroupTooSmall,
  UnassignedReward,
  IdMismatch,
  StepTagCollision,
  IoFailure,
  RemoteUnavailable,
  ProtocolViolation,
  ModelNotLoaded,
  SingleClassData,
  NotEnoughCandidates,
  UnknownCommand,
  ConfigInvalid,
  RunLocked,
  OutputConflict,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::EmptyReasoning: return "EmptyReasoning";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::BackendTransient: return "BackendTransient";
    case ErrorKind::MalformedBackendReply: return "MalformedBackendReply";
    case ErrorKind::ScriptMiss: return "ScriptMiss";
    case ErrorKind::DoubleAssignment: return "DoubleAssignment";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::EmptyReferences: return "EmptyReferences";
    case ErrorKind::GroupTooSmall: return "GroupTooSmall";
    case ErrorKind::UnassignedReward: return "UnassignedReward";
    case ErrorKind::IdMismatch: return "IdMismatch";
    case ErrorKind::StepTagCollision: return "StepTagCollision";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::RemoteUnavailable: return "RemoteUnavailable";
    case ErrorKind::ProtocolViolation: return "ProtocolViolation";
    case ErrorKind::ModelNotLoaded: return "ModelNotLoaded";
    case ErrorKind::SingleClassData: return "SingleClassData";
    case ErrorKind::NotEnoughCandidates: return "NotEnoughCandidates";
    case ErrorKind::UnknownCommand: return "UnknownCommand";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::RunLocked: return "RunLocked";
    case ErrorKind::OutputConflict: return "OutputConflict";
  }
  return "Unknown";
}

// Every failure raised by the library. `line` is set for record-level parse
// errors (1-based), `field` for configuration errors (dotted path).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  static Error at_line(ErrorKind kind, std::size_t line,
                       const std::string& reason) {
    Error e(kind, "line " + std::to_string(line) + ": " + reason);
    e.line_ = line;
    return e;
  }

  static Error at_field(ErrorKind kind, const std::string& field,
                        const std::string& reason) {
    Error e(kind, field + ": " + reason);
    e.field_ = field;
    return e;
  }

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  const std::optional<std::string>& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> line_;
  std::optional<std::string> field_;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw Error(ErrorKind::PreconditionViolated, what);
}

}  // namespace logic_orm
