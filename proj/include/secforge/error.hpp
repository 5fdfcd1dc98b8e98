#pragma once

#include <stdexcept>
#include <string>

namespace secforge {

enum class ErrorCode {
  Syntax,
  DuplicateFunction,
  DanglingLabel,
  CyclicAlias,
  DanglingAlias,
  UnknownApi,
  PointerArgument,
  UnknownSyscallName,
  DuplicateNumber,
  DuplicateName,
  SchemaError,
  TraceParse,
  Io,
  UnknownArch,
  ArchMismatch,
  ConfigError,
  Internal,
};

class AnalysisError : public std::runtime_error {
public:
  AnalysisError(ErrorCode code, std::string message, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                    : message),
        code_(code), line_(line) {}

  ErrorCode code() const { return code_; }
  int line() const { return line_; }

private:
  ErrorCode code_;
  int line_;
};

inline AnalysisError syntax_error(int line, const std::string& msg) {
  return AnalysisError(ErrorCode::Syntax, msg, line);
}

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::Syntax: return "syntax";
    case ErrorCode::DuplicateFunction: return "duplicate-function";
    case ErrorCode::DanglingLabel: return "dangling-label";
    case ErrorCode::CyclicAlias: return "cyclic-alias";
    case ErrorCode::DanglingAlias: return "dangling-alias";
    case ErrorCode::UnknownApi: return "unknown-api";
    case ErrorCode::PointerArgument: return "pointer-argument";
    case ErrorCode::UnknownSyscallName: return "unknown-syscall-name";
    case ErrorCode::DuplicateNumber: return "duplicate-number";
    case ErrorCode::DuplicateName: return "duplicate-name";
    case ErrorCode::SchemaError: return "schema";
    case ErrorCode::TraceParse: return "trace-parse";
    case ErrorCode::Io: return "io";
    case ErrorCode::UnknownArch: return "unknown-arch";
    case ErrorCode::ArchMismatch: return "arch-mismatch";
    case ErrorCode::ConfigError: return "config";
    case ErrorCode::Internal: return "internal";
  }
  return "internal";
}

}  // namespace secforge
