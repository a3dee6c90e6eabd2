#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plansmith {

// Failure categories surfaced to callers and mapped to CLI exit codes.
enum class ErrorKind {
  config,
  protocol,
  generation,
  planner,
  validation,
  parse,
  gating,
  backend,
  evaluation,
  scheduling,
  assembly,
  io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace plansmith
