#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace projlab {

enum class ErrorKind {
  Domain,
  Numeric,
  Infeasible,
  Capacity,
  Configuration,
  Range,
  Precondition,
  Inconsistency,
  Geometry,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure the library reports carries a kind so callers (the CLI in
// particular) can map it onto exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace projlab
