#pragma once

#include <stdexcept>
#include <string>

namespace usar {

enum class ErrorCode {
  invalid_argument,  // caller broke a precondition
  not_found,         // unknown item / session id
  conflict,          // operation not allowed in the current state
  data,              // malformed input data or files
  numeric,           // solver produced non-finite values
  io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace usar
