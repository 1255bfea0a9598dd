#pragma once

#include <stdexcept>
#include <string>

namespace krr {

enum class ErrorCode {
  invalid_argument = 1,
  domain = 2,
  parse = 3,
  io = 4,
  assertion = 5,
  internal = 6,
};

// Single exception type for the whole core; the C layer maps `code` onto the
// public status enum, so every throw site must pick the code deliberately.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace krr
