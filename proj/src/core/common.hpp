#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace faceqr {

enum class ErrorCode : int {
  invalid_argument = 1,
  io = 2,
  decode = 3,
  format = 4,
  shape = 5,
  diverged = 6,
  internal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) raise(code, msg);
}

}  // namespace faceqr
