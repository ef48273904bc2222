#pragma once

#include <stdexcept>
#include <string>

namespace slu {

enum class ErrorKind {
  kInvalidArgument,
  kFormat,
  kIo,
  kConfig,
  kVersion,
  kIntegrity,
  kNumeric,
};

// Every failure raised by the toolkit carries a kind so the C API can map it
// onto a stable status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorKind::kInvalidArgument, message);
}

}  // namespace slu
