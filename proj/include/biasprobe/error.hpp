#pragma once

#include <stdexcept>
#include <string>

namespace biasprobe {

enum class ErrorKind { Config, Backend, Data, Internal };

/// Single exception type for the library. The kind selects the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& m) { return Error(ErrorKind::Config, m); }
inline Error backend_error(const std::string& m) { return Error(ErrorKind::Backend, m); }
inline Error data_error(const std::string& m) { return Error(ErrorKind::Data, m); }
inline Error internal_error(const std::string& m) { return Error(ErrorKind::Internal, m); }

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Backend: return 3;
    case ErrorKind::Data: return 4;
    case ErrorKind::Internal: return 5;
  }
  return 5;
}

}  // namespace biasprobe
