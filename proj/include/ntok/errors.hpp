#pragma once

#include <stdexcept>
#include <string>

namespace ntok {

// Error taxonomy maps 1:1 onto CLI exit codes: Usage -> 1, Data -> 2, Io -> 3.
enum class ErrKind { Usage, Data, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrKind kind() const { return kind_; }
  int exit_code() const {
    switch (kind_) {
      case ErrKind::Usage: return 1;
      case ErrKind::Data: return 2;
      case ErrKind::Io: return 3;
    }
    return 2;
  }

 private:
  ErrKind kind_;
};

[[noreturn]] inline void usage_error(const std::string& msg) { throw Error(ErrKind::Usage, msg); }
[[noreturn]] inline void data_error(const std::string& msg) { throw Error(ErrKind::Data, msg); }
[[noreturn]] inline void io_error(const std::string& msg) { throw Error(ErrKind::Io, msg); }

}  // namespace ntok
