#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace probekit {

// Mirrors pk_status in probekit.h; keep the numeric values in sync.
enum class ErrorKind {
  parse = 1,
  decode = 2,
  format = 3,
  config = 4,
  shortfall = 5,
  invalid_argument = 6,
  coverage = 7,
  io = 8,
  degenerate = 9,
  alignment = 10,
  internal = 11,
};

const char* error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Error tied to a 1-based line of an input file.
class LineError : public Error {
 public:
  LineError(ErrorKind kind, std::size_t line, const std::string& message)
      : Error(kind, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ShortfallError : public Error {
 public:
  ShortfallError(const std::string& task, std::size_t requested, std::size_t available)
      : Error(ErrorKind::shortfall, task + ": requested " + std::to_string(requested) +
                                        " instances but only " + std::to_string(available) +
                                        " are available"),
        requested_(requested),
        available_(available) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t requested_;
  std::size_t available_;
};

}  // namespace probekit
