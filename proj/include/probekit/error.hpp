#pragma once

#include <stdexcept>
#include <string>

namespace probekit {

/// All recoverable failures (parse errors, contract violations, bad inputs)
/// are reported as Error. Internal logic bugs use assertions instead.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

}  // namespace probekit
