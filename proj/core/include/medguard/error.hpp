#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medguard {

/// Failure categories shared by every module. The CLI maps each one onto a
/// stable process exit code (see exit_code()).
enum class Errc {
  oversize_message,
  invalid_record,
  malformed_blob,
  tamper_detected,
  auth_failure,
  replay_or_reorder,
  session_closed,
  denied,
  not_found,
  channel_down,
  pump_faulted,
  controller_down,
  limit_exceeded,
  illegal_transition,
  script_error,
  unknown_edge,
  negative_rate,
  step_too_large,
  singular_system,
  invalid_argument,
  io_error,
};

std::string_view to_string(Errc code) noexcept;

/// Process exit code for an error category:
/// 2 integrity, 3 malformed input, 4 authn/authz, 5 I/O, 6 numerical, 7 fault state.
int exit_code(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace medguard
