#include "medguard/error.hpp"

namespace medguard {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::oversize_message: return "OversizeMessage";
    case Errc::invalid_record: return "InvalidRecord";
    case Errc::malformed_blob: return "MalformedBlob";
    case Errc::tamper_detected: return "TamperDetected";
    case Errc::auth_failure: return "AuthFailure";
    case Errc::replay_or_reorder: return "ReplayOrReorder";
    case Errc::session_closed: return "SessionClosed";
    case Errc::denied: return "Deny";
    case Errc::not_found: return "NotFound";
    case Errc::channel_down: return "ChannelDown";
    case Errc::pump_faulted: return "PumpFaulted";
    case Errc::controller_down: return "ControllerDown";
    case Errc::limit_exceeded: return "LimitExceeded";
    case Errc::illegal_transition: return "IllegalTransition";
    case Errc::script_error: return "ScriptError";
    case Errc::unknown_edge: return "UnknownEdge";
    case Errc::negative_rate: return "NegativeRate";
    case Errc::step_too_large: return "StepTooLarge";
    case Errc::singular_system: return "SingularSystem";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::tamper_detected:
      return 2;
    case Errc::oversize_message:
    case Errc::invalid_record:
    case Errc::malformed_blob:
    case Errc::script_error:
    case Errc::unknown_edge:
    case Errc::negative_rate:
    case Errc::illegal_transition:
    case Errc::invalid_argument:
    case Errc::limit_exceeded:
      return 3;
    case Errc::auth_failure:
    case Errc::denied:
    case Errc::replay_or_reorder:
    case Errc::session_closed:
      return 4;
    case Errc::io_error:
    case Errc::not_found:
      return 5;
    case Errc::step_too_large:
    case Errc::singular_system:
      return 6;
    case Errc::channel_down:
    case Errc::pump_faulted:
    case Errc::controller_down:
      return 7;
  }
  return 1;
}

}  // namespace medguard
