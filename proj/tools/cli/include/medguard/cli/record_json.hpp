#pragma once

#include <string>
#include <string_view>

#include "medguard/record.hpp"

namespace medguard::cli {

/// Reads the editable JSON form of a record. A missing "kind" means
/// "health_record". Throws Error{invalid_record} on schema problems.
///
///   {"kind": "health_record", "patient_id": "p-001", "timestamp": 1700000000,
///    "glucose_readings": [{"time": "07:30", "mg_dl": 142, "meal": "ac_breakfast"}],
///    "profile": {"name": "Jane Roe", "AC breakfast Mean": "142"}}
///
///   {"kind": "prescription_command", "command_id": "c-1", "patient_id": "p-001",
///    "issuer": "dr-lee", "issued_at": 1700000000,
///    "schedule": [{"time": "08:00", "dose": 2.5, "rate": 10}]}
Record record_from_json(std::string_view text);

std::string record_to_json(const Record& record, int indent = 2);

}  // namespace medguard::cli
