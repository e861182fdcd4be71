#include "medguard/cli/record_json.hpp"

#include <json.hpp>

#include "medguard/error.hpp"

namespace medguard::cli {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::invalid_record, what); }

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing field '") + key + "'");
  return *it;
}

std::string text_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) bad(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t int_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) bad(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

double number_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) bad(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

TimeOfDay time_field(const json& j, const char* key) {
  try {
    return TimeOfDay::parse(text_field(j, key));
  } catch (const Error& e) {
    bad(e.what());
  }
}

HealthRecord health_record(const json& j) {
  HealthRecord r;
  r.patient_id = text_field(j, "patient_id");
  r.timestamp = int_field(j, "timestamp");
  if (auto it = j.find("glucose_readings"); it != j.end()) {
    if (!it->is_array()) bad("glucose_readings must be an array");
    for (const auto& g : *it) {
      auto meal = parse_meal_tag(text_field(g, "meal"));
      if (!meal) bad("unknown meal tag '" + text_field(g, "meal") + "'");
      const std::int64_t mg = int_field(g, "mg_dl");
      if (mg < INT32_MIN || mg > INT32_MAX) bad("mg_dl out of range");
      r.glucose_readings.push_back({time_field(g, "time"), static_cast<std::int32_t>(mg), *meal});
    }
  }
  if (auto it = j.find("profile"); it != j.end()) {
    if (!it->is_object()) bad("profile must be an object");
    for (const auto& [key, value] : it->items()) {
      r.profile[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return r;
}

PrescriptionCommand command(const json& j) {
  PrescriptionCommand c;
  c.command_id = text_field(j, "command_id");
  c.patient_id = text_field(j, "patient_id");
  c.issuer = text_field(j, "issuer");
  c.issued_at = int_field(j, "issued_at");
  const json& schedule = field(j, "schedule");
  if (!schedule.is_array()) bad("schedule must be an array");
  for (const auto& e : schedule) {
    try {
      c.schedule.push_back({time_field(e, "time"), Milliunits::from_units(number_field(e, "dose")),
                            Milliunits::from_units(number_field(e, "rate"))});
    } catch (const Error& err) {
      if (err.code() == Errc::invalid_record) throw;
      bad(err.what());
    }
  }
  return c;
}

}  // namespace

Record record_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("top level must be an object");
  const std::string kind = j.contains("kind") ? text_field(j, "kind") : "health_record";
  if (kind == "health_record") return health_record(j);
  if (kind == "prescription_command") return command(j);
  bad("unknown kind '" + kind + "'");
}

std::string record_to_json(const Record& record, int indent) {
  json j;
  if (const auto* r = std::get_if<HealthRecord>(&record)) {
    j["kind"] = "health_record";
    j["patient_id"] = r->patient_id;
    j["timestamp"] = r->timestamp;
    j["glucose_readings"] = json::array();
    for (const auto& g : r->glucose_readings) {
      j["glucose_readings"].push_back({{"time", g.time.to_string()}, {"mg_dl", g.mg_dl}, {"meal", to_string(g.meal)}});
    }
    j["profile"] = r->profile;
  } else {
    const auto& c = std::get<PrescriptionCommand>(record);
    j["kind"] = "prescription_command";
    j["command_id"] = c.command_id;
    j["patient_id"] = c.patient_id;
    j["issuer"] = c.issuer;
    j["issued_at"] = c.issued_at;
    j["schedule"] = json::array();
    for (const auto& e : c.schedule) {
      j["schedule"].push_back({{"time", e.time.to_string()}, {"dose", e.dose.units()}, {"rate", e.rate_per_hour.units()}});
    }
  }
  return j.dump(indent);
}

}  // namespace medguard::cli
