#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "finsup/adversary.hpp"
#include "finsup/dist.hpp"
#include "finsup/teststat.hpp"
#include "finsup/tsirelson.hpp"

namespace finsup::io {

/// Shortest of up to 17 significant digits; round-trips any double.
std::string format_real(double x);

// Writers emit fields in a fixed order so artifacts diff cleanly; readers
// go through nlohmann::json and reject unknown fields.

std::string law_to_json(const dist::Law& law);
dist::Law law_from_json(const nlohmann::json& j);

std::string torus_law_to_json(const tsirelson::TorusLaw& law);
tsirelson::TorusLaw torus_law_from_json(const nlohmann::json& j);

std::string report_to_json(const teststat::ExpectationReport& report);
std::string error_kind_name(teststat::ErrorKind kind);

std::string schedule_to_json(const adversary::AdversarySchedule& schedule);
adversary::AdversarySchedule schedule_from_json(const nlohmann::json& j);

teststat::TestFamily test_family_from_json(const nlohmann::json& j);

tsirelson::PathEventFamily event_family_from_json(const nlohmann::json& j);

SampleSizeMap phi_from_json(const nlohmann::json& owner, const std::string& mode_key,
                            const std::string& table_key);

// strict-parsing helpers
void check_fields(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                  const std::string& where);
const nlohmann::json& require_field(const nlohmann::json& j, const char* key, const std::string& where);
double require_real(const nlohmann::json& j, const char* key, const std::string& where);
std::int64_t require_int(const nlohmann::json& j, const char* key, const std::string& where);
std::string require_string(const nlohmann::json& j, const char* key, const std::string& where);

/// Write via a temp file in the same directory, then rename into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace finsup::io
