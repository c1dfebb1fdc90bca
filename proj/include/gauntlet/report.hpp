#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace gauntlet::harness {

// Tabular experiment output. Cells are preformatted strings so the CSV and
// JSON payloads are byte-stable across reruns; wall-clock metadata lives in a
// separate block that is excluded from the payload.
struct Report {
    std::string kind;
    std::string config_fingerprint;
    uint64_t seed = 0;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    double wall_seconds = 0.0;
};

std::string fmt4(double v);  // fixed 4 decimals, '.' separator; 1 -> "1.0000"

std::string to_csv(const Report& r);
nlohmann::json payload_json(const Report& r);  // deterministic part
nlohmann::json full_json(const Report& r);     // payload + "meta" block

enum class ReportFormat { csv, json };

void write_report(const Report& r, const std::string& path, ReportFormat format);

}  // namespace gauntlet::harness
