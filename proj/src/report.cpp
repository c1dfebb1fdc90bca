#include "gauntlet/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace gauntlet::harness {

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string to_csv(const Report& r) {
    std::string out;
    for (size_t i = 0; i < r.columns.size(); ++i) {
        if (i) out += ",";
        out += r.columns[i];
    }
    out += "\n";
    for (const auto& row : r.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += ",";
            out += row[i];
        }
        out += "\n";
    }
    return out;
}

nlohmann::json payload_json(const Report& r) {
    nlohmann::json j;
    j["kind"] = r.kind;
    j["config_fingerprint"] = r.config_fingerprint;
    j["seed"] = r.seed;
    j["columns"] = r.columns;
    j["rows"] = r.rows;
    return j;
}

nlohmann::json full_json(const Report& r) {
    nlohmann::json j;
    j["payload"] = payload_json(r);
    j["meta"]["wall_seconds"] = r.wall_seconds;
    return j;
}

void write_report(const Report& r, const std::string& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    if (format == ReportFormat::csv) {
        out << to_csv(r);
    } else {
        out << full_json(r).dump(2) << "\n";
    }
    if (!out) throw std::runtime_error("failed writing report: " + path);
}

}  // namespace gauntlet::harness
