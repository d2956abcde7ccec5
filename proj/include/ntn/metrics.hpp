#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace ntn {

// Schema tags written as the first line of every metrics file, e.g. "#schema=ntn.trace.v1".
inline constexpr const char* kTraceSchema = "ntn.trace.v1";
inline constexpr const char* kEpisodesSchema = "ntn.episodes.v1";
inline constexpr const char* kLearningCurveSchema = "ntn.learning_curve.v1";
inline constexpr const char* kSweepRawSchema = "ntn.sweep_raw.v1";
inline constexpr const char* kSweepSummarySchema = "ntn.sweep_summary.v1";

/// Shortest text that parses back to the same double.
std::string format_number(double v);

/// Comma-separated writer: schema line, header row, then records. LF line endings.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& schema, std::vector<std::string> header);

    void row(const std::vector<std::string>& fields);
    std::size_t columns() const { return header_.size(); }

private:
    std::string path_;
    std::vector<std::string> header_;
    std::ofstream os_;
};

struct CsvTable {
    std::string schema;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column; throws InterfaceError if absent.
    std::size_t column(const std::string& name) const;
};

/// Reads a metrics file, rejecting any schema other than `expected_schema`.
/// Errors name the file and line.
CsvTable read_csv(const std::string& path, const std::string& expected_schema);

void write_json(const std::string& path, const nlohmann::json& doc);

}  // namespace ntn
