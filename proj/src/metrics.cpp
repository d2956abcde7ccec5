#include "ntn/metrics.hpp"

#include <sstream>

#include <fmt/format.h>

#include "ntn/errors.hpp"

namespace ntn {

std::string format_number(double v) { return fmt::format("{}", v); }

CsvWriter::CsvWriter(const std::string& path, const std::string& schema, std::vector<std::string> header)
    : path_(path), header_(std::move(header)), os_(path, std::ios::binary) {
    if (!os_) throw InterfaceError(fmt::format("cannot write {}", path));
    os_ << "#schema=" << schema << '\n';
    row(header_);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != header_.size()) {
        throw PreconditionError(fmt::format("{}: row has {} fields, header has {}", path_, fields.size(), header_.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].find_first_of(",\n") != std::string::npos) {
            throw PreconditionError(fmt::format("{}: field '{}' contains a separator", path_, fields[i]));
        }
        if (i) os_ << ',';
        os_ << fields[i];
    }
    os_ << '\n';
    os_.flush();
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw InterfaceError(fmt::format("no column '{}'", name));
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

CsvTable read_csv(const std::string& path, const std::string& expected_schema) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InterfaceError(fmt::format("cannot read {}", path));
    CsvTable t;
    std::string line;
    if (!std::getline(is, line) || line.rfind("#schema=", 0) != 0) {
        throw InterfaceError(fmt::format("{}:1: missing schema line", path));
    }
    t.schema = line.substr(8);
    if (t.schema != expected_schema) {
        throw InterfaceError(fmt::format("{}:1: unsupported schema '{}', expected '{}'", path, t.schema, expected_schema));
    }
    if (!std::getline(is, line)) throw InterfaceError(fmt::format("{}:2: missing header row", path));
    t.header = split(line);
    int lineno = 2;
    while (std::getline(is, line)) {
        ++lineno;
        auto fields = split(line);
        if (fields.size() != t.header.size()) {
            throw InterfaceError(fmt::format("{}:{}: {} fields, header has {}", path, lineno, fields.size(),
                                             t.header.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

void write_json(const std::string& path, const nlohmann::json& doc) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InterfaceError(fmt::format("cannot write {}", path));
    os << doc.dump(2) << '\n';
}

}  // namespace ntn
