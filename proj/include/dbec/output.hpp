#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace dbec::output {

std::string version();

/// Conventions shared by every output file.
extern const char* const kEnergyConvention;
extern const char* const kKappaConvention;
extern const char* const kUnitConvention;

/// Metadata heading every output file. `invocation` is the argument list
/// after the program name; `config` the fully resolved option set.
struct Header {
    std::string command;
    std::string invocation;
    nlohmann::json config;
    std::vector<std::string> extra;  // additional "key: value" lines
};

/// Shortest text that reads back to the same double.
std::string number(double x);

/// CSV file with '#' metadata lines, a column row, data rows and optional
/// '#' footer lines. Throws std::runtime_error if the file cannot be opened.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const Header& header, const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& cells);
    void footer(const std::string& line);

private:
    std::ofstream out_;
    std::size_t ncols_;
};

void write_json(const std::string& path, const nlohmann::json& j);

/// Metadata block as JSON, for sidecar files.
nlohmann::json header_json(const Header& header);

}  // namespace dbec::output
