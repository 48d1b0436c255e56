#include "dbec/output.hpp"

#include <array>
#include <charconv>
#include <stdexcept>

namespace dbec::output {

#ifndef DBEC_VERSION
#define DBEC_VERSION "unknown"
#endif

std::string version() { return DBEC_VERSION; }

const char* const kEnergyConvention =
    "scaled: N^2 times the per-particle mean-field energy in units of E_d = hbar^2/(2 m a_d^2); "
    "chemical potential = kinetic + trap + 2 (contact + dipolar)";
const char* const kKappaConvention = "kappa = sigma_z/sigma_r = sqrt(A_r/A_z)";
const char* const kUnitConvention =
    "scaled one-boson problem: frequencies N^2 gamma with gamma = omega/(2 omega_d), "
    "widths A with physical A = A/(N^2 a_d^2), time t with physical time = t N^2/omega_d, "
    "scattering length as a/a_d";

std::string number(double x) {
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), r.ptr);
}

nlohmann::json header_json(const Header& h) {
    nlohmann::json j;
    j["tool"] = "dbec";
    j["version"] = version();
    j["command"] = h.command;
    j["invocation"] = h.invocation;
    j["config"] = h.config;
    j["energy_convention"] = kEnergyConvention;
    j["kappa_convention"] = kKappaConvention;
    j["units"] = kUnitConvention;
    return j;
}

CsvWriter::CsvWriter(const std::string& path, const Header& h, const std::vector<std::string>& columns)
    : out_(path), ncols_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot open output file " + path);
    out_ << "# dbec " << version() << "\n";
    out_ << "# command: " << h.command << "\n";
    out_ << "# invocation: " << h.invocation << "\n";
    out_ << "# config: " << h.config.dump() << "\n";
    out_ << "# energy_convention: " << kEnergyConvention << "\n";
    out_ << "# kappa_convention: " << kKappaConvention << "\n";
    out_ << "# units: " << kUnitConvention << "\n";
    for (const auto& line : h.extra) out_ << "# " << line << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != ncols_) throw std::logic_error("CSV row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
}

void CsvWriter::footer(const std::string& line) { out_ << "# " << line << "\n"; }

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << j.dump(2) << "\n";
}

}  // namespace dbec::output
