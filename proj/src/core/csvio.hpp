#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"

namespace mtg {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws a schema error when absent.
  std::size_t col(const std::string& name) const;
};

// Comma-separated, UTF-8, '.' decimal point. Lines starting with '#'
// (provenance headers) are skipped. Fields must not contain commas.
CsvTable read_csv_file(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin);

// Round-trip-exact double formatting ("%.17g").
std::string format_double(double v);

double parse_double(const std::string& field, const std::string& context);
long parse_long(const std::string& field, const std::string& context);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// One '#'-prefixed provenance line placed at the top of every emitted table.
std::string provenance_line(std::uint64_t config_hash);

}  // namespace mtg
