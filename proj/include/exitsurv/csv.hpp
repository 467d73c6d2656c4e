#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace exitsurv {

// RFC 4180 style CSV: quoted fields, "" escapes, CRLF tolerated.
// parse_csv_line handles one physical record; read_csv re-joins records
// whose quoted fields span line breaks.
std::vector<std::string> parse_csv_line(const std::string& line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);  // throws on I/O failure

std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace exitsurv
