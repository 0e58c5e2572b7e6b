#pragma once

#include <string>
#include <vector>

namespace tabdit {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

// RFC-4180: comma separated, double-quote quoting with "" escapes, CRLF or
// LF line ends, first record is the header.
CsvTable read_csv_file(const std::string& path);
CsvTable parse_csv(const std::string& text);

std::string format_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);
// Writes to a temp file in the same directory and renames into place.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace tabdit
