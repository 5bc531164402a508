#pragma once

#include <string>
#include <vector>

#include "risa/linalg.hpp"

namespace risa::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC-4180-style reader: quoted fields, embedded commas/quotes/newlines.
// Ragged or empty-field rows raise DataError with the offending line number.
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const CsvTable& table);

// Parses every cell as a double; non-numeric cells raise DataError.
Matrix to_matrix(const CsvTable& table, const std::vector<std::size_t>& columns);

std::string format_double(double v);  // shortest round-trip representation

}  // namespace risa::io
