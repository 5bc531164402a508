#include "risa/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "risa/error.hpp"

namespace risa::io {

namespace {

bool needs_quoting(const std::string& field) {
  return field.find_first_of(",\"\r\n") != std::string::npos;
}

std::string quote(const std::string& field) {
  if (!needs_quoting(field)) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV: " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&]() {
    record.push_back(field);
    field.clear();
  };
  auto end_record = [&]() {
    end_field();
    if (record.size() == 1 && record[0].empty()) {
      record.clear();
      return;  // blank line
    }
    if (table.header.empty()) {
      table.header = record;
    } else {
      if (record.size() != table.header.size())
        throw DataError("CSV line " + std::to_string(record_line) + ": expected " +
                        std::to_string(table.header.size()) + " fields, got " +
                        std::to_string(record.size()));
      table.rows.push_back(record);
    }
    record.clear();
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw DataError("CSV line " + std::to_string(line) + ": stray quote");
        in_quotes = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field += c;
    }
  }
  if (in_quotes) throw DataError("CSV line " + std::to_string(record_line) + ": unterminated quote");
  if (!field.empty() || !record.empty()) end_record();
  if (table.header.empty()) throw DataError("CSV has no header row: " + path);
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open CSV for writing: " + path);
  auto write_record = [&](const std::vector<std::string>& record) {
    for (std::size_t i = 0; i < record.size(); ++i) {
      if (i) out << ',';
      out << quote(record[i]);
    }
    out << '\n';
  };
  write_record(table.header);
  for (const auto& row : table.rows) write_record(row);
  if (!out) throw DataError("CSV write failed: " + path);
}

Matrix to_matrix(const CsvTable& table, const std::vector<std::size_t>& columns) {
  Matrix m(table.rows.size(), columns.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string& cell = table.rows[r][columns[c]];
      if (cell.empty())
        throw DataError("CSV line " + std::to_string(r + 2) + ": missing value");
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw DataError("CSV line " + std::to_string(r + 2) + ": not a number: " + cell);
      m(r, c) = v;
    }
  }
  return m;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace risa::io
