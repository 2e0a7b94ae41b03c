#include "hybridcav/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hybridcav {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

} // namespace

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

void CsvTable::require(const std::vector<std::string>& names) const {
  for (const std::string& n : names)
    if (column(n) < 0) throw SchemaError(source + ": missing column '" + n + "'");
}

std::vector<std::string> CsvTable::strings(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw SchemaError(source + ": missing column '" + name + "'");
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
  return out;
}

std::vector<double> CsvTable::numbers(const std::string& name) const {
  const std::vector<std::string> cells = strings(name);
  std::vector<double> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string& s = cells[i];
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out[i]);
    if (s.empty() || ec != std::errc() || ptr != end)
      throw SchemaError(source + ":" + std::to_string(line_numbers[i]) + ": column '" + name + "': '" + s +
                        "' is not a number");
  }
  return out;
}

std::vector<int> CsvTable::integers(const std::string& name) const {
  const std::vector<std::string> cells = strings(name);
  std::vector<int> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string& s = cells[i];
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out[i]);
    if (s.empty() || ec != std::errc() || ptr != end)
      throw SchemaError(source + ":" + std::to_string(line_numbers[i]) + ": column '" + name + "': '" + s +
                        "' is not an integer");
  }
  return out;
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  t.source = source;
  std::string line;
  int number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    std::vector<std::string> cells = split(s);
    if (!have_header) {
      t.header = std::move(cells);
      for (const std::string& h : t.header)
        if (h.empty()) throw SchemaError(source + ":" + std::to_string(number) + ": empty column name in header");
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw SchemaError(source + ":" + std::to_string(number) + ": expected " + std::to_string(t.header.size()) +
                        " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(number);
  }
  if (!have_header) throw SchemaError(source + ": no header row");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open");
  return parse_csv(in, path);
}

std::string format_number(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns, int digits) {
  if (header.size() != columns.size()) throw std::invalid_argument("write_csv: header and columns differ");
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != n) throw std::invalid_argument("write_csv: ragged columns");
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << format_number(columns[j][i], digits);
    out << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns, int digits) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot write");
  write_csv(out, header, columns, digits);
}

} // namespace hybridcav
