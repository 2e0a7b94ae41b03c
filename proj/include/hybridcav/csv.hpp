#ifndef HYBRIDCAV_CSV_HPP
#define HYBRIDCAV_CSV_HPP

// Small CSV layer for traces and reports: header row required, '#' comment
// lines and blank lines skipped, columns looked up by name.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridcav {

class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class CsvTable {
public:
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // source line of each row

  int column(const std::string& name) const;  // -1 when absent
  void require(const std::vector<std::string>& names) const;

  // Numeric column; throws SchemaError naming the column and line on bad cells.
  std::vector<double> numbers(const std::string& name) const;
  std::vector<int> integers(const std::string& name) const;
  std::vector<std::string> strings(const std::string& name) const;
};

CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv(const std::string& path);

// Writes a numeric table with fixed significant digits (byte-stable output).
void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns, int digits = 10);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns, int digits = 10);

std::string format_number(double value, int digits = 10);

} // namespace hybridcav

#endif // HYBRIDCAV_CSV_HPP
