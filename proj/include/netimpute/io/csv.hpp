#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace netimpute::io {

/// Parsed CSV file with a header row. Fields are unquoted.
struct CsvTable {
  std::string source;  // file name, for diagnostics
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find_column(std::string_view name) const;
  /// Throws ValidationError naming the file when the column is absent.
  std::size_t column(std::string_view name) const;
  /// "file:line" of a data row (header is line 1).
  std::string where(std::size_t row) const;
};

CsvTable parse_csv(std::string_view text, const std::string& source);
/// Throws ValidationError naming the path when it cannot be opened.
CsvTable read_csv(const std::filesystem::path& path);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

/// Shortest round-trip representation; identical on every run.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);
double parse_double(const std::string& s, const std::string& context);
bool parse_bool01(const std::string& s, const std::string& context);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see a partial file.
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace netimpute::io
