#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace i2c {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Comma-separated table with '#'-prefixed comment lines before the header.
/// Comments carry provenance such as `# producer=<checkpoint id>`.
struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws InputError if missing.
  std::size_t column(std::string_view name) const;
  double number(std::size_t row, std::string_view column) const;
  long long integer(std::size_t row, std::string_view column) const;
  /// Value of a `# key=value` comment, or empty.
  std::string comment_value(std::string_view key) const;
};

/// Throws InputError if the file is missing or unreadable.
CsvTable read_csv(const std::filesystem::path& path);
std::vector<std::string> split(std::string_view line, char sep);

/// Writes comments, header and rows with '\n' line endings.
void write_csv(const std::filesystem::path& path, const CsvTable& table);

}  // namespace i2c
