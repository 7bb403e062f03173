#include "i2c/text_io.hpp"

#include "i2c/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace i2c {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw InputError("table has no column '" + std::string(name) + "'");
}

double CsvTable::number(std::size_t row, std::string_view name) const {
  const std::string& s = rows.at(row).at(column(name));
  if (s == "nan" || s.empty()) return NAN;
  return std::stod(s);
}

long long CsvTable::integer(std::size_t row, std::string_view name) const {
  return std::stoll(rows.at(row).at(column(name)));
}

std::string CsvTable::comment_value(std::string_view key) const {
  for (const auto& c : comments) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) continue;
    if (std::string_view(c).substr(0, eq) == key) return c.substr(eq + 1);
  }
  return {};
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string c = line.substr(1);
      if (!c.empty() && c[0] == ' ') c.erase(0, 1);
      t.comments.push_back(std::move(c));
      continue;
    }
    if (t.header.empty()) {
      t.header = split(line, ',');
    } else {
      t.rows.push_back(split(line, ','));
    }
  }
  if (t.header.empty()) throw InputError(path.string() + " has no header row");
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& c : table.comments) out << "# " << c << '\n';
  for (std::size_t k = 0; k < table.header.size(); ++k) out << (k ? "," : "") << table.header[k];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
    out << '\n';
  }
}

}  // namespace i2c
