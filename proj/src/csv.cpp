#include "alforge/csv.hpp"

#include <fstream>
#include <sstream>

#include "alforge/keyvalue.hpp"

namespace alforge {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ConfigError("csv has no column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& h : header) {
    if (h == name) return true;
  }
  return false;
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return parse_double(rows.at(row).at(column(name)), name);
}

const std::string& CsvTable::text(std::size_t row, const std::string& name) const {
  return rows.at(row).at(column(name));
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  body_ = "# schema=" + std::to_string(kCsvSchemaVersion) + "\n" + join(header, ",") + "\n";
}

CsvWriter& CsvWriter::cell(const std::string& text) {
  pending_.push_back(text);
  return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_double(value)); }
CsvWriter& CsvWriter::cell(std::size_t value) { return cell(std::to_string(value)); }
CsvWriter& CsvWriter::cell(long long value) { return cell(std::to_string(value)); }

void CsvWriter::end_row() {
  if (pending_.size() != columns_) {
    throw std::logic_error("csv row has " + std::to_string(pending_.size()) + " cells, header has " +
                           std::to_string(columns_));
  }
  body_ += join(pending_, ",") + "\n";
  pending_.clear();
}

std::string CsvWriter::str() const { return body_; }

void CsvWriter::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body_;
  if (!out) throw std::runtime_error("short write to " + path);
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  const std::string expected = "# schema=" + std::to_string(kCsvSchemaVersion);
  if (!std::getline(in, line) || line != expected) {
    throw ConfigError(origin + ":1: expected '" + expected + "'");
  }
  CsvTable t;
  if (!std::getline(in, line)) throw ConfigError(origin + ":2: missing header row");
  t.header = split(line, ',');
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != t.header.size()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " cells, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path);
}

}  // namespace alforge
