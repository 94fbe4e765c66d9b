#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace alforge {

inline constexpr int kCsvSchemaVersion = 1;

/// Comma-separated table with a leading `# schema=1` line and one header
/// row. Floats are written with 17 significant digits so every double
/// round-trips exactly.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  const std::string& text(std::size_t row, const std::string& name) const;
};

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& cell(const std::string& text);
  CsvWriter& cell(double value);
  CsvWriter& cell(std::size_t value);
  CsvWriter& cell(long long value);
  CsvWriter& cell(int value) { return cell(static_cast<long long>(value)); }
  void end_row();

  std::string str() const;
  void save(const std::string& path) const;

 private:
  std::size_t columns_;
  std::string body_;
  std::vector<std::string> pending_;
};

/// Throws ConfigError naming the file and line on schema mismatch or a
/// ragged row.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<csv>");

}  // namespace alforge
