#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace odesens {

/// RFC-4180 table with a header row. Numbers are written with 17 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  void add_row(const std::vector<double>& values);

  [[nodiscard]] const std::vector<std::string>& header() const noexcept { return header_; }
  [[nodiscard]] const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

  [[nodiscard]] std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// "%.17g", with "nan"/"inf"/"-inf" for non-finite values.
std::string format_double(double v);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(const std::string& field);

/// Minimal RFC-4180 reader; returns header + rows.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace odesens
