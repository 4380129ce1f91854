#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pmlab {

// Shortest round-trip decimal form; "inf"/"-inf"/"nan" for non-finite values.
std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& cell(std::string_view text);
  CsvWriter& cell(const char* text) { return cell(std::string_view(text)); }
  CsvWriter& cell(const std::string& text) { return cell(std::string_view(text)); }
  CsvWriter& cell(double v);
  CsvWriter& cell(std::uint64_t v);
  CsvWriter& cell(int v) { return cell(static_cast<std::uint64_t>(v)); }
  CsvWriter& cell(bool v) { return cell(std::string_view(v ? "true" : "false")); }
  void end_row();

  std::size_t rows() const { return rows_; }
  const std::string& text() const { return text_; }

 private:
  std::size_t columns_;
  std::size_t pending_ = 0;
  std::size_t rows_ = 0;
  std::string text_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws when missing
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace pmlab
