#pragma once

#include <string>
#include <vector>

#include "ra/types.hpp"

namespace ra::csv {

/// 17 significant digits, enough for an exact double round trip.
std::string format_double(double v);

/// Comma-separated table with '#' comment lines (the resolved config and
/// seed) ahead of the header row.
class Table {
 public:
  explicit Table(std::vector<std::string> columns);

  /// Each line of `text` becomes one '# ' comment line.
  void set_comment(const std::string& text);

  Table& begin_row();
  Table& cell(double v);
  Table& cell(Index v);
  Table& cell(int v) { return cell(Index(v)); }
  Table& cell(const std::string& v);

  std::string to_string() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> comments_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace ra::csv
