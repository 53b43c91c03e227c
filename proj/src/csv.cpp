#include "ra/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ra::csv {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Table::Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void Table::set_comment(const std::string& text) {
  comments_.clear();
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) comments_.push_back(line);
}

Table& Table::begin_row() {
  rows_.emplace_back();
  rows_.back().reserve(columns_.size());
  return *this;
}

Table& Table::cell(double v) {
  rows_.back().push_back(format_double(v));
  return *this;
}

Table& Table::cell(Index v) {
  rows_.back().push_back(std::to_string(v));
  return *this;
}

Table& Table::cell(const std::string& v) {
  if (v.find_first_of(",\n\"") != std::string::npos)
    throw std::invalid_argument("csv: cell values must not contain ',' or quotes");
  rows_.back().push_back(v);
  return *this;
}

std::string Table::to_string() const {
  std::ostringstream out;
  for (const std::string& c : comments_) out << "# " << c << "\n";
  for (std::size_t i = 0; i < columns_.size(); ++i)
    out << (i ? "," : "") << columns_[i];
  out << "\n";
  for (const auto& row : rows_) {
    if (row.size() != columns_.size())
      throw std::logic_error("csv: row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  return out.str();
}

void Table::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << to_string();
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ra::csv
