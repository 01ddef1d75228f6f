#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace icmr::cmr {

// null | number | text
using Cell = std::variant<std::monostate, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(const std::string& name) const;
  // Row whose first cell is the text `key`.
  const std::vector<Cell>* find_row(const std::string& key) const;
  // Numeric cell of row `key`, column `name`; nullopt when the cell is null.
  // Throws std::out_of_range for unknown rows/columns.
  std::optional<double> number(const std::string& key, const std::string& name) const;

  bool operator==(const Table&) const = default;
};

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  bool operator==(const Series&) const = default;
};

struct Curve {
  std::string x_unit;
  std::string y_unit;
  std::map<std::string, Series> series;
  bool operator==(const Curve&) const = default;
};

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structured report carried in REPORT messages as JSON:
//   {"kind": "...", "info": {k: v}, "flags": [...],
//    "tables": {name: {"columns": [...], "rows": [[...]]}},
//    "curves": {name: {"x_unit": .., "y_unit": .., "series": {label: {"x": [..], "y": [..]}}}}}
struct ReportDocument {
  std::string kind;
  std::map<std::string, std::string> info;
  std::vector<std::string> flags;
  std::map<std::string, Table> tables;
  std::map<std::string, Curve> curves;

  bool has_flag(const std::string& flag) const;
  // Throws ReportError naming the missing table.
  const Table& table(const std::string& name) const;

  std::string serialize() const;
  static ReportDocument parse(std::string_view text);

  bool operator==(const ReportDocument&) const = default;
};

inline Cell cell(std::optional<double> v) { return v ? Cell{*v} : Cell{}; }

}  // namespace icmr::cmr
