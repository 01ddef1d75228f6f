#include "icmr/cmr/report.hpp"

#include <algorithm>
#include <json.hpp>

namespace icmr::cmr {

using nlohmann::json;

std::size_t Table::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

const std::vector<Cell>* Table::find_row(const std::string& key) const {
  for (const auto& row : rows) {
    if (!row.empty()) {
      if (auto* s = std::get_if<std::string>(&row.front()); s && *s == key) return &row;
    }
  }
  return nullptr;
}

std::optional<double> Table::number(const std::string& key, const std::string& name) const {
  const auto* row = find_row(key);
  if (!row) throw std::out_of_range("no row '" + key + "'");
  const auto& c = row->at(column(name));
  if (auto* d = std::get_if<double>(&c)) return *d;
  if (std::holds_alternative<std::monostate>(c)) return std::nullopt;
  throw std::out_of_range("cell '" + key + "'/'" + name + "' is not numeric");
}

bool ReportDocument::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

const Table& ReportDocument::table(const std::string& name) const {
  auto it = tables.find(name);
  if (it == tables.end()) throw ReportError("report has no table '" + name + "'");
  return it->second;
}

namespace {

json cell_json(const Cell& c) {
  if (auto* d = std::get_if<double>(&c)) return *d;
  if (auto* s = std::get_if<std::string>(&c)) return *s;
  return nullptr;
}

Cell json_cell(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_null()) return std::monostate{};
  throw ReportError("table cells must be number, string or null");
}

}  // namespace

std::string ReportDocument::serialize() const {
  json doc;
  doc["kind"] = kind;
  doc["info"] = info;
  doc["flags"] = flags;
  doc["tables"] = json::object();
  for (const auto& [name, t] : tables) {
    json rows = json::array();
    for (const auto& row : t.rows) {
      json r = json::array();
      for (const auto& c : row) r.push_back(cell_json(c));
      rows.push_back(std::move(r));
    }
    doc["tables"][name] = {{"columns", t.columns}, {"rows", std::move(rows)}};
  }
  doc["curves"] = json::object();
  for (const auto& [name, c] : curves) {
    json series = json::object();
    for (const auto& [label, s] : c.series) series[label] = {{"x", s.x}, {"y", s.y}};
    doc["curves"][name] = {{"x_unit", c.x_unit}, {"y_unit", c.y_unit}, {"series", std::move(series)}};
  }
  return doc.dump(1);
}

ReportDocument ReportDocument::parse(std::string_view text) {
  ReportDocument out;
  try {
    auto doc = json::parse(text);
    out.kind = doc.at("kind").get<std::string>();
    out.info = doc.value("info", json::object()).get<std::map<std::string, std::string>>();
    out.flags = doc.value("flags", json::array()).get<std::vector<std::string>>();
    const json tables = doc.value("tables", json::object());
    const json curves = doc.value("curves", json::object());
    for (const auto& [name, t] : tables.items()) {
      Table table;
      table.columns = t.at("columns").get<std::vector<std::string>>();
      for (const auto& row : t.at("rows")) {
        std::vector<Cell> cells;
        for (const auto& c : row) cells.push_back(json_cell(c));
        table.rows.push_back(std::move(cells));
      }
      out.tables[name] = std::move(table);
    }
    for (const auto& [name, c] : curves.items()) {
      Curve curve;
      curve.x_unit = c.value("x_unit", "");
      curve.y_unit = c.value("y_unit", "");
      for (const auto& [label, s] : c.at("series").items()) {
        curve.series[label] = {s.at("x").get<std::vector<double>>(), s.at("y").get<std::vector<double>>()};
      }
      out.curves[name] = std::move(curve);
    }
  } catch (const json::exception& e) {
    throw ReportError(std::string("malformed report: ") + e.what());
  }
  return out;
}

}  // namespace icmr::cmr
