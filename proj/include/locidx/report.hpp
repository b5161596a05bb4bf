#pragma once
// Tables and writers for stage outputs.

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace locidx {

using Cell = std::variant<std::string, double, long long, bool>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::runtime_error("table '" + name + "': row width mismatch");
    rows.push_back(std::move(row));
  }
};

inline std::string format_cell(const Cell& c) {
  if (auto s = std::get_if<std::string>(&c)) {
    if (s->find_first_of(",\"\n") == std::string::npos) return *s;
    std::string q = "\"";
    for (char ch : *s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  if (auto d = std::get_if<double>(&c)) {
    if (std::isnan(*d)) return "nan";
    if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << *d;
    return os.str();
  }
  if (auto i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<bool>(c) ? "true" : "false";
}

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_cell(r[i]);
    os << '\n';
  }
}

inline nlohmann::json table_json(const Table& t) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json o;
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, double>) {
              if (std::isfinite(v))
                o[t.columns[i]] = v;
              else
                o[t.columns[i]] = format_cell(v);
            } else {
              o[t.columns[i]] = v;
            }
          },
          r[i]);
    }
    arr.push_back(std::move(o));
  }
  return arr;
}

enum class OutputFormat { csv, json };

// Writes <dir>/<name>.csv or .json; creates dir.
inline std::filesystem::path write_table(const std::filesystem::path& dir, const Table& t, OutputFormat f) {
  std::filesystem::create_directories(dir);
  auto path = dir / (t.name + (f == OutputFormat::csv ? ".csv" : ".json"));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (f == OutputFormat::csv)
    write_csv(out, t);
  else
    out << table_json(t).dump(2) << '\n';
  return path;
}

}  // namespace locidx
