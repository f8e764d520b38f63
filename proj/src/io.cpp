#include <simr/io.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace simr::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Splits one CSV record; double quotes group a field and "" escapes a quote.
std::vector<std::string> split_record(const std::string& line, const std::string& where) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError(where + ": unterminated quoted field");
  fields.push_back(was_quoted ? cur : trim(cur));
  return fields;
}

double parse_cell(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(where + ": cannot parse '" + cell + "' as a number");
  }
  if (!std::isfinite(v)) throw NonFiniteInput(where + ": non-finite value '" + cell + "'");
  return v;
}

}  // namespace

Index CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<Index>(j);
  }
  return -1;
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    auto fields = split_record(line, where);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ParseError(where + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw ParseError(source + ": missing header row");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

Dataset<double> to_dataset(const CsvTable& table, const ColumnSelection& sel, const std::string& source) {
  const Index ycol = table.column(sel.response);
  if (ycol < 0) throw ParseError(source + ": response column '" + sel.response + "' not found");
  std::vector<std::string> names = sel.predictors;
  if (names.empty()) {
    for (const auto& h : table.header) {
      if (h != sel.response && !h.empty()) names.push_back(h);
    }
  }
  std::vector<Index> cols;
  for (const auto& nm : names) {
    const Index c = table.column(nm);
    if (c < 0) throw ParseError(source + ": predictor column '" + nm + "' not found");
    cols.push_back(c);
  }
  for (const auto& [col, e] : sel.transforms) {
    if (std::find(names.begin(), names.end(), col) == names.end()) {
      throw InvalidArgument("transform given for '" + col + "', which is not a selected predictor");
    }
    if (!std::isfinite(e) || !(e > 0.0)) {
      throw InvalidArgument("transform exponent for '" + col + "' must be finite and positive");
    }
  }

  const auto n = static_cast<Index>(table.rows.size());
  const auto p = static_cast<Index>(cols.size());
  Dataset<double> d;
  d.x.resize(n, p);
  d.y.resize(n);
  d.column_names = names;
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::string at = source + ": row " + std::to_string(i + 1) + ", column ";
    d.y(i) = parse_cell(row[static_cast<std::size_t>(ycol)], at + "'" + sel.response + "'");
    for (Index j = 0; j < p; ++j) {
      const auto& nm = names[static_cast<std::size_t>(j)];
      double v = parse_cell(row[static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])], at + "'" + nm + "'");
      if (const auto it = sel.transforms.find(nm); it != sel.transforms.end()) {
        v = std::pow(v, it->second);
        if (!std::isfinite(v)) {
          throw NonFiniteInput(at + "'" + nm + "': power transform gives a non-finite value");
        }
      }
      d.x(i, j) = v;
    }
  }
  return d;
}

Dataset<double> load_dataset(const std::string& path, const ColumnSelection& sel) {
  return to_dataset(read_csv(path), sel, path);
}

void require_columns(const CsvTable& table, const std::vector<std::string>& expected) {
  std::string missing;
  for (const auto& c : expected) {
    if (table.column(c) < 0) missing += (missing.empty() ? "" : ", ") + c;
  }
  if (!missing.empty()) throw ParseError("input is missing expected columns: " + missing);
}

const std::vector<std::string>& ozone_columns() {
  static const std::vector<std::string> cols{"Ozone", "Height", "Humidity", "ITemp", "STemp"};
  return cols;
}

void write_csv(std::ostream& out, const Dataset<double>& d, const std::string& response_name) {
  const auto old = out.precision(17);
  for (Index j = 0; j < d.p(); ++j) {
    out << (d.column_names.size() == static_cast<std::size_t>(d.p()) ? d.column_names[static_cast<std::size_t>(j)]
                                                                       : "x" + std::to_string(j + 1))
        << ',';
  }
  out << response_name << '\n';
  for (Index i = 0; i < d.n(); ++i) {
    for (Index j = 0; j < d.p(); ++j) out << d.x(i, j) << ',';
    out << d.y(i) << '\n';
  }
  out.precision(old);
}

}  // namespace simr::io
