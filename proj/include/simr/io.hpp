#pragma once

// CSV ingestion. The header row names columns; selected columns are parsed
// strictly (an unparseable cell is an error with its row and column).

#include <simr/data_model.hpp>

#include <istream>
#include <map>
#include <string>
#include <vector>

namespace simr::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Index column(const std::string& name) const;  // -1 if absent
};

CsvTable parse_csv(std::istream& in, const std::string& source = "<input>");
CsvTable read_csv(const std::string& path);

struct ColumnSelection {
  std::string response;
  std::vector<std::string> predictors;  // empty: every column but the response
  std::map<std::string, double> transforms;  // column -> exponent, applied before standardization
};

/// Builds a dataset from the selected columns. Power transforms x^e need
/// finite positive exponents; non-finite results are rejected.
Dataset<double> to_dataset(const CsvTable& table, const ColumnSelection& sel, const std::string& source = "<input>");

Dataset<double> load_dataset(const std::string& path, const ColumnSelection& sel);

/// Throws ParseError naming every expected column missing from the header.
void require_columns(const CsvTable& table, const std::vector<std::string>& expected);

/// Columns expected in the ozone workflow.
const std::vector<std::string>& ozone_columns();

void write_csv(std::ostream& out, const Dataset<double>& d, const std::string& response_name = "y");

}  // namespace simr::io
