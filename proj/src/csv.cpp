#include "fastnn/csv.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fastnn/bench.hpp"

namespace fastnn {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trimmed(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

CsvTable read_numeric_csv(const std::string& text, const std::string& origin) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  // drop trailing blank lines, keep interior ones as errors
  while (!lines.empty() && trimmed(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw std::invalid_argument(origin + ": empty file");

  CsvTable table;
  for (const std::string& name : split_line(lines[0])) {
    const std::string t = trimmed(name);
    if (t.empty())
      throw std::invalid_argument(origin + ":1: empty column name");
    for (const std::string& seen : table.columns)
      if (seen == t)
        throw std::invalid_argument(origin + ":1: duplicate column '" + t +
                                    "'");
    table.columns.push_back(t);
  }
  const std::size_t n_cols = table.columns.size();
  const std::size_t n_rows = lines.size() - 1;
  table.values.resize(static_cast<Eigen::Index>(n_rows),
                      static_cast<Eigen::Index>(n_cols));
  for (std::size_t i = 0; i < n_rows; ++i) {
    const std::vector<std::string> cells = split_line(lines[i + 1]);
    const std::string row_tag = origin + ":" + std::to_string(i + 2);
    if (cells.size() != n_cols)
      throw std::invalid_argument(row_tag + ": expected " +
                                  std::to_string(n_cols) + " cells, found " +
                                  std::to_string(cells.size()));
    for (std::size_t j = 0; j < n_cols; ++j) {
      const std::string cell = trimmed(cells[j]);
      const std::string where =
          row_tag + ":" + std::to_string(j + 1) + " ('" + table.columns[j] +
          "')";
      if (cell.empty())
        throw std::invalid_argument(where + ": empty cell");
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end != cell.c_str() + cell.size())
        throw std::invalid_argument(where + ": not a number: '" + cell + "'");
      if (!std::isfinite(v))
        throw std::invalid_argument(where + ": non-finite value '" + cell +
                                    "'");
      table.values(static_cast<Eigen::Index>(i),
                   static_cast<Eigen::Index>(j)) = v;
    }
  }
  return table;
}

CsvTable load_numeric_csv(const std::string& path) {
  return read_numeric_csv(read_text_file(path), path);
}

std::string to_csv(const CsvTable& table) {
  if (table.columns.size() !=
      static_cast<std::size_t>(table.values.cols()))
    throw std::invalid_argument("column names do not match value columns");
  std::ostringstream os;
  for (std::size_t j = 0; j < table.columns.size(); ++j)
    os << (j ? "," : "") << table.columns[j];
  os << '\n';
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j)
      os << (j ? "," : "") << format_double(table.values(i, j));
    os << '\n';
  }
  return os.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("read failed on " + path);
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out << text;
  out.flush();
  if (!out) throw IoError("write failed on " + path);
}

Eigen::Index column_index(const CsvTable& table, const std::string& name) {
  Eigen::Index found = -1;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (table.columns[j] != name) continue;
    if (found >= 0)
      throw std::invalid_argument("column '" + name + "' appears twice");
    found = static_cast<Eigen::Index>(j);
  }
  if (found < 0) throw std::invalid_argument("no column named '" + name + "'");
  return found;
}

CsvTable with_column(const CsvTable& table, const std::string& name,
                     const Eigen::VectorXd& values) {
  if (values.size() != table.values.rows())
    throw std::invalid_argument("new column length does not match row count");
  CsvTable out;
  out.columns = table.columns;
  out.columns.push_back(name);
  out.values.resize(table.values.rows(), table.values.cols() + 1);
  out.values.leftCols(table.values.cols()) = table.values;
  out.values.col(table.values.cols()) = values;
  return out;
}

}  // namespace fastnn
