#ifndef FASTNN_CSV_HPP
#define FASTNN_CSV_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fastnn {

// File-system failures (open/write); parse and shape problems raise
// std::invalid_argument instead so callers can map them to different exit
// codes.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Headered, fully numeric, rectangular. Rows are observations.
struct CsvTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
};

// Parses CSV text. Every data cell must be a finite real; offending cells
// are reported as origin:row:column (1-based, header is row 1). Duplicate
// or empty column names are rejected.
CsvTable read_numeric_csv(const std::string& text,
                          const std::string& origin = "csv");

CsvTable load_numeric_csv(const std::string& path);

std::string to_csv(const CsvTable& table);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// Index of a column that must appear exactly once.
Eigen::Index column_index(const CsvTable& table, const std::string& name);

// Copy of the table with one more column on the right.
CsvTable with_column(const CsvTable& table, const std::string& name,
                     const Eigen::VectorXd& values);

}  // namespace fastnn

#endif
