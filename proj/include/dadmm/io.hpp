#pragma once

#include <Eigen/Dense>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dadmm/metrics.hpp"

namespace dadmm {

/// Dense matrix CSV: header line "rows,cols", then row-major values, one
/// matrix row per line.
inline void write_matrix_csv(const Eigen::MatrixXd& m, std::ostream& out) {
  out << m.rows() << "," << m.cols() << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ",";
      out << format_double(m(r, c));
    }
    out << "\n";
  }
}

inline Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::invalid_argument("read_matrix_csv: empty input");
  Eigen::Index rows = 0, cols = 0;
  {
    std::istringstream hs(header);
    char comma = 0;
    if (!(hs >> rows >> comma >> cols) || comma != ',') {
      throw std::invalid_argument("read_matrix_csv: expected header 'rows,cols'");
    }
  }
  Eigen::MatrixXd m(rows, cols);
  std::string line;
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw std::invalid_argument("read_matrix_csv: truncated input");
    std::istringstream ls(line);
    std::string field;
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!std::getline(ls, field, ',')) {
        throw std::invalid_argument("read_matrix_csv: short row " + std::to_string(r));
      }
      m(r, c) = std::stod(field);
    }
  }
  return m;
}

inline void write_vector_csv(const Eigen::VectorXd& v, std::ostream& out) {
  write_matrix_csv(v, out);
}

inline Eigen::VectorXd read_vector_csv(std::istream& in) {
  const Eigen::MatrixXd m = read_matrix_csv(in);
  if (m.cols() != 1) throw std::invalid_argument("read_vector_csv: expected a single column");
  return m.col(0);
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_file: cannot open " + path);
  out << contents;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dadmm
