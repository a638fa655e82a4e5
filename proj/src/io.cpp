#include "gbd/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

namespace gbd {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void save_matrix_csv(const Eigen::Ref<const Matrix>& m, std::ostream& out) {
  out << m.rows() << ',' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) {
        out << ',';
      }
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void save_matrix_csv(const Eigen::Ref<const Matrix>& m,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path + " for writing");
  }
  save_matrix_csv(m, out);
  if (!out) {
    throw InputError("write to " + path + " failed");
  }
}

Matrix load_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw InputError("matrix CSV is empty");
  }
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  {
    std::istringstream header(line);
    char comma = 0;
    if (!(header >> rows >> comma >> cols) || comma != ',' || rows < 1 ||
        cols < 1) {
      throw InputError("matrix CSV header must be \"rows,cols\", got: " +
                       line);
    }
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw InputError("matrix CSV truncated at row " + std::to_string(i));
    }
    std::istringstream row(line);
    std::string cell;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!std::getline(row, cell, ',')) {
        throw InputError("matrix CSV row " + std::to_string(i) +
                         " has fewer than " + std::to_string(cols) +
                         " columns");
      }
      double value = 0.0;
      const char* begin = cell.data();
      const char* end = begin + cell.size();
      const auto res = std::from_chars(begin, end, value);
      if (res.ec != std::errc() || res.ptr != end) {
        throw InputError("matrix CSV has a non-numeric cell: " + cell);
      }
      m(i, j) = value;
    }
    if (std::getline(row, cell, ',')) {
      throw InputError("matrix CSV row " + std::to_string(i) +
                       " has more than " + std::to_string(cols) + " columns");
    }
  }
  require_finite(m, "matrix CSV");
  return m;
}

Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path + " for reading");
  }
  return load_matrix_csv(in);
}

}  // namespace gbd
