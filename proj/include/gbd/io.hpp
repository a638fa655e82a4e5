#pragma once

#include <iosfwd>
#include <string>

#include "gbd/linalg.hpp"

namespace gbd {

/// Shortest round-trip decimal rendering of a double (printf %.17g trimmed
/// via std::to_chars); used everywhere a number must serialize
/// byte-deterministically.
std::string format_double(double value);

/// Matrix CSV format: header line "rows,cols", then one comma-separated line
/// per row, every value round-trip exact.
void save_matrix_csv(const Eigen::Ref<const Matrix>& m, std::ostream& out);
void save_matrix_csv(const Eigen::Ref<const Matrix>& m,
                     const std::string& path);
Matrix load_matrix_csv(std::istream& in);
Matrix load_matrix_csv(const std::string& path);

}  // namespace gbd
