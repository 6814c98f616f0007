#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace rekd {

// Everything numeric in this project is double precision, and every tensor is
// rank 1 or 2, so a dynamic row-major Eigen matrix is the one dense type.
// Row-major keeps the flat data layout identical to what the file formats use.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Lower clamp used inside logs and on uniform draws that feed the double-log
// Gumbel transform.
inline constexpr double kProbFloor = 1e-12;

// Bad config file, bad CLI argument, malformed data file. The CLI maps this
// to exit code 1; any other exception exits 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rekd
