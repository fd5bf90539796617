#pragma once

#include <vector>

#include <Eigen/Dense>

namespace seqsteal {

/// Identical rows of a matrix merged into one, with their counts. Sums over
/// rows of any per-row function can be taken on the compressed form exactly.
struct CompressedRows {
  Eigen::MatrixXd rows;
  Eigen::VectorXd multiplicity;
  std::vector<int> group;  // original row -> compressed row
};

CompressedRows compress_rows(const Eigen::MatrixXd& m);

}  // namespace seqsteal
