#include "seqsteal/linalg.hpp"

#include <algorithm>
#include <numeric>

namespace seqsteal {

CompressedRows compress_rows(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(a, c) != m(b, c)) return m(a, c) < m(b, c);
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), less);

  CompressedRows out;
  out.group.assign(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> reps;
  std::vector<double> counts;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || less(order[i - 1], order[i])) {
      reps.push_back(order[i]);
      counts.push_back(0.0);
    }
    counts.back() += 1.0;
    out.group[static_cast<std::size_t>(order[i])] = static_cast<int>(reps.size()) - 1;
  }
  out.rows.resize(static_cast<Eigen::Index>(reps.size()), m.cols());
  out.multiplicity.resize(static_cast<Eigen::Index>(reps.size()));
  for (std::size_t r = 0; r < reps.size(); ++r) {
    out.rows.row(static_cast<Eigen::Index>(r)) = m.row(reps[r]);
    out.multiplicity[static_cast<Eigen::Index>(r)] = counts[r];
  }
  return out;
}

}  // namespace seqsteal
