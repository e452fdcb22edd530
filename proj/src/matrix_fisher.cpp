#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "so3lap/dist.hpp"

namespace so3lap {

MatrixFisher::MatrixFisher(const Mat3& a) : a_(a), svd_(proper_svd(a)) {
  if (!a.allFinite()) throw std::invalid_argument("MatrixFisher: non-finite parameter");
}

double mf_log_pdf(const MatrixFisher& d, const Rotation& r, double log_f) {
  return (d.a().array() * r.matrix().array()).sum() - log_f;
}

double mf_log_norm_grid(const MatrixFisher& d, const So3Grid& grid) {
  if (grid.rotations.empty()) throw std::invalid_argument("mf_log_norm_grid: empty grid");
  std::vector<double> e(grid.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    e[i] = (d.a().array() * grid.rotations[i].matrix().array()).sum();
    top = std::max(top, e[i]);
  }
  double sum = 0.0;
  for (double v : e) sum += std::exp(v - top);
  return top + std::log(sum * grid.cell_weight);
}

double mf_norm_grid(const MatrixFisher& d, const So3Grid& grid) {
  return std::exp(mf_log_norm_grid(d, grid));
}

Rotation mf_mode(const MatrixFisher& d) { return d.svd().uvt(); }

}  // namespace so3lap
