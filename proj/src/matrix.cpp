#include "keyshap/matrix.hpp"

#include <cmath>
#include <numeric>

namespace keyshap {

double SquareMatrix::row_sum(std::size_t i) const noexcept {
  const auto r = row(i);
  return std::accumulate(r.begin(), r.end(), 0.0);
}

bool SquareMatrix::is_symmetric(double tol) const noexcept {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
  return true;
}

SquareMatrix symmetric_row_normalized(const SquareMatrix& m, std::size_t* bad_row) {
  const std::size_t n = m.size();
  std::vector<double> sums(n);
  for (std::size_t i = 0; i < n; ++i) {
    sums[i] = m.row_sum(i);
    if (!(sums[i] > 0.0)) {
      if (bad_row) *bad_row = i;
      return {};
    }
  }
  SquareMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      // Same expression for (i,j) and (j,i) so the result is exactly symmetric.
      const double v = 0.5 * (m(i, j) / sums[i] + m(j, i) / sums[j]);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

}  // namespace keyshap
