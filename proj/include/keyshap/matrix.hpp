#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace keyshap {

// Dense row-major n x n matrix of doubles.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * n_, n_};
  }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * n_, n_}; }

  double row_sum(std::size_t i) const noexcept;
  bool is_symmetric(double tol = 0.0) const noexcept;

  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Half-sum of the row-normalized matrix and its transpose. Shared by the
// connectivity and perturbation-influence scores. Returns the index of the
// first zero-sum row through `bad_row` instead of dividing by zero.
SquareMatrix symmetric_row_normalized(const SquareMatrix& m, std::size_t* bad_row);

}  // namespace keyshap
