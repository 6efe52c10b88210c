#ifndef RISKCAL_MATRIX_HPP
#define RISKCAL_MATRIX_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "riskcal/errors.hpp"

namespace riskcal {

// Dense row-major matrix, just enough for feature tables and embeddings.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * cols, cols};
  }
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

}  // namespace riskcal

#endif
