#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dac {

/// Dense row-major matrix of doubles. Deliberately minimal: the training code
/// only needs storage plus the handful of kernels in kernels.hpp.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {v_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {v_.data() + i * cols_, cols_}; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

}  // namespace dac
