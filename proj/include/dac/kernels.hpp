#pragma once

#include <span>
#include <vector>

#include "dac/matrix.hpp"

namespace dac::kernels {

/// Switches every dispatching kernel between the OpenMP implementation and the
/// serial reference. Both compute each output element with the same scalar
/// accumulation loop, in the same order, so the results are bit-identical; the
/// parallel variants only distribute *independent* output elements across
/// threads and never reorder a floating-point reduction.
void set_parallel(bool on);
bool parallel_enabled();

// ---- C = A * B ------------------------------------------------------------
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_serial(const Matrix& a, const Matrix& b);
Matrix matmul_omp(const Matrix& a, const Matrix& b);

// ---- C = A^T * B (a: n x m, b: n x p -> m x p) -----------------------------
// Used for weight gradients: dW = X^T * dZ.
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
Matrix matmul_at_b_serial(const Matrix& a, const Matrix& b);
Matrix matmul_at_b_omp(const Matrix& a, const Matrix& b);

// ---- C = A * B^T (a: n x p, b: m x p -> n x m) ------------------------------
// Used for input gradients: dX = dZ * W^T.
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
Matrix matmul_a_bt_serial(const Matrix& a, const Matrix& b);
Matrix matmul_a_bt_omp(const Matrix& a, const Matrix& b);

// ---- m(i, j) += bias(j) -----------------------------------------------------
void add_bias_rows(Matrix& m, std::span<const double> bias);
void add_bias_rows_serial(Matrix& m, std::span<const double> bias);
void add_bias_rows_omp(Matrix& m, std::span<const double> bias);

// ---- column sums, accumulated over rows in index order ----------------------
// Used for bias gradients: db = sum of dZ rows.
std::vector<double> column_sums(const Matrix& m);
std::vector<double> column_sums_serial(const Matrix& m);
std::vector<double> column_sums_omp(const Matrix& m);

// ---- ReLU forward / backward -------------------------------------------------
// The derivative at exactly zero is taken as zero.
void relu_inplace(Matrix& m);
void relu_inplace_serial(Matrix& m);
void relu_inplace_omp(Matrix& m);

void relu_backward_inplace(const Matrix& pre_activation, Matrix& grad);
void relu_backward_inplace_serial(const Matrix& pre_activation, Matrix& grad);
void relu_backward_inplace_omp(const Matrix& pre_activation, Matrix& grad);

}  // namespace dac::kernels
