#include "dac/kernels.hpp"

#include <atomic>
#include <cstdint>

#include "dac/errors.hpp"

namespace dac::kernels {

namespace {

std::atomic<bool> g_parallel{true};

void check_mul_dims(std::size_t inner_a, std::size_t inner_b, const char* what) {
    if (inner_a != inner_b) {
        throw InvalidInputError(std::string(what) + ": inner dimensions disagree");
    }
}

}  // namespace

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

// ---------------------------------------------------------------------------

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
    check_mul_dims(a.cols(), b.rows(), "matmul");
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    Matrix c(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < m; ++t) acc += a(i, t) * b(t, j);
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix matmul_omp(const Matrix& a, const Matrix& b) {
    check_mul_dims(a.cols(), b.rows(), "matmul");
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    Matrix c(n, p);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < m; ++t) acc += a(i, t) * b(t, j);
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    return parallel_enabled() ? matmul_omp(a, b) : matmul_serial(a, b);
}

// ---------------------------------------------------------------------------

Matrix matmul_at_b_serial(const Matrix& a, const Matrix& b) {
    check_mul_dims(a.rows(), b.rows(), "matmul_at_b");
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    Matrix c(m, p);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < n; ++t) acc += a(t, i) * b(t, j);
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix matmul_at_b_omp(const Matrix& a, const Matrix& b) {
    check_mul_dims(a.rows(), b.rows(), "matmul_at_b");
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    Matrix c(m, p);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < n; ++t) acc += a(t, i) * b(t, j);
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    return parallel_enabled() ? matmul_at_b_omp(a, b) : matmul_at_b_serial(a, b);
}

// ---------------------------------------------------------------------------

Matrix matmul_a_bt_serial(const Matrix& a, const Matrix& b) {
    check_mul_dims(a.cols(), b.cols(), "matmul_a_bt");
    const std::size_t n = a.rows(), p = a.cols(), m = b.rows();
    Matrix c(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < p; ++t) acc += a(i, t) * b(j, t);
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix matmul_a_bt_omp(const Matrix& a, const Matrix& b) {
    check_mul_dims(a.cols(), b.cols(), "matmul_a_bt");
    const std::size_t n = a.rows(), p = a.cols(), m = b.rows();
    Matrix c(n, m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < p; ++t) acc += a(i, t) * b(j, t);
            c(i, j) = acc;
        }
    }
    return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    return parallel_enabled() ? matmul_a_bt_omp(a, b) : matmul_a_bt_serial(a, b);
}

// ---------------------------------------------------------------------------

void add_bias_rows_serial(Matrix& m, std::span<const double> bias) {
    if (bias.size() != m.cols()) {
        throw InvalidInputError("add_bias_rows: bias length != column count");
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += bias[j];
    }
}

void add_bias_rows_omp(Matrix& m, std::span<const double> bias) {
    if (bias.size() != m.cols()) {
        throw InvalidInputError("add_bias_rows: bias length != column count");
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m.rows()); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += bias[j];
    }
}

void add_bias_rows(Matrix& m, std::span<const double> bias) {
    if (parallel_enabled()) {
        add_bias_rows_omp(m, bias);
    } else {
        add_bias_rows_serial(m, bias);
    }
}

// ---------------------------------------------------------------------------

std::vector<double> column_sums_serial(const Matrix& m) {
    std::vector<double> s(m.cols(), 0.0);
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) acc += m(i, j);
        s[j] = acc;
    }
    return s;
}

std::vector<double> column_sums_omp(const Matrix& m) {
    std::vector<double> s(m.cols(), 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(m.cols()); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) acc += m(i, j);
        s[j] = acc;
    }
    return s;
}

std::vector<double> column_sums(const Matrix& m) {
    return parallel_enabled() ? column_sums_omp(m) : column_sums_serial(m);
}

// ---------------------------------------------------------------------------

void relu_inplace_serial(Matrix& m) {
    for (double& x : m.values()) {
        if (x < 0.0) x = 0.0;
    }
}

void relu_inplace_omp(Matrix& m) {
    double* d = m.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m.size()); ++i) {
        if (d[i] < 0.0) d[i] = 0.0;
    }
}

void relu_inplace(Matrix& m) {
    if (parallel_enabled()) {
        relu_inplace_omp(m);
    } else {
        relu_inplace_serial(m);
    }
}

// ---------------------------------------------------------------------------

namespace {
void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidInputError(std::string(what) + ": shapes disagree");
    }
}
}  // namespace

void relu_backward_inplace_serial(const Matrix& pre_activation, Matrix& grad) {
    check_same_shape(pre_activation, grad, "relu_backward");
    const double* p = pre_activation.data();
    double* g = grad.data();
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (p[i] <= 0.0) g[i] = 0.0;
    }
}

void relu_backward_inplace_omp(const Matrix& pre_activation, Matrix& grad) {
    check_same_shape(pre_activation, grad, "relu_backward");
    const double* p = pre_activation.data();
    double* g = grad.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(grad.size()); ++i) {
        if (p[i] <= 0.0) g[i] = 0.0;
    }
}

void relu_backward_inplace(const Matrix& pre_activation, Matrix& grad) {
    if (parallel_enabled()) {
        relu_backward_inplace_omp(pre_activation, grad);
    } else {
        relu_backward_inplace_serial(pre_activation, grad);
    }
}

}  // namespace dac::kernels
