// Times each OpenMP kernel against its serial reference on training-shaped
// inputs and checks bit-identical results. Exit code is the number of
// mismatching kernels (the parallel variants only distribute independent
// output elements, so equality is exact, not approximate).
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "dac/kernels.hpp"
#include "dac/loss.hpp"
#include "dac/matrix.hpp"
#include "dac/rng.hpp"

using namespace dac;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform01() * 2.0 - 1.0;
    return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up, also primes any lazy allocation
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

int report(const char* name, double serial_ms, double omp_ms, bool equal) {
    std::printf("%-18s serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   %s\n", name, serial_ms,
                omp_ms, serial_ms / omp_ms, equal ? "bit-identical" : "MISMATCH");
    return equal ? 0 : 1;
}

}  // namespace

int main() {
    constexpr int reps = 20;
    Rng rng(99);

    // Shapes mirror a large training step: batch x features, features x width.
    const Matrix a = random_matrix(4096, 64, rng);
    const Matrix b = random_matrix(64, 256, rng);
    const Matrix big = random_matrix(4096, 256, rng);
    const std::vector<double> bias = [&] {
        std::vector<double> v(256);
        for (double& x : v) x = rng.uniform01();
        return v;
    }();

    int mismatches = 0;

    {
        const Matrix s = kernels::matmul_serial(a, b);
        const Matrix p = kernels::matmul_omp(a, b);
        mismatches += report("matmul",
                             time_ms([&] { kernels::matmul_serial(a, b); }, reps),
                             time_ms([&] { kernels::matmul_omp(a, b); }, reps), s == p);
    }
    {
        const Matrix s = kernels::matmul_at_b_serial(a, big);
        const Matrix p = kernels::matmul_at_b_omp(a, big);
        mismatches += report("matmul_at_b",
                             time_ms([&] { kernels::matmul_at_b_serial(a, big); }, reps),
                             time_ms([&] { kernels::matmul_at_b_omp(a, big); }, reps), s == p);
    }
    {
        const Matrix s = kernels::matmul_a_bt_serial(big, b);
        const Matrix p = kernels::matmul_a_bt_omp(big, b);
        mismatches += report("matmul_a_bt",
                             time_ms([&] { kernels::matmul_a_bt_serial(big, b); }, reps),
                             time_ms([&] { kernels::matmul_a_bt_omp(big, b); }, reps), s == p);
    }
    {
        Matrix s = big, p = big;
        kernels::add_bias_rows_serial(s, bias);
        kernels::add_bias_rows_omp(p, bias);
        mismatches += report("add_bias_rows", time_ms(
                                                  [&] {
                                                      Matrix m = big;
                                                      kernels::add_bias_rows_serial(m, bias);
                                                  },
                                                  reps),
                             time_ms(
                                 [&] {
                                     Matrix m = big;
                                     kernels::add_bias_rows_omp(m, bias);
                                 },
                                 reps),
                             s == p);
    }
    {
        const std::vector<double> s = kernels::column_sums_serial(big);
        const std::vector<double> p = kernels::column_sums_omp(big);
        mismatches += report("column_sums",
                             time_ms([&] { kernels::column_sums_serial(big); }, reps),
                             time_ms([&] { kernels::column_sums_omp(big); }, reps), s == p);
    }
    {
        Matrix s = big, p = big;
        kernels::relu_inplace_serial(s);
        kernels::relu_inplace_omp(p);
        mismatches += report("relu", time_ms(
                                         [&] {
                                             Matrix m = big;
                                             kernels::relu_inplace_serial(m);
                                         },
                                         reps),
                             time_ms(
                                 [&] {
                                     Matrix m = big;
                                     kernels::relu_inplace_omp(m);
                                 },
                                 reps),
                             s == p);
    }
    {
        const Matrix pre = random_matrix(big.rows(), big.cols(), rng);
        Matrix gs = big, gp = big;
        kernels::relu_backward_inplace_serial(pre, gs);
        kernels::relu_backward_inplace_omp(pre, gp);
        mismatches += report("relu_backward",
                             time_ms(
                                 [&] {
                                     Matrix m = big;
                                     kernels::relu_backward_inplace_serial(pre, m);
                                 },
                                 reps),
                             time_ms(
                                 [&] {
                                     Matrix m = big;
                                     kernels::relu_backward_inplace_omp(pre, m);
                                 },
                                 reps),
                             gs == gp);
    }

    // End to end through the dispatching layer: one abstention-loss batch
    // gradient, serial vs parallel.
    {
        const Matrix logits = random_matrix(4096, 11, rng);
        std::vector<std::int32_t> labels(logits.rows());
        for (auto& y : labels) y = static_cast<std::int32_t>(rng.below(10));
        Matrix grad_s, grad_p;
        kernels::set_parallel(false);
        const double serial_ms =
            time_ms([&] { dac_batch_grad(logits, labels, 0.5, grad_s); }, reps);
        kernels::set_parallel(true);
        const double omp_ms = time_ms([&] { dac_batch_grad(logits, labels, 0.5, grad_p); }, reps);
        mismatches += report("dac_batch_grad", serial_ms, omp_ms, grad_s == grad_p);
    }

    if (mismatches != 0) std::printf("%d kernel(s) diverged\n", mismatches);
    return mismatches;
}
