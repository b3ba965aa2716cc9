#pragma once

#include <cstdint>

namespace tsb::kernels {

// Two implementations of every dense kernel: a serial reference and an
// OpenMP-parallel one. Each output element is produced by exactly one
// thread with the same per-element arithmetic order as the serial path,
// so both backends agree bitwise for any thread count. The serial path
// stays as the reference for tests and the benchmark.
enum class Backend { Serial, Parallel };

Backend backend();
void set_backend(Backend b);
void set_threads(int n);  // caps the OpenMP team; no-op without OpenMP
int max_threads();
bool openmp_enabled();

// C[m x n] = op(A)[m x k] * op(B)[k x n], row-major storage.
// trans_a: A is stored k x m and read transposed (same for trans_b, n x k).
// accumulate: C += instead of C =.
void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n,
            bool trans_a = false, bool trans_b = false, bool accumulate = false);

void add(const double* a, const double* b, double* out, std::int64_t n);
void sub(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);
void scale(const double* a, double s, double* out, std::int64_t n);
void axpy(double alpha, const double* x, double* y, std::int64_t n);  // y += alpha*x
void sigmoid(const double* x, double* out, std::int64_t n);
void tanh(const double* x, double* out, std::int64_t n);

// Row-wise softmax with max subtraction. Throws nothing; callers check inputs.
void softmax_rows(const double* x, double* y, std::int64_t rows, std::int64_t cols);
// dx from output y and upstream dy (accumulating).
void softmax_rows_backward(const double* y, const double* dy, double* dx,
                           std::int64_t rows, std::int64_t cols);

// Normalizes each row to mean 0 / variance 1, then applies gamma/beta.
// xhat (rows x cols) and inv_std (rows) are saved for the backward pass.
void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* xhat, double* inv_std,
                     std::int64_t rows, std::int64_t cols);
// Accumulates dx, dgamma, dbeta.
void layer_norm_rows_backward(const double* dy, const double* gamma,
                              const double* xhat, const double* inv_std,
                              double* dx, double* dgamma, double* dbeta,
                              std::int64_t rows, std::int64_t cols);

namespace serial {
void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n,
            bool trans_a, bool trans_b, bool accumulate);
void add(const double* a, const double* b, double* out, std::int64_t n);
void sub(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);
void scale(const double* a, double s, double* out, std::int64_t n);
void axpy(double alpha, const double* x, double* y, std::int64_t n);
void sigmoid(const double* x, double* out, std::int64_t n);
void tanh(const double* x, double* out, std::int64_t n);
void softmax_rows(const double* x, double* y, std::int64_t rows, std::int64_t cols);
void softmax_rows_backward(const double* y, const double* dy, double* dx,
                           std::int64_t rows, std::int64_t cols);
void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* xhat, double* inv_std,
                     std::int64_t rows, std::int64_t cols);
void layer_norm_rows_backward(const double* dy, const double* gamma,
                              const double* xhat, const double* inv_std,
                              double* dx, double* dgamma, double* dbeta,
                              std::int64_t rows, std::int64_t cols);
}  // namespace serial

namespace parallel {
void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n,
            bool trans_a, bool trans_b, bool accumulate);
void add(const double* a, const double* b, double* out, std::int64_t n);
void sub(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);
void scale(const double* a, double s, double* out, std::int64_t n);
void axpy(double alpha, const double* x, double* y, std::int64_t n);
void sigmoid(const double* x, double* out, std::int64_t n);
void tanh(const double* x, double* out, std::int64_t n);
void softmax_rows(const double* x, double* y, std::int64_t rows, std::int64_t cols);
void softmax_rows_backward(const double* y, const double* dy, double* dx,
                           std::int64_t rows, std::int64_t cols);
void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* xhat, double* inv_std,
                     std::int64_t rows, std::int64_t cols);
void layer_norm_rows_backward(const double* dy, const double* gamma,
                              const double* xhat, const double* inv_std,
                              double* dx, double* dgamma, double* dbeta,
                              std::int64_t rows, std::int64_t cols);
}  // namespace parallel

}  // namespace tsb::kernels
