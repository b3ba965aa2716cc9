#include "tsb/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tsb::kernels {

namespace {

Backend initial_backend() {
#ifdef _OPENMP
    // with fewer than four threads the fork overhead eats the gain
    return omp_get_max_threads() >= 4 ? Backend::Parallel : Backend::Serial;
#else
    return Backend::Serial;
#endif
}

std::atomic<Backend> g_backend{initial_backend()};

// Work thresholds below which the parallel path stays on one thread.
// Purely a scheduling decision; results are identical either way. Forking a
// team costs a few microseconds, so only clearly larger work goes wide.
constexpr std::int64_t kMatmulCutoff = 192 * 1024;
constexpr std::int64_t kElementwiseCutoff = 64 * 1024;
constexpr std::int64_t kRowCutoff = 64;

}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

namespace detail {

// One output row of C = op(A)*op(B). Accumulation over p runs ascending for
// every element, which pins the floating-point order for both backends.
inline void matmul_row(const double* a, const double* b, double* c,
                       std::int64_t i, std::int64_t m, std::int64_t k, std::int64_t n,
                       bool trans_a, bool trans_b, bool accumulate) {
    double* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    for (std::int64_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        if (!trans_b) {
            const double* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        } else {
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
        }
    }
}

inline void softmax_row(const double* x, double* y, std::int64_t cols) {
    const double* xr = x;
    double mx = xr[0];
    for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
        y[j] = std::exp(xr[j] - mx);
        sum += y[j];
    }
    const double inv = 1.0 / sum;
    for (std::int64_t j = 0; j < cols; ++j) y[j] *= inv;
}

inline void softmax_row_backward(const double* y, const double* dy, double* dx,
                                 std::int64_t cols) {
    double dot = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
    for (std::int64_t j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
}

inline void layer_norm_row(const double* x, const double* gamma, const double* beta,
                           double eps, double* y, double* xhat, double* inv_std,
                           std::int64_t cols) {
    double mean = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) mean += x[j];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
        const double d = x[j] - mean;
        var += d * d;
    }
    var /= static_cast<double>(cols);
    const double istd = 1.0 / std::sqrt(var + eps);
    *inv_std = istd;
    for (std::int64_t j = 0; j < cols; ++j) {
        const double xh = (x[j] - mean) * istd;
        xhat[j] = xh;
        y[j] = gamma[j] * xh + beta[j];
    }
}

inline void layer_norm_row_backward_dx(const double* dy, const double* gamma,
                                       const double* xhat, double inv_std,
                                       double* dx, std::int64_t cols) {
    // dx = inv_std * (dyh - mean(dyh) - xhat * mean(dyh*xhat)), dyh = dy*gamma
    double mean_dyh = 0.0, mean_dyh_xhat = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
        const double dyh = dy[j] * gamma[j];
        mean_dyh += dyh;
        mean_dyh_xhat += dyh * xhat[j];
    }
    mean_dyh /= static_cast<double>(cols);
    mean_dyh_xhat /= static_cast<double>(cols);
    for (std::int64_t j = 0; j < cols; ++j) {
        const double dyh = dy[j] * gamma[j];
        dx[j] += inv_std * (dyh - mean_dyh - xhat[j] * mean_dyh_xhat);
    }
}

}  // namespace detail

// ---------------------------------------------------------------- serial

namespace serial {

void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n,
            bool trans_a, bool trans_b, bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i)
        detail::matmul_row(a, b, c, i, m, k, n, trans_a, trans_b, accumulate);
}

void add(const double* a, const double* b, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy(double alpha, const double* x, double* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sigmoid(const double* x, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void tanh(const double* x, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

void softmax_rows(const double* x, double* y, std::int64_t rows, std::int64_t cols) {
    for (std::int64_t r = 0; r < rows; ++r)
        detail::softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_rows_backward(const double* y, const double* dy, double* dx,
                           std::int64_t rows, std::int64_t cols) {
    for (std::int64_t r = 0; r < rows; ++r)
        detail::softmax_row_backward(y + r * cols, dy + r * cols, dx + r * cols, cols);
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* xhat, double* inv_std,
                     std::int64_t rows, std::int64_t cols) {
    for (std::int64_t r = 0; r < rows; ++r)
        detail::layer_norm_row(x + r * cols, gamma, beta, eps, y + r * cols,
                               xhat + r * cols, inv_std + r, cols);
}

void layer_norm_rows_backward(const double* dy, const double* gamma,
                              const double* xhat, const double* inv_std,
                              double* dx, double* dgamma, double* dbeta,
                              std::int64_t rows, std::int64_t cols) {
    for (std::int64_t r = 0; r < rows; ++r)
        detail::layer_norm_row_backward_dx(dy + r * cols, gamma, xhat + r * cols,
                                           inv_std[r], dx + r * cols, cols);
    // dgamma/dbeta reduce over rows; row-ascending order, kept serial in both
    // backends so the accumulation order never depends on the thread count.
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* dyr = dy + r * cols;
        const double* xhr = xhat + r * cols;
        for (std::int64_t j = 0; j < cols; ++j) {
            dgamma[j] += dyr[j] * xhr[j];
            dbeta[j] += dyr[j];
        }
    }
}

}  // namespace serial

// -------------------------------------------------------------- parallel

namespace parallel {

// Below the cutoffs the serial reference runs directly; entering the OpenMP
// runtime costs microseconds per region, which dominates small operations.

void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n,
            bool trans_a, bool trans_b, bool accumulate) {
    if (m < 2 || m * k * n <= kMatmulCutoff) {
        serial::matmul(a, b, c, m, k, n, trans_a, trans_b, accumulate);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < m; ++i)
        detail::matmul_row(a, b, c, i, m, k, n, trans_a, trans_b, accumulate);
}

void add(const double* a, const double* b, double* out, std::int64_t n) {
    if (n <= kElementwiseCutoff) {
        serial::add(a, b, out, n);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::int64_t n) {
    if (n <= kElementwiseCutoff) {
        serial::sub(a, b, out, n);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::int64_t n) {
    if (n <= kElementwiseCutoff) {
        serial::mul(a, b, out, n);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::int64_t n) {
    if (n <= kElementwiseCutoff) {
        serial::scale(a, s, out, n);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy(double alpha, const double* x, double* y, std::int64_t n) {
    if (n <= kElementwiseCutoff) {
        serial::axpy(alpha, x, y, n);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sigmoid(const double* x, double* out, std::int64_t n) {
    if (n <= kElementwiseCutoff / 4) {
        serial::sigmoid(x, out, n);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void tanh(const double* x, double* out, std::int64_t n) {
    if (n <= kElementwiseCutoff / 4) {
        serial::tanh(x, out, n);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

void softmax_rows(const double* x, double* y, std::int64_t rows, std::int64_t cols) {
    if (rows <= kRowCutoff) {
        serial::softmax_rows(x, y, rows, cols);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t r = 0; r < rows; ++r)
        detail::softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_rows_backward(const double* y, const double* dy, double* dx,
                           std::int64_t rows, std::int64_t cols) {
    if (rows <= kRowCutoff) {
        serial::softmax_rows_backward(y, dy, dx, rows, cols);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t r = 0; r < rows; ++r)
        detail::softmax_row_backward(y + r * cols, dy + r * cols, dx + r * cols, cols);
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* xhat, double* inv_std,
                     std::int64_t rows, std::int64_t cols) {
    if (rows <= kRowCutoff) {
        serial::layer_norm_rows(x, gamma, beta, eps, y, xhat, inv_std, rows, cols);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t r = 0; r < rows; ++r)
        detail::layer_norm_row(x + r * cols, gamma, beta, eps, y + r * cols,
                               xhat + r * cols, inv_std + r, cols);
}

void layer_norm_rows_backward(const double* dy, const double* gamma,
                              const double* xhat, const double* inv_std,
                              double* dx, double* dgamma, double* dbeta,
                              std::int64_t rows, std::int64_t cols) {
    if (rows <= kRowCutoff) {
        serial::layer_norm_rows_backward(dy, gamma, xhat, inv_std, dx, dgamma, dbeta,
                                         rows, cols);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t r = 0; r < rows; ++r)
        detail::layer_norm_row_backward_dx(dy + r * cols, gamma, xhat + r * cols,
                                           inv_std[r], dx + r * cols, cols);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* dyr = dy + r * cols;
        const double* xhr = xhat + r * cols;
        for (std::int64_t j = 0; j < cols; ++j) {
            dgamma[j] += dyr[j] * xhr[j];
            dbeta[j] += dyr[j];
        }
    }
}

}  // namespace parallel

// ------------------------------------------------------------- dispatch

#define TSB_DISPATCH(fn, ...)                          \
    do {                                               \
        if (backend() == Backend::Parallel)            \
            parallel::fn(__VA_ARGS__);                 \
        else                                           \
            serial::fn(__VA_ARGS__);                   \
    } while (0)

void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n,
            bool trans_a, bool trans_b, bool accumulate) {
    TSB_DISPATCH(matmul, a, b, c, m, k, n, trans_a, trans_b, accumulate);
}

void add(const double* a, const double* b, double* out, std::int64_t n) {
    TSB_DISPATCH(add, a, b, out, n);
}

void sub(const double* a, const double* b, double* out, std::int64_t n) {
    TSB_DISPATCH(sub, a, b, out, n);
}

void mul(const double* a, const double* b, double* out, std::int64_t n) {
    TSB_DISPATCH(mul, a, b, out, n);
}

void scale(const double* a, double s, double* out, std::int64_t n) {
    TSB_DISPATCH(scale, a, s, out, n);
}

void axpy(double alpha, const double* x, double* y, std::int64_t n) {
    TSB_DISPATCH(axpy, alpha, x, y, n);
}

void sigmoid(const double* x, double* out, std::int64_t n) {
    TSB_DISPATCH(sigmoid, x, out, n);
}

void tanh(const double* x, double* out, std::int64_t n) {
    TSB_DISPATCH(tanh, x, out, n);
}

void softmax_rows(const double* x, double* y, std::int64_t rows, std::int64_t cols) {
    TSB_DISPATCH(softmax_rows, x, y, rows, cols);
}

void softmax_rows_backward(const double* y, const double* dy, double* dx,
                           std::int64_t rows, std::int64_t cols) {
    TSB_DISPATCH(softmax_rows_backward, y, dy, dx, rows, cols);
}

void layer_norm_rows(const double* x, const double* gamma, const double* beta,
                     double eps, double* y, double* xhat, double* inv_std,
                     std::int64_t rows, std::int64_t cols) {
    TSB_DISPATCH(layer_norm_rows, x, gamma, beta, eps, y, xhat, inv_std, rows, cols);
}

void layer_norm_rows_backward(const double* dy, const double* gamma,
                              const double* xhat, const double* inv_std,
                              double* dx, double* dgamma, double* dbeta,
                              std::int64_t rows, std::int64_t cols) {
    TSB_DISPATCH(layer_norm_rows_backward, dy, gamma, xhat, inv_std, dx, dgamma,
                 dbeta, rows, cols);
}

#undef TSB_DISPATCH

}  // namespace tsb::kernels
