#include "duality/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#ifdef DUALITY_HAVE_OPENMP
#include <omp.h>
#endif

namespace duality::kernels {

namespace {
Backend g_backend =
#ifdef DUALITY_HAVE_OPENMP
    Backend::openmp;
#else
    Backend::serial;
#endif
}  // namespace

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

bool openmp_available() {
#ifdef DUALITY_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef DUALITY_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef DUALITY_HAVE_OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// The matmul bodies keep the innermost loop over contiguous output columns
// with a scalar broadcast from A, which vectorizes without any reassociation
// of the k-reduction. The k-order per output element is identical in both
// backends, hence bit-identical results.

namespace serial {

void matmul_nn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* Ci = C + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(Ci, 0, sizeof(double) * n);
    const double* Ai = A + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double a = Ai[p];
      if (a == 0.0) continue;
      const double* Bp = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) Ci[j] += a * Bp[j];
    }
  }
}

namespace detail {

// Scratch for transposed weight views. The k-reduction of a row-major dot
// product does not vectorize without reassociation; transposing once and
// accumulating with a contiguous inner loop keeps the per-element summation
// order identical while letting the j loop vectorize.
inline double* transpose_scratch(std::size_t need) {
  thread_local std::vector<double> buf;
  if (buf.size() < need) buf.resize(need);
  return buf.data();
}

inline const double* transpose_to_scratch(const double* B, int rows,
                                          int cols) {
  double* T = transpose_scratch(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      T[static_cast<std::size_t>(c) * rows + r] =
          B[static_cast<std::size_t>(r) * cols + c];
  return T;
}

inline const double* transpose_masked_to_scratch(const double* B,
                                                 const double* M, int rows,
                                                 int cols) {
  double* T = transpose_scratch(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      T[static_cast<std::size_t>(c) * rows + r] =
          B[static_cast<std::size_t>(r) * cols + c] *
          M[static_cast<std::size_t>(r) * cols + c];
  return T;
}

inline void nn_rows(const double* A, const double* B, double* C, int i0,
                    int i1, int k, int n, bool accumulate) {
  for (int i = i0; i < i1; ++i) {
    double* Ci = C + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(Ci, 0, sizeof(double) * n);
    const double* Ai = A + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double a = Ai[p];
      if (a == 0.0) continue;
      const double* Bp = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) Ci[j] += a * Bp[j];
    }
  }
}

}  // namespace detail

void matmul_nt(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  const double* BT = detail::transpose_to_scratch(B, n, k);  // now [k x n]
  detail::nn_rows(A, BT, C, 0, m, k, n, accumulate);
}

void matmul_tn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  // A is [k x m], B is [k x n], C is [m x n].
  for (int i = 0; i < m; ++i) {
    double* Ci = C + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(Ci, 0, sizeof(double) * n);
    for (int p = 0; p < k; ++p) {
      const double a = A[static_cast<std::size_t>(p) * m + i];
      if (a == 0.0) continue;
      const double* Bp = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) Ci[j] += a * Bp[j];
    }
  }
}

void matmul_nt_masked(const double* A, const double* B, const double* M,
                      double* C, int m, int k, int n, bool accumulate) {
  const double* BT = detail::transpose_masked_to_scratch(B, M, n, k);
  detail::nn_rows(A, BT, C, 0, m, k, n, accumulate);
}

void vsigmoid(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void vtanh(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

namespace detail {
inline void softmax_row(const double* x, double* y, int cols, bool log_form) {
  double mx = x[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (int j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  if (log_form) {
    const double lse = mx + std::log(sum);
    for (int j = 0; j < cols; ++j) y[j] = x[j] - lse;
  } else {
    const double inv = 1.0 / sum;
    for (int j = 0; j < cols; ++j) y[j] *= inv;
  }
}
}  // namespace detail

void softmax_rows(const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    detail::softmax_row(x + static_cast<std::size_t>(r) * cols,
                        y + static_cast<std::size_t>(r) * cols, cols, false);
}

void log_softmax_rows(const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    detail::softmax_row(x + static_cast<std::size_t>(r) * cols,
                        y + static_cast<std::size_t>(r) * cols, cols, true);
}

void add_bias_rows(double* y, const double* bias, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* yr = y + static_cast<std::size_t>(r) * cols;
    for (int j = 0; j < cols; ++j) yr[j] += bias[j];
  }
}

void colsum(const double* X, double* out, int rows, int cols,
            bool accumulate) {
  if (!accumulate) std::memset(out, 0, sizeof(double) * cols);
  for (int r = 0; r < rows; ++r) {
    const double* Xr = X + static_cast<std::size_t>(r) * cols;
    for (int j = 0; j < cols; ++j) out[j] += Xr[j];
  }
}

void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace serial

namespace par {

#ifdef DUALITY_HAVE_OPENMP

void matmul_nn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* Ci = C + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(Ci, 0, sizeof(double) * n);
    const double* Ai = A + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double a = Ai[p];
      if (a == 0.0) continue;
      const double* Bp = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) Ci[j] += a * Bp[j];
    }
  }
}

void matmul_nt(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  const double* BT = serial::detail::transpose_to_scratch(B, n, k);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    serial::detail::nn_rows(A, BT, C, i, i + 1, k, n, accumulate);
}

void matmul_tn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* Ci = C + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(Ci, 0, sizeof(double) * n);
    for (int p = 0; p < k; ++p) {
      const double a = A[static_cast<std::size_t>(p) * m + i];
      if (a == 0.0) continue;
      const double* Bp = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) Ci[j] += a * Bp[j];
    }
  }
}

void matmul_nt_masked(const double* A, const double* B, const double* M,
                      double* C, int m, int k, int n, bool accumulate) {
  const double* BT = serial::detail::transpose_masked_to_scratch(B, M, n, k);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    serial::detail::nn_rows(A, BT, C, i, i + 1, k, n, accumulate);
}

void vsigmoid(const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void vtanh(const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    y[i] = std::tanh(x[i]);
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    serial::detail::softmax_row(x + static_cast<std::size_t>(r) * cols,
                                y + static_cast<std::size_t>(r) * cols, cols,
                                false);
}

void log_softmax_rows(const double* x, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    serial::detail::softmax_row(x + static_cast<std::size_t>(r) * cols,
                                y + static_cast<std::size_t>(r) * cols, cols,
                                true);
}

void add_bias_rows(double* y, const double* bias, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    double* yr = y + static_cast<std::size_t>(r) * cols;
    for (int j = 0; j < cols; ++j) yr[j] += bias[j];
  }
}

void colsum(const double* X, double* out, int rows, int cols,
            bool accumulate) {
  // Per-column ownership keeps the row order of each partial sum fixed.
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (int r = 0; r < rows; ++r)
      acc += X[static_cast<std::size_t>(r) * cols + j];
    out[j] = accumulate ? out[j] + acc : acc;
  }
}

void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

#else  // no OpenMP: the parallel namespace falls through to the reference.

void matmul_nn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  serial::matmul_nn(A, B, C, m, k, n, accumulate);
}
void matmul_nt(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  serial::matmul_nt(A, B, C, m, k, n, accumulate);
}
void matmul_tn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  serial::matmul_tn(A, B, C, m, k, n, accumulate);
}
void matmul_nt_masked(const double* A, const double* B, const double* M,
                      double* C, int m, int k, int n, bool accumulate) {
  serial::matmul_nt_masked(A, B, M, C, m, k, n, accumulate);
}
void vsigmoid(const double* x, double* y, std::size_t n) {
  serial::vsigmoid(x, y, n);
}
void vtanh(const double* x, double* y, std::size_t n) {
  serial::vtanh(x, y, n);
}
void softmax_rows(const double* x, double* y, int rows, int cols) {
  serial::softmax_rows(x, y, rows, cols);
}
void log_softmax_rows(const double* x, double* y, int rows, int cols) {
  serial::log_softmax_rows(x, y, rows, cols);
}
void add_bias_rows(double* y, const double* bias, int rows, int cols) {
  serial::add_bias_rows(y, bias, rows, cols);
}
void colsum(const double* X, double* out, int rows, int cols,
            bool accumulate) {
  serial::colsum(X, out, rows, cols, accumulate);
}
void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2) {
  serial::adam_step(w, g, m, v, n, lr, beta1, beta2, eps, bias1, bias2);
}

#endif

}  // namespace par

#define DUALITY_DISPATCH(fn, ...)            \
  do {                                       \
    if (g_backend == Backend::openmp)        \
      par::fn(__VA_ARGS__);                  \
    else                                     \
      serial::fn(__VA_ARGS__);               \
  } while (0)

void matmul_nn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  DUALITY_DISPATCH(matmul_nn, A, B, C, m, k, n, accumulate);
}
void matmul_nt(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  DUALITY_DISPATCH(matmul_nt, A, B, C, m, k, n, accumulate);
}
void matmul_tn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate) {
  DUALITY_DISPATCH(matmul_tn, A, B, C, m, k, n, accumulate);
}
void matmul_nt_masked(const double* A, const double* B, const double* M,
                      double* C, int m, int k, int n, bool accumulate) {
  DUALITY_DISPATCH(matmul_nt_masked, A, B, M, C, m, k, n, accumulate);
}
void vsigmoid(const double* x, double* y, std::size_t n) {
  DUALITY_DISPATCH(vsigmoid, x, y, n);
}
void vtanh(const double* x, double* y, std::size_t n) {
  DUALITY_DISPATCH(vtanh, x, y, n);
}
void softmax_rows(const double* x, double* y, int rows, int cols) {
  DUALITY_DISPATCH(softmax_rows, x, y, rows, cols);
}
void log_softmax_rows(const double* x, double* y, int rows, int cols) {
  DUALITY_DISPATCH(log_softmax_rows, x, y, rows, cols);
}
void add_bias_rows(double* y, const double* bias, int rows, int cols) {
  DUALITY_DISPATCH(add_bias_rows, y, bias, rows, cols);
}
void colsum(const double* X, double* out, int rows, int cols,
            bool accumulate) {
  DUALITY_DISPATCH(colsum, X, out, rows, cols, accumulate);
}
void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2) {
  DUALITY_DISPATCH(adam_step, w, g, m, v, n, lr, beta1, beta2, eps, bias1,
                   bias2);
}

#undef DUALITY_DISPATCH

}  // namespace duality::kernels
