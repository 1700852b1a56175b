#pragma once

#include <cstddef>

// Dense numeric kernels behind the autodiff ops. Every kernel exists twice:
// a plain serial reference under kernels::serial and an OpenMP version under
// kernels::par. The public entry points dispatch on the active backend.
//
// Parallel loops are always over output rows (or output elements), and each
// output element is produced by one fixed-order serial reduction, so the two
// backends produce bit-identical results for any thread count. Tests assert
// exact equality; tools/bench-kernels compares throughput.

namespace duality::kernels {

enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);
bool openmp_available();
int max_threads();
void set_threads(int n);

namespace serial {

// C[m x n] = A[m x k] * B[k x n]; accumulate adds into C instead.
void matmul_nn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate);
// C[m x n] = A[m x k] * B[n x k]^T
void matmul_nt(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate);
// C[m x n] = A[k x m]^T * B[k x n]
void matmul_tn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate);
// C[m x n] = A[m x k] * (B .* M)[n x k]^T, mask applied to B entries.
void matmul_nt_masked(const double* A, const double* B, const double* M,
                      double* C, int m, int k, int n, bool accumulate);
void vsigmoid(const double* x, double* y, std::size_t n);
void vtanh(const double* x, double* y, std::size_t n);
void softmax_rows(const double* x, double* y, int rows, int cols);
void log_softmax_rows(const double* x, double* y, int rows, int cols);
// y[r] += bias broadcast over rows.
void add_bias_rows(double* y, const double* bias, int rows, int cols);
// out[j] (+)= sum over rows of X[:, j]
void colsum(const double* X, double* out, int rows, int cols, bool accumulate);
void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double bias1, double bias2);

}  // namespace serial

namespace par {

void matmul_nn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate);
void matmul_nt(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate);
void matmul_tn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate);
void matmul_nt_masked(const double* A, const double* B, const double* M,
                      double* C, int m, int k, int n, bool accumulate);
void vsigmoid(const double* x, double* y, std::size_t n);
void vtanh(const double* x, double* y, std::size_t n);
void softmax_rows(const double* x, double* y, int rows, int cols);
void log_softmax_rows(const double* x, double* y, int rows, int cols);
void add_bias_rows(double* y, const double* bias, int rows, int cols);
void colsum(const double* X, double* out, int rows, int cols, bool accumulate);
void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps,
               double bias1, double bias2);

}  // namespace par

void matmul_nn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate = false);
void matmul_nt(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate = false);
void matmul_tn(const double* A, const double* B, double* C, int m, int k,
               int n, bool accumulate = false);
void matmul_nt_masked(const double* A, const double* B, const double* M,
                      double* C, int m, int k, int n, bool accumulate = false);
void vsigmoid(const double* x, double* y, std::size_t n);
void vtanh(const double* x, double* y, std::size_t n);
void softmax_rows(const double* x, double* y, int rows, int cols);
void log_softmax_rows(const double* x, double* y, int rows, int cols);
void add_bias_rows(double* y, const double* bias, int rows, int cols);
void colsum(const double* X, double* out, int rows, int cols,
            bool accumulate = false);
void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bias1,
               double bias2);

}  // namespace duality::kernels
