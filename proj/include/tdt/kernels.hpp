#pragma once

#include <cstdint>

namespace tdt::kernels {

// Dense f64 matrix kernels behind every forward/backward pass.
//
// Each kernel comes in a serial reference version and an OpenMP version.
// Both compute every output element as a single dot product with the same
// ascending inner-loop order; the OpenMP versions only distribute the row
// loop across threads. The two paths therefore produce bit-identical
// results for any thread count, which the tests assert and which keeps
// training runs reproducible regardless of parallelism.
//
// Layouts are row-major. The _nt/_tn variants are the products needed by
// the backward pass (grad @ B^T and A^T @ grad) without materializing
// transposes.

// c[m x n] = a[m x k] * b[k x n]
void matmul_serial(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n);
void matmul_omp(const double* a, const double* b, double* c,
                int64_t m, int64_t k, int64_t n);

// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt_serial(const double* a, const double* b, double* c,
                      int64_t m, int64_t k, int64_t n);
void matmul_nt_omp(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n);

// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn_serial(const double* a, const double* b, double* c,
                      int64_t m, int64_t k, int64_t n);
void matmul_tn_omp(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n);

// Dispatching fronts used by the autodiff ops: run the OpenMP version when
// the product is large enough to amortize the fork, otherwise serial.
// The cutoff is a fixed constant, so dispatch itself is deterministic.
void matmul(const double* a, const double* b, double* c,
            int64_t m, int64_t k, int64_t n);
void matmul_nt(const double* a, const double* b, double* c,
               int64_t m, int64_t k, int64_t n);
void matmul_tn(const double* a, const double* b, double* c,
               int64_t m, int64_t k, int64_t n);

// Forced execution mode, for tests and the benchmark.
enum class ExecMode { automatic, serial, parallel };
void set_exec_mode(ExecMode mode);
ExecMode exec_mode();

// flop count at/above which the dispatcher goes parallel (2*m*k*n >= cutoff)
inline constexpr int64_t kParallelFlopCutoff = 1 << 16;

}  // namespace tdt::kernels
