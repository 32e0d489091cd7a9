#include "tdt/kernels.hpp"

namespace tdt::kernels {

namespace {
ExecMode g_mode = ExecMode::automatic;

inline double dot_stride(const double* x, int64_t sx, const double* y, int64_t sy, int64_t k) {
  double acc = 0.0;
  for (int64_t i = 0; i < k; ++i) acc += x[i * sx] * y[i * sy];
  return acc;
}
}  // namespace

void set_exec_mode(ExecMode mode) { g_mode = mode; }
ExecMode exec_mode() { return g_mode; }

void matmul_serial(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_stride(a + i * k, 1, b + j, n, k);
    }
  }
}

void matmul_omp(const double* a, const double* b, double* c,
                int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_stride(a + i * k, 1, b + j, n, k);
    }
  }
}

void matmul_nt_serial(const double* a, const double* b, double* c,
                      int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_stride(a + i * k, 1, b + j * k, 1, k);
    }
  }
}

void matmul_nt_omp(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_stride(a + i * k, 1, b + j * k, 1, k);
    }
  }
}

void matmul_tn_serial(const double* a, const double* b, double* c,
                      int64_t m, int64_t k, int64_t n) {
  // a is [k x m]: column i of a is the strided vector a[i], a[i+m], ...
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_stride(a + i, m, b + j, n, k);
    }
  }
}

void matmul_tn_omp(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_stride(a + i, m, b + j, n, k);
    }
  }
}

namespace {
inline bool go_parallel(int64_t m, int64_t k, int64_t n) {
  switch (g_mode) {
    case ExecMode::serial: return false;
    case ExecMode::parallel: return true;
    case ExecMode::automatic: break;
  }
  return 2 * m * k * n >= kParallelFlopCutoff;
}
}  // namespace

void matmul(const double* a, const double* b, double* c,
            int64_t m, int64_t k, int64_t n) {
  if (go_parallel(m, k, n)) {
    matmul_omp(a, b, c, m, k, n);
  } else {
    matmul_serial(a, b, c, m, k, n);
  }
}

void matmul_nt(const double* a, const double* b, double* c,
               int64_t m, int64_t k, int64_t n) {
  if (go_parallel(m, k, n)) {
    matmul_nt_omp(a, b, c, m, k, n);
  } else {
    matmul_nt_serial(a, b, c, m, k, n);
  }
}

void matmul_tn(const double* a, const double* b, double* c,
               int64_t m, int64_t k, int64_t n) {
  if (go_parallel(m, k, n)) {
    matmul_tn_omp(a, b, c, m, k, n);
  } else {
    matmul_tn_serial(a, b, c, m, k, n);
  }
}

}  // namespace tdt::kernels
