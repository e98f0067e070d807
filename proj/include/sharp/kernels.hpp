#pragma once

#include <cstddef>

// Inner loops for the dense parts of the engine. The pragmas let the
// vectorizer reassociate the marked reductions without global -ffast-math,
// keeping results deterministic per build.

namespace sharp::kernels {

inline float dot(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(float alpha, const float* x, float* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// y[r] += sum_c A[r*n + c] * x[c], A row-major [m x n].
inline void matvec_acc(const float* A, const float* x, float* y, std::size_t m, std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) y[r] += dot(A + r * n, x, n);
}

}  // namespace sharp::kernels
