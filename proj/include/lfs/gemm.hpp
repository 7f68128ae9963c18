#pragma once

#include <cstdint>

namespace lfs::numgrad {

// Row-major f64 GEMM kernels. Loop orders keep the inner loop contiguous and
// unroll by four so the compiler emits FMA-friendly vector code.

// C[m x n] (+)= A[m x k] * B[k x n]; saxpy form, 4 B-rows per pass
inline void gemm_nn(const double* A, const double* B, double* C, int m, int k, int n, bool accumulate = false) {
    for (int i = 0; i < m; ++i) {
        double* c = C + static_cast<int64_t>(i) * n;
        if (!accumulate)
            for (int j = 0; j < n; ++j) c[j] = 0.0;
        const double* a = A + static_cast<int64_t>(i) * k;
        int p = 0;
        for (; p + 4 <= k; p += 4) {
            const double a0 = a[p], a1 = a[p + 1], a2 = a[p + 2], a3 = a[p + 3];
            const double* b0 = B + static_cast<int64_t>(p) * n;
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            for (int j = 0; j < n; ++j) c[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; p < k; ++p) {
            const double av = a[p];
            const double* b = B + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m x n] (+)= A^T * B with A [k x m]; k-outer saxpy, 4 A-rows per pass
inline void gemm_tn(const double* A, const double* B, double* C, int m, int k, int n, bool accumulate = false) {
    if (!accumulate)
        for (int64_t i = 0; i < static_cast<int64_t>(m) * n; ++i) C[i] = 0.0;
    for (int p = 0; p < k; ++p) {
        const double* a = A + static_cast<int64_t>(p) * m;
        const double* b = B + static_cast<int64_t>(p) * n;
        int i = 0;
        for (; i + 4 <= m; i += 4) {
            const double a0 = a[i], a1 = a[i + 1], a2 = a[i + 2], a3 = a[i + 3];
            double* c0 = C + static_cast<int64_t>(i) * n;
            double* c1 = c0 + n;
            double* c2 = c1 + n;
            double* c3 = c2 + n;
            for (int j = 0; j < n; ++j) {
                const double bv = b[j];
                c0[j] += a0 * bv;
                c1[j] += a1 * bv;
                c2[j] += a2 * bv;
                c3[j] += a3 * bv;
            }
        }
        for (; i < m; ++i) {
            const double av = a[i];
            double* c = C + static_cast<int64_t>(i) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m x n] (+)= A * B^T with B [n x k]; 4 dot products share one A row
inline void gemm_nt(const double* A, const double* B, double* C, int m, int k, int n, bool accumulate = false) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<int64_t>(i) * k;
        double* c = C + static_cast<int64_t>(i) * n;
        int j = 0;
        for (; j + 4 <= n; j += 4) {
            const double* b0 = B + static_cast<int64_t>(j) * k;
            const double* b1 = b0 + k;
            const double* b2 = b1 + k;
            const double* b3 = b2 + k;
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            for (int p = 0; p < k; ++p) {
                const double av = a[p];
                s0 += av * b0[p];
                s1 += av * b1[p];
                s2 += av * b2[p];
                s3 += av * b3[p];
            }
            if (accumulate) {
                c[j] += s0;
                c[j + 1] += s1;
                c[j + 2] += s2;
                c[j + 3] += s3;
            } else {
                c[j] = s0;
                c[j + 1] = s1;
                c[j + 2] = s2;
                c[j + 3] = s3;
            }
        }
        for (; j < n; ++j) {
            const double* b = B + static_cast<int64_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a[p] * b[p];
            if (accumulate)
                c[j] += s;
            else
                c[j] = s;
        }
    }
}

}  // namespace lfs::numgrad
