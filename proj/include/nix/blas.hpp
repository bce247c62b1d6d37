#pragma once

#include <cblas.h>

#include "nix/common.hpp"

namespace nix {

/// C = alpha * op(A) * op(B) + beta * C, row-major.
/// m x k times k x n -> m x n (dimensions after transposition).
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha,
                 const real* a, int lda, const real* b, int ldb, real beta,
                 real* c, int ldc) {
    const CBLAS_TRANSPOSE ta = trans_a ? CblasTrans : CblasNoTrans;
    const CBLAS_TRANSPOSE tb = trans_b ? CblasTrans : CblasNoTrans;
    if constexpr (sizeof(real) == sizeof(double)) {
        cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha,
                    reinterpret_cast<const double*>(a), lda,
                    reinterpret_cast<const double*>(b), ldb, beta,
                    reinterpret_cast<double*>(c), ldc);
    } else {
        cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, static_cast<float>(alpha),
                    reinterpret_cast<const float*>(a), lda,
                    reinterpret_cast<const float*>(b), ldb,
                    static_cast<float>(beta), reinterpret_cast<float*>(c), ldc);
    }
}

}  // namespace nix
