#pragma once

#include "yolospp/tensor.hpp"

namespace yolospp::detail {

/// Row-major C = alpha * op(A) * op(B) + beta * C, with op(A) M x K and op(B) K x N.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, Real alpha, const Real* a, int lda,
          const Real* b, int ldb, Real beta, Real* c, int ldc);

}  // namespace yolospp::detail
