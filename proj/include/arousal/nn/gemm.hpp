#pragma once

#include <Eigen/Core>

namespace arousal::nn {

// C = alpha * op(A) * op(B) + beta * C, all row-major. op(A) is M x K,
// op(B) is K x N.
template <class S>
void gemm(bool trans_a, bool trans_b, std::ptrdiff_t m, std::ptrdiff_t n, std::ptrdiff_t k, S alpha,
          const S* a, const S* b, S beta, S* c) {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  Eigen::Map<Mat> cm(c, m, n);
  if (beta == S{0})
    cm.setZero();
  else if (beta != S{1})
    cm *= beta;
  if (m == 0 || n == 0 || k == 0) return;
  if (!trans_a && !trans_b)
    cm.noalias() += alpha * (CMap(a, m, k) * CMap(b, k, n));
  else if (!trans_a && trans_b)
    cm.noalias() += alpha * (CMap(a, m, k) * CMap(b, n, k).transpose());
  else if (trans_a && !trans_b)
    cm.noalias() += alpha * (CMap(a, k, m).transpose() * CMap(b, k, n));
  else
    cm.noalias() += alpha * (CMap(a, k, m).transpose() * CMap(b, n, k).transpose());
}

}  // namespace arousal::nn
