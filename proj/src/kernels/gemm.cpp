#include <Eigen/Core>

#include "gatector/kernels/kernels.hpp"

namespace gatector::kernels {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

template <typename Lhs, typename Rhs>
void assign(Map& c, const Lhs& lhs, const Rhs& rhs, float alpha, float beta) {
  if (beta == 0.0f) {
    c.noalias() = alpha * (lhs * rhs);
  } else {
    if (beta != 1.0f) c *= beta;
    c.noalias() += alpha * (lhs * rhs);
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, const float* b, float beta,
          float* c) {
  if (m == 0 || n == 0) return;
  Map cm(c, m, n);
  if (k == 0) {
    if (beta == 0.0f) cm.setZero(); else cm *= beta;
    return;
  }
  ConstMap am(a, trans_a ? k : m, trans_a ? m : k);
  ConstMap bm(b, trans_b ? n : k, trans_b ? k : n);
  if (!trans_a && !trans_b) assign(cm, am, bm, alpha, beta);
  else if (trans_a && !trans_b) assign(cm, am.transpose(), bm, alpha, beta);
  else if (!trans_a && trans_b) assign(cm, am, bm.transpose(), alpha, beta);
  else assign(cm, am.transpose(), bm.transpose(), alpha, beta);
}

}  // namespace gatector::kernels
