#include "phantomqa/gemm.hpp"

#include <Eigen/Core>

namespace phantomqa {

namespace {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  ConstMatMap<T> ma(a, m, k);
  ConstMatMap<T> mb(b, k, n);
  MatMap<T> mc(c, m, n);
  if (accumulate) {
    mc.noalias() += ma * mb;
  } else {
    mc.noalias() = ma * mb;
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  ConstMatMap<T> ma(a, m, k);
  ConstMatMap<T> mb(b, n, k);
  MatMap<T> mc(c, m, n);
  if (accumulate) {
    mc.noalias() += ma * mb.transpose();
  } else {
    mc.noalias() = ma * mb.transpose();
  }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
  ConstMatMap<T> ma(a, k, m);
  ConstMatMap<T> mb(b, k, n);
  MatMap<T> mc(c, m, n);
  if (accumulate) {
    mc.noalias() += ma.transpose() * mb;
  } else {
    mc.noalias() = ma.transpose() * mb;
  }
}

template void gemm_nn<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_nt<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_tn<float>(const float*, const float*, float*, int, int, int, bool);
template void gemm_nn<double>(const double*, const double*, double*, int, int, int, bool);
template void gemm_nt<double>(const double*, const double*, double*, int, int, int, bool);
template void gemm_tn<double>(const double*, const double*, double*, int, int, int, bool);

}  // namespace phantomqa
