#pragma once

namespace phantomqa {

// Row-major dense matrix products. These are the only routines the op layer
// delegates; everything around them (layouts, padding, backward passes) is
// local code. Instantiated for float and double in gemm.cpp.

// c[m,n] = a[m,k] * b[k,n], or += when accumulate is set
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);

// c[m,n] = a[m,k] * b[n,k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);

// c[m,n] = a[k,m]^T * b[k,n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false);

}  // namespace phantomqa
