#include "polypgen/simd/kernels.hpp"

#include <cmath>
#include <cstring>

namespace polypgen::simd::detail {
namespace {

template <class T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(T) * m * n);
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = a[i * k + p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] = std::fma(aip, brow[j], crow[j]);
        }
    }
}

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void adam(T* param, const T* grad, T* m, T* v, std::size_t n, AdamCoeffs<T> c) {
    const T one_b1 = T(1) - c.beta1;
    const T one_b2 = T(1) - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const T g = grad[i];
        m[i] = c.beta1 * m[i] + one_b1 * g;
        v[i] = c.beta2 * v[i] + one_b2 * (g * g);
        param[i] -= c.lr * m[i] / (std::sqrt(v[i]) + c.eps);
    }
}

}  // namespace

template <class T>
KernelTable<T> scalar_table() {
    return {Isa::scalar, &gemm<T>, &dot<T>, &axpy<T>, &adam<T>};
}

template KernelTable<float> scalar_table<float>();
template KernelTable<double> scalar_table<double>();

}  // namespace polypgen::simd::detail
