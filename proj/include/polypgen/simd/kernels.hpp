#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by the network and optimizer code. Each kernel
// has a portable scalar reference and an AVX2+FMA variant; the variant is
// chosen once at runtime from CPU features and can be overridden with the
// POLYPGEN_ISA environment variable ("scalar" or "avx2").
//
// gemm accumulates every output element over k in ascending order with a fused
// multiply-add, in every variant, so scalar and vector results are bit-identical
// and a column's result does not depend on where it falls inside a tile.

namespace polypgen::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);

template <class T>
struct AdamCoeffs {
    T lr;           // already bias-corrected step size
    T beta1;
    T beta2;
    T eps;          // already bias-corrected epsilon
};

template <class T>
struct KernelTable {
    Isa isa;
    // C[m×n] = (accumulate ? C : 0) + A[m×k] · B[k×n], all row-major and dense.
    void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);
    T (*dot)(const T* x, const T* y, std::size_t n);
    // y += alpha * x
    void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
    void (*adam)(T* param, const T* grad, T* m, T* v, std::size_t n, AdamCoeffs<T> c);
};

template <class T>
const KernelTable<T>& kernels_for(Isa isa);

Isa active_isa();
/// Overrides the process-wide selection; throws if the ISA is unsupported here.
void set_active_isa(Isa isa);

template <class T>
const KernelTable<T>& kernels() {
    return kernels_for<T>(active_isa());
}

namespace detail {
template <class T>
KernelTable<T> scalar_table();
template <class T>
KernelTable<T> avx2_table();
}  // namespace detail

}  // namespace polypgen::simd
