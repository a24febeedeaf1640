// Compiled with -mavx2 -mfma; only reached through the dispatch table after a
// CPU feature check.
#include "polypgen/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace polypgen::simd::detail {
namespace {

template <class T>
struct Vec;

template <>
struct Vec<float> {
    using reg = __m256;
    static constexpr std::size_t width = 8;
    static reg load(const float* p) { return _mm256_loadu_ps(p); }
    static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
    static reg set1(float x) { return _mm256_set1_ps(x); }
    static reg zero() { return _mm256_setzero_ps(); }
    static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
    static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
    static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
    static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
    static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
    static float hsum(reg v) {
        __m128 lo = _mm256_castps256_ps128(v);
        __m128 hi = _mm256_extractf128_ps(v, 1);
        lo = _mm_add_ps(lo, hi);
        __m128 sh = _mm_movehdup_ps(lo);
        __m128 sums = _mm_add_ps(lo, sh);
        sh = _mm_movehl_ps(sh, sums);
        sums = _mm_add_ss(sums, sh);
        return _mm_cvtss_f32(sums);
    }
};

template <>
struct Vec<double> {
    using reg = __m256d;
    static constexpr std::size_t width = 4;
    static reg load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
    static reg set1(double x) { return _mm256_set1_pd(x); }
    static reg zero() { return _mm256_setzero_pd(); }
    static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
    static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
    static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
    static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
    static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
    static double hsum(reg v) {
        __m128d lo = _mm256_castpd256_pd128(v);
        __m128d hi = _mm256_extractf128_pd(v, 1);
        lo = _mm_add_pd(lo, hi);
        __m128d sh = _mm_unpackhi_pd(lo, lo);
        return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
    }
};

// Rows [i0, i0+Rows) × one packed micro-panel of Nv·width columns. `bp` holds
// the panel as k consecutive groups of Nv·width values.
template <class T, std::size_t Rows, std::size_t Nv>
inline void gemm_tile(std::size_t n, std::size_t k, const T* a, const T* bp, T* c, std::size_t i0, std::size_t j0,
                      bool accumulate) {
    using V = Vec<T>;
    constexpr std::size_t span = Nv * V::width;
    typename V::reg acc[Rows][Nv];
    for (std::size_t r = 0; r < Rows; ++r)
        for (std::size_t v = 0; v < Nv; ++v)
            acc[r][v] = accumulate ? V::load(c + (i0 + r) * n + j0 + v * V::width) : V::zero();
    for (std::size_t p = 0; p < k; ++p) {
        typename V::reg bv[Nv];
        for (std::size_t v = 0; v < Nv; ++v) bv[v] = V::load(bp + p * span + v * V::width);
        for (std::size_t r = 0; r < Rows; ++r) {
            const auto av = V::set1(a[(i0 + r) * k + p]);
            for (std::size_t v = 0; v < Nv; ++v) acc[r][v] = V::fmadd(av, bv[v], acc[r][v]);
        }
    }
    for (std::size_t r = 0; r < Rows; ++r)
        for (std::size_t v = 0; v < Nv; ++v) V::store(c + (i0 + r) * n + j0 + v * V::width, acc[r][v]);
}

template <class T>
inline void gemm_rows(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* packed, std::size_t cols, T* c,
                      std::size_t j0, bool accumulate) {
    constexpr std::size_t micro = 2 * Vec<T>::width;
    std::size_t i = 0;
    for (; i + 6 <= m; i += 6)
        for (std::size_t mp = 0; mp < cols; mp += micro)
            gemm_tile<T, 6, 2>(n, k, a, packed + mp * k, c, i, j0 + mp, accumulate);
    for (; i + 4 <= m; i += 4)
        for (std::size_t mp = 0; mp < cols; mp += micro)
            gemm_tile<T, 4, 2>(n, k, a, packed + mp * k, c, i, j0 + mp, accumulate);
    for (; i + 2 <= m; i += 2)
        for (std::size_t mp = 0; mp < cols; mp += micro)
            gemm_tile<T, 2, 2>(n, k, a, packed + mp * k, c, i, j0 + mp, accumulate);
    for (; i < m; ++i)
        for (std::size_t mp = 0; mp < cols; mp += micro)
            gemm_tile<T, 1, 2>(n, k, a, packed + mp * k, c, i, j0 + mp, accumulate);
}

template <class T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
    constexpr std::size_t micro = 2 * Vec<T>::width;
    constexpr std::size_t panel = 32 * micro;
    thread_local std::vector<T> packed;
    const std::size_t full = n / micro * micro;
    for (std::size_t j0 = 0; j0 < full; j0 += panel) {
        const std::size_t cols = std::min(panel, full - j0);
        packed.resize(cols * k);
        for (std::size_t mp = 0; mp < cols; mp += micro) {
            T* dst = packed.data() + mp * k;
            for (std::size_t p = 0; p < k; ++p)
                std::memcpy(dst + p * micro, b + p * n + j0 + mp, micro * sizeof(T));
        }
        gemm_rows(m, n, k, a, packed.data(), cols, c, j0, accumulate);
    }
    // Tail columns go through one zero-padded micro panel and a scratch tile;
    // padding lanes never mix into the real ones.
    const std::size_t tail = n - full;
    if (tail == 0) return;
    thread_local std::vector<T> scratch;
    packed.assign(micro * k, T(0));
    for (std::size_t p = 0; p < k; ++p) std::memcpy(packed.data() + p * micro, b + p * n + full, tail * sizeof(T));
    scratch.assign(m * micro, T(0));
    if (accumulate)
        for (std::size_t i = 0; i < m; ++i) std::memcpy(scratch.data() + i * micro, c + i * n + full, tail * sizeof(T));
    gemm_rows(m, micro, k, a, packed.data(), micro, scratch.data(), 0, accumulate);
    for (std::size_t i = 0; i < m; ++i) std::memcpy(c + i * n + full, scratch.data() + i * micro, tail * sizeof(T));
}

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
    using V = Vec<T>;
    constexpr std::size_t w = V::width;
    auto a0 = V::zero(), a1 = V::zero(), a2 = V::zero(), a3 = V::zero();
    std::size_t i = 0;
    for (; i + 4 * w <= n; i += 4 * w) {
        a0 = V::fmadd(V::load(x + i), V::load(y + i), a0);
        a1 = V::fmadd(V::load(x + i + w), V::load(y + i + w), a1);
        a2 = V::fmadd(V::load(x + i + 2 * w), V::load(y + i + 2 * w), a2);
        a3 = V::fmadd(V::load(x + i + 3 * w), V::load(y + i + 3 * w), a3);
    }
    for (; i + w <= n; i += w) a0 = V::fmadd(V::load(x + i), V::load(y + i), a0);
    T acc = V::hsum(V::add(V::add(a0, a1), V::add(a2, a3)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    using V = Vec<T>;
    const auto av = V::set1(alpha);
    std::size_t i = 0;
    for (; i + V::width <= n; i += V::width) V::store(y + i, V::fmadd(av, V::load(x + i), V::load(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void adam(T* param, const T* grad, T* m, T* v, std::size_t n, AdamCoeffs<T> c) {
    using V = Vec<T>;
    const auto b1 = V::set1(c.beta1), b2 = V::set1(c.beta2);
    const auto ob1 = V::set1(T(1) - c.beta1), ob2 = V::set1(T(1) - c.beta2);
    const auto lr = V::set1(c.lr), eps = V::set1(c.eps);
    std::size_t i = 0;
    for (; i + V::width <= n; i += V::width) {
        const auto g = V::load(grad + i);
        const auto mi = V::add(V::mul(b1, V::load(m + i)), V::mul(ob1, g));
        const auto vi = V::add(V::mul(b2, V::load(v + i)), V::mul(ob2, V::mul(g, g)));
        V::store(m + i, mi);
        V::store(v + i, vi);
        const auto step = V::div(V::mul(lr, mi), V::add(V::sqrt(vi), eps));
        V::store(param + i, V::sub(V::load(param + i), step));
    }
    const T one_b1 = T(1) - c.beta1;
    const T one_b2 = T(1) - c.beta2;
    for (; i < n; ++i) {
        const T g = grad[i];
        m[i] = c.beta1 * m[i] + one_b1 * g;
        v[i] = c.beta2 * v[i] + one_b2 * (g * g);
        param[i] -= c.lr * m[i] / (std::sqrt(v[i]) + c.eps);
    }
}

}  // namespace

template <class T>
KernelTable<T> avx2_table() {
    return {Isa::avx2, &gemm<T>, &dot<T>, &axpy<T>, &adam<T>};
}

template KernelTable<float> avx2_table<float>();
template KernelTable<double> avx2_table<double>();

}  // namespace polypgen::simd::detail
