#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "polypgen/denoiser/denoiser.hpp"
#include "polypgen/simd/kernels.hpp"

using namespace polypgen;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(u(rng));
    return v;
}

// Plain triple loop with the documented accumulation order.
template <class T>
void gemm_oracle(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool acc) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            T s = acc ? c[i * n + j] : T(0);
            for (std::size_t p = 0; p < k; ++p) s = std::fma(a[i * k + p], b[p * n + j], s);
            c[i * n + j] = s;
        }
}

template <class T>
void check_gemm_shapes() {
    std::mt19937_64 rng(17);
    const auto& scalar = simd::kernels_for<T>(simd::Isa::scalar);
    const bool have_avx2 = simd::isa_supported(simd::Isa::avx2);
    const std::size_t ms[] = {1, 2, 3, 5, 6, 8, 11, 13};
    const std::size_t ns[] = {1, 7, 8, 15, 16, 17, 33, 64, 517, 1030};
    const std::size_t ks[] = {1, 3, 27, 72};
    for (auto m : ms)
        for (auto n : ns)
            for (auto k : ks)
                for (bool acc : {false, true}) {
                    const auto a = random_vec<T>(m * k, rng);
                    const auto b = random_vec<T>(k * n, rng);
                    const auto c0 = random_vec<T>(m * n, rng);
                    auto expect = c0;
                    gemm_oracle(m, n, k, a.data(), b.data(), expect.data(), acc);
                    auto got = c0;
                    scalar.gemm(m, n, k, a.data(), b.data(), got.data(), acc);
                    CHECK(got == expect);
                    if (have_avx2) {
                        auto vec = c0;
                        simd::kernels_for<T>(simd::Isa::avx2).gemm(m, n, k, a.data(), b.data(), vec.data(), acc);
                        INFO("m=" << m << " n=" << n << " k=" << k << " acc=" << acc);
                        CHECK(vec == expect);
                    }
                }
}

}  // namespace

TEST_CASE("gemm variants are bit-identical to the ordered-fma oracle") {
    check_gemm_shapes<float>();
    check_gemm_shapes<double>();
}

TEST_CASE("gemm column results do not depend on the batch width") {
    if (!simd::isa_supported(simd::Isa::avx2)) return;
    std::mt19937_64 rng(3);
    const std::size_t m = 7, k = 19, n = 300;
    const auto a = random_vec<float>(m * k, rng);
    const auto b = random_vec<float>(k * n, rng);
    std::vector<float> full(m * n);
    simd::kernels_for<float>(simd::Isa::avx2).gemm(m, n, k, a.data(), b.data(), full.data(), false);
    // Column 45 alone, as a 1-column problem.
    std::vector<float> col(k), one(m);
    for (std::size_t p = 0; p < k; ++p) col[p] = b[p * n + 45];
    simd::kernels_for<float>(simd::Isa::avx2).gemm(m, 1, k, a.data(), col.data(), one.data(), false);
    for (std::size_t i = 0; i < m; ++i) CHECK(one[i] == full[i * n + 45]);
}

TEST_CASE("dot, axpy and adam variants agree within rounding") {
    if (!simd::isa_supported(simd::Isa::avx2)) return;
    std::mt19937_64 rng(5);
    const auto& s = simd::kernels_for<float>(simd::Isa::scalar);
    const auto& v = simd::kernels_for<float>(simd::Isa::avx2);
    for (std::size_t n : {1u, 7u, 8u, 31u, 32u, 33u, 1000u}) {
        const auto x = random_vec<float>(n, rng);
        const auto y = random_vec<float>(n, rng);
        double ref = 0.0;
        for (std::size_t i = 0; i < n; ++i) ref += static_cast<double>(x[i]) * y[i];
        CHECK(std::abs(s.dot(x.data(), y.data(), n) - ref) <= 1e-5 * (1.0 + n));
        CHECK(std::abs(v.dot(x.data(), y.data(), n) - ref) <= 1e-5 * (1.0 + n));

        auto ys = y, yv = y;
        s.axpy(0.37f, x.data(), ys.data(), n);
        v.axpy(0.37f, x.data(), yv.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ys[i] - yv[i]) <= 1e-6f);

        auto ps = x, pv = x;
        const auto g = random_vec<float>(n, rng);
        std::vector<float> ms(n, 0.1f), vs(n, 0.2f), mv = ms, vv = vs;
        const simd::AdamCoeffs<float> c{1e-3f, 0.9f, 0.999f, 1e-8f};
        s.adam(ps.data(), g.data(), ms.data(), vs.data(), n, c);
        v.adam(pv.data(), g.data(), mv.data(), vv.data(), n, c);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(ps[i] - pv[i]) <= 1e-6f);
            CHECK(std::abs(ms[i] - mv[i]) <= 1e-6f);
            CHECK(std::abs(vs[i] - vv[i]) <= 1e-6f);
        }
    }
}

TEST_CASE("denoiser forward pass matches across ISAs") {
    if (!simd::isa_supported(simd::Isa::avx2)) return;
    denoiser::DenoiserArch arch;
    arch.base_channels = 8;
    const auto model = denoiser::init_denoiser(arch, 11);
    std::mt19937_64 rng(1);
    std::vector<ImageTensor> xs{testutil::random_image(1, 16, 16, rng), testutil::random_image(1, 16, 16, rng)};
    const auto prev = simd::active_isa();
    simd::set_active_isa(simd::Isa::scalar);
    const auto a = model.predict(xs, 37, {});
    simd::set_active_isa(simd::Isa::avx2);
    const auto b = model.predict(xs, 37, {});
    simd::set_active_isa(prev);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) CHECK(std::abs(a[i].data[j] - b[i].data[j]) <= 1e-5);
}

TEST_CASE("isa names and overrides") {
    CHECK(simd::isa_name(simd::Isa::scalar) == "scalar");
    CHECK(simd::isa_supported(simd::Isa::scalar));
    const auto prev = simd::active_isa();
    simd::set_active_isa(simd::Isa::scalar);
    CHECK(simd::active_isa() == simd::Isa::scalar);
    simd::set_active_isa(prev);
}
