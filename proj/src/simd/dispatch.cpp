#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "polypgen/simd/kernels.hpp"

namespace polypgen::simd {
namespace {

Isa detect() {
    if (const char* env = std::getenv("POLYPGEN_ISA")) {
        const std::string want(env);
        if (want == "scalar") return Isa::scalar;
        if (want == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
    }
    return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& selected() {
    static std::atomic<Isa> isa{detect()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
    if (!isa_supported(isa)) throw std::invalid_argument("ISA not supported on this CPU: " + std::string(isa_name(isa)));
    selected().store(isa, std::memory_order_relaxed);
}

template <class T>
const KernelTable<T>& kernels_for(Isa isa) {
    static const KernelTable<T> scalar = detail::scalar_table<T>();
#if defined(__x86_64__) || defined(__i386__)
    static const KernelTable<T> avx2 = detail::avx2_table<T>();
    if (isa == Isa::avx2) return avx2;
#endif
    return scalar;
}

template const KernelTable<float>& kernels_for<float>(Isa);
template const KernelTable<double>& kernels_for<double>(Isa);

}  // namespace polypgen::simd
