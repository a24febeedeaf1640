#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "polypgen/nn/graph.hpp"
#include "polypgen/simd/kernels.hpp"

namespace polypgen::nn {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <class T>
class Adam {
public:
    Adam(std::size_t n_params, AdamConfig cfg) : cfg_(cfg), m_(n_params, T(0)), v_(n_params, T(0)) {}

    /// One update from the gradients currently held by `store`.
    void step(ParamStore<T>& store) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = std::sqrt(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
        simd::AdamCoeffs<T> c{static_cast<T>(cfg_.learning_rate * bc2 / bc1), static_cast<T>(cfg_.beta1),
                              static_cast<T>(cfg_.beta2), static_cast<T>(cfg_.epsilon * bc2)};
        auto values = store.values();
        auto grads = store.grads();
        simd::kernels<T>().adam(values.data(), grads.data(), m_.data(), v_.data(), values.size(), c);
    }

    std::int64_t steps() const noexcept { return t_; }

private:
    AdamConfig cfg_;
    std::vector<T> m_;
    std::vector<T> v_;
    std::int64_t t_ = 0;
};

}  // namespace polypgen::nn
