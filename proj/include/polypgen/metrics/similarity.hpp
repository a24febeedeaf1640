#pragma once

#include <cstddef>
#include <span>

#include "polypgen/tensor.hpp"

namespace polypgen::metrics {

/// Fraction of pixels on which two equally sized masks agree.
double sim(const BinaryMask& r, const BinaryMask& g);

struct ClosestMatch {
    std::size_t index = 0;  // into the real set; lowest index wins ties
    double sim = 0.0;
};

ClosestMatch closest_real(const BinaryMask& g, std::span<const BinaryMask> reals);

/// 100 · mean over generated masks of their best sim against the real set.
double SIM(std::span<const BinaryMask> reals, std::span<const BinaryMask> generated);

}  // namespace polypgen::metrics
