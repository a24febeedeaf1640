#include "polypgen/metrics/similarity.hpp"

namespace polypgen::metrics {

double sim(const BinaryMask& r, const BinaryMask& g) {
    require(r.same_shape(g), ErrorCode::ShapeMismatch, "sim needs masks of equal size");
    require(r.size() > 0, ErrorCode::ShapeMismatch, "sim of empty grids");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < r.size(); ++i) agree += (r.data[i] != 0) == (g.data[i] != 0);
    return static_cast<double>(agree) / static_cast<double>(r.size());
}

ClosestMatch closest_real(const BinaryMask& g, std::span<const BinaryMask> reals) {
    if (reals.empty()) throw Error(ErrorCode::EmptySet, "closest_real needs at least one real mask");
    ClosestMatch best{0, sim(reals[0], g)};
    for (std::size_t i = 1; i < reals.size(); ++i) {
        const double s = sim(reals[i], g);
        if (s > best.sim) best = {i, s};
    }
    return best;
}

double SIM(std::span<const BinaryMask> reals, std::span<const BinaryMask> generated) {
    if (reals.empty() || generated.empty()) throw Error(ErrorCode::EmptySet, "SIM needs non-empty real and generated sets");
    double total = 0.0;
    for (const auto& g : generated) total += closest_real(g, reals).sim;
    return 100.0 * total / static_cast<double>(generated.size());
}

}  // namespace polypgen::metrics
