#pragma once

#include <optional>

#include "polypgen/nn/graph.hpp"

namespace polypgen::nn {

/// conv → GN → SiLU (+ projected embedding) → conv → GN → SiLU, plus a
/// residual path (1×1 conv when the channel count changes).
struct ResBlock {
    Conv2d conv1;
    GroupNorm norm1;
    Conv2d conv2;
    GroupNorm norm2;
    std::optional<Conv2d> skip;
    std::optional<Linear> embed;

    template <class T>
    static ResBlock make(ParamStore<T>& store, int cin, int cout, int embed_dim = 0, int dilation = 1) {
        ResBlock b;
        b.conv1 = make_conv(store, cin, cout, 3, 1, dilation);
        b.norm1 = make_group_norm(store, cout);
        if (embed_dim > 0) b.embed = make_linear(store, embed_dim, cout);
        b.conv2 = make_conv(store, cout, cout, 3, 1, dilation);
        b.norm2 = make_group_norm(store, cout);
        if (cin != cout) b.skip = make_conv(store, cin, cout, 1);
        return b;
    }

    /// `embed_act` is the already-activated embedding [embed_dim, n, 1, 1], or -1.
    template <class T>
    typename Graph<T>::Var forward(Graph<T>& g, typename Graph<T>::Var x, typename Graph<T>::Var embed_act = -1) const {
        auto h = g.silu(g.group_norm(g.conv2d(x, conv1), norm1));
        if (embed && embed_act >= 0) h = g.add_broadcast(h, g.linear(embed_act, *embed));
        h = g.silu(g.group_norm(g.conv2d(h, conv2), norm2));
        const auto residual = skip ? g.conv2d(x, *skip) : x;
        return g.add(h, residual);
    }
};

/// Stride-2 3×3 convolution halving the spatial size.
template <class T>
Conv2d make_down(ParamStore<T>& store, int cin, int cout) {
    return make_conv(store, cin, cout, 3, 2);
}

}  // namespace polypgen::nn
