#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "polypgen/nn/adam.hpp"
#include "polypgen/nn/blocks.hpp"

using namespace polypgen;
using G = nn::Graph<double>;

namespace {

using Build = std::function<G::Var(G&, G::Var)>;

double weighted_output(nn::ParamStore<double>& ps, const nn::Tensor<double>& x, const Build& build,
                       const std::vector<double>& w) {
    G g(ps, false);
    const auto out = build(g, g.input(x));
    const auto& v = g.value(out).data;
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * v[i];
    return s;
}

// Central differences on every parameter and every input element.
void grad_check(nn::ParamStore<double>& ps, nn::Tensor<double> x, const Build& build, double tol = 1e-6) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& p : ps.values()) p = u(rng);

    G g(ps);
    const auto in = g.input(x);
    const auto out = build(g, in);
    std::vector<double> w(g.value(out).data.size());
    for (auto& v : w) v = u(rng);
    ps.zero_grad();
    g.backward(out, w);
    const std::vector<double> dparams(ps.grads().begin(), ps.grads().end());
    const std::vector<double> dx(g.grad(in).begin(), g.grad(in).end());
    REQUIRE(dx.size() == x.data.size());

    const double h = 1e-6;
    const auto rel = [](double a, double n) { return std::abs(a - n) / std::max(1.0, std::abs(n)); };
    auto values = ps.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + h;
        const double up = weighted_output(ps, x, build, w);
        values[i] = keep - h;
        const double down = weighted_output(ps, x, build, w);
        values[i] = keep;
        INFO("param " << i);
        CHECK(rel(dparams[i], (up - down) / (2 * h)) < tol);
    }
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double keep = x.data[i];
        x.data[i] = keep + h;
        const double up = weighted_output(ps, x, build, w);
        x.data[i] = keep - h;
        const double down = weighted_output(ps, x, build, w);
        x.data[i] = keep;
        INFO("input " << i);
        CHECK(rel(dx[i], (up - down) / (2 * h)) < tol);
    }
}

nn::Tensor<double> random_tensor(nn::Shape s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    nn::Tensor<double> t(s);
    for (auto& v : t.data) v = u(rng);
    return t;
}

}  // namespace

TEST_CASE("conv2d gradients, including stride and dilation") {
    for (auto [k, stride, dil] : {std::tuple{3, 1, 1}, std::tuple{3, 2, 1}, std::tuple{3, 1, 2}, std::tuple{1, 1, 1}}) {
        nn::ParamStore<double> ps;
        const auto conv = nn::make_conv(ps, 2, 3, k, stride, dil);
        INFO("k=" << k << " stride=" << stride << " dilation=" << dil);
        grad_check(ps, random_tensor({2, 2, 6, 6}, 1), [&](G& g, G::Var x) { return g.conv2d(x, conv); });
    }
}

TEST_CASE("linear, group norm and activations") {
    nn::ParamStore<double> ps;
    const auto lin = nn::make_linear(ps, 4, 3);
    grad_check(ps, random_tensor({4, 3, 1, 1}, 2), [&](G& g, G::Var x) { return g.linear(x, lin); });

    nn::ParamStore<double> ps2;
    const auto gn = nn::make_group_norm(ps2, 4);
    grad_check(ps2, random_tensor({4, 2, 3, 3}, 3), [&](G& g, G::Var x) { return g.group_norm(x, gn); });

    nn::ParamStore<double> ps3;
    grad_check(ps3, random_tensor({2, 2, 3, 3}, 4), [](G& g, G::Var x) { return g.sigmoid(g.silu(x)); });
}

TEST_CASE("structural ops: add, broadcast, concat, resampling") {
    nn::ParamStore<double> ps;
    grad_check(ps, random_tensor({2, 2, 4, 4}, 5), [](G& g, G::Var x) {
        const auto up = g.upsample2(g.avg_pool2(x));
        const auto cat = g.concat(x, up);
        nn::Tensor<double> v({4, 2, 1, 1}, 0.5);
        return g.add_broadcast(g.add(cat, cat), g.input(v));
    });
}

TEST_CASE("residual block with embedding") {
    nn::ParamStore<double> ps;
    const auto block = nn::ResBlock::make(ps, 2, 4, 3);
    const auto emb = random_tensor({3, 2, 1, 1}, 6);
    grad_check(ps, random_tensor({2, 2, 4, 4}, 7), [&](G& g, G::Var x) { return block.forward(g, x, g.input(emb)); },
               1e-5);
}

TEST_CASE("parameter initialisation is seeded") {
    nn::ParamStore<float> a, b;
    nn::make_conv(a, 3, 4);
    nn::make_conv(b, 3, 4);
    a.initialize(9);
    b.initialize(9);
    CHECK(std::vector<float>(a.values().begin(), a.values().end()) ==
          std::vector<float>(b.values().begin(), b.values().end()));
    b.initialize(10);
    CHECK(std::vector<float>(a.values().begin(), a.values().end()) !=
          std::vector<float>(b.values().begin(), b.values().end()));
}

TEST_CASE("adam moves a quadratic toward its minimum") {
    nn::ParamStore<double> ps;
    ps.add(3, {nn::InitKind::ones, 0.0});
    ps.initialize(0);
    nn::Adam<double> opt(ps.size(), {0.1, 0.9, 0.999, 1e-8});
    for (int i = 0; i < 200; ++i) {
        for (std::size_t j = 0; j < 3; ++j) ps.grads()[j] = 2.0 * (ps.values()[j] - static_cast<double>(j));
        opt.step(ps);
    }
    for (std::size_t j = 0; j < 3; ++j) CHECK(ps.values()[j] == doctest::Approx(static_cast<double>(j)).epsilon(0.05));
    CHECK(opt.steps() == 200);
}

TEST_CASE("backward needs a recording graph") {
    nn::ParamStore<double> ps;
    G g(ps, false);
    const auto x = g.input(nn::Tensor<double>({1, 1, 2, 2}, 1.0));
    const std::vector<double> d(4, 1.0);
    CHECK_THROWS_AS(g.backward(x, d), Error);
}
