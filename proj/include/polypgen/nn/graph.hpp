#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "polypgen/error.hpp"

// Minimal define-by-run reverse-mode differentiation for small convolutional
// networks. Activations use a channel-major layout [c][n][h][w] so a batched
// convolution is a single im2col + GEMM. Parameters live in one flat vector
// owned by ParamStore; ops read them by offset and accumulate gradients in
// place.
namespace polypgen::nn {

struct Shape {
    int c = 0;
    int n = 0;
    int h = 1;
    int w = 1;

    std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(c) * n * plane(); }
    friend bool operator==(const Shape&, const Shape&) = default;
};

template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.size(), fill) {}

    T* channel(int c, int n) { return data.data() + (static_cast<std::size_t>(c) * shape.n + n) * shape.plane(); }
    const T* channel(int c, int n) const {
        return data.data() + (static_cast<std::size_t>(c) * shape.n + n) * shape.plane();
    }
};

struct ParamRef {
    std::size_t offset = 0;
    std::size_t size = 0;
};

enum class InitKind { zeros, ones, uniform };

struct InitSpec {
    InitKind kind = InitKind::zeros;
    double bound = 0.0;
};

template <class T>
class ParamStore {
public:
    ParamRef add(std::size_t count, InitSpec init) {
        ParamRef ref{values_.size(), count};
        values_.resize(values_.size() + count, T(0));
        grads_.resize(values_.size(), T(0));
        inits_.push_back({ref, init});
        return ref;
    }

    /// Draws every parameter from its initializer in registration order.
    void initialize(std::uint64_t seed);

    std::size_t size() const noexcept { return values_.size(); }
    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }
    std::span<T> grads() noexcept { return grads_; }
    std::span<const T> grads() const noexcept { return grads_; }

    T* value(ParamRef r) noexcept { return values_.data() + r.offset; }
    const T* value(ParamRef r) const noexcept { return values_.data() + r.offset; }
    T* grad(ParamRef r) noexcept { return grads_.data() + r.offset; }

    void zero_grad() { std::fill(grads_.begin(), grads_.end(), T(0)); }

    template <class U>
    void assign(std::span<const U> v) {
        require(v.size() == values_.size(), ErrorCode::CorruptCheckpoint, "parameter count mismatch");
        for (std::size_t i = 0; i < v.size(); ++i) values_[i] = static_cast<T>(v[i]);
    }

private:
    struct Registered {
        ParamRef ref;
        InitSpec init;
    };
    std::vector<T> values_;
    std::vector<T> grads_;
    std::vector<Registered> inits_;
};

struct Conv2d {
    int cin = 0;
    int cout = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 1;
    int dilation = 1;
    ParamRef weight;  // [cout][cin][k][k]
    ParamRef bias;    // [cout]
};

struct Linear {
    int in = 0;
    int out = 0;
    ParamRef weight;  // [out][in]
    ParamRef bias;
};

struct GroupNorm {
    int channels = 0;
    int groups = 1;
    double eps = 1e-5;
    ParamRef gamma;
    ParamRef beta;
};

/// Same-padding convolution; PyTorch-style U(±1/√fan_in) initializers.
template <class T>
Conv2d make_conv(ParamStore<T>& store, int cin, int cout, int kernel = 3, int stride = 1, int dilation = 1);
template <class T>
Linear make_linear(ParamStore<T>& store, int in, int out);
/// Group count is gcd(channels, 8).
template <class T>
GroupNorm make_group_norm(ParamStore<T>& store, int channels);

template <class T>
class Graph {
public:
    using Var = int;

    /// With record=false no backward closures or im2col buffers are kept.
    explicit Graph(ParamStore<T>& params, bool record = true) : params_(params), record_(record) {}
    /// Inference-only graph over read-only parameters.
    explicit Graph(const ParamStore<T>& params) : params_(const_cast<ParamStore<T>&>(params)), record_(false) {}

    Var input(Tensor<T> t);
    const Tensor<T>& value(Var v) const { return nodes_[static_cast<std::size_t>(v)].value; }
    Tensor<T>& mutable_value(Var v) { return nodes_[static_cast<std::size_t>(v)].value; }
    const Shape& shape(Var v) const { return value(v).shape; }
    std::span<const T> grad(Var v) const { return nodes_[static_cast<std::size_t>(v)].grad; }

    /// Seeds d(loss)/d(out) and runs the tape in reverse; parameter gradients
    /// accumulate into the ParamStore.
    void backward(Var out, std::span<const T> dout);

    Var conv2d(Var x, const Conv2d& conv);
    Var linear(Var x, const Linear& lin);
    Var group_norm(Var x, const GroupNorm& gn);
    Var silu(Var x);
    Var sigmoid(Var x);
    Var add(Var a, Var b);
    /// x [c,n,h,w] + v [c,n,1,1] broadcast over the plane.
    Var add_broadcast(Var x, Var v);
    Var concat(std::span<const Var> parts);
    Var concat(Var a, Var b) {
        const Var parts[2] = {a, b};
        return concat(parts);
    }
    Var upsample2(Var x);
    Var avg_pool2(Var x);

private:
    struct Node {
        Tensor<T> value;
        std::vector<T> grad;
    };

    Var push(Tensor<T> t);
    std::vector<T>& grad_buffer(Var v);

    ParamStore<T>& params_;
    bool record_;
    std::vector<Node> nodes_;
    std::vector<std::function<void()>> tape_;
};

/// Converts per-sample [c][h][w] blocks into the channel-major batch layout and back.
template <class T>
Tensor<T> pack_batch(std::span<const std::vector<double>> items, int c, int h, int w);
template <class T>
std::vector<double> unpack_item(const Tensor<T>& t, int n);

}  // namespace polypgen::nn
