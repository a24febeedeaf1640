#include "polypgen/nn/graph.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "polypgen/simd/kernels.hpp"

namespace polypgen::nn {

template <class T>
void ParamStore<T>::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto& reg : inits_) {
        T* dst = values_.data() + reg.ref.offset;
        switch (reg.init.kind) {
            case InitKind::zeros: std::fill(dst, dst + reg.ref.size, T(0)); break;
            case InitKind::ones: std::fill(dst, dst + reg.ref.size, T(1)); break;
            case InitKind::uniform: {
                std::uniform_real_distribution<double> dist(-reg.init.bound, reg.init.bound);
                for (std::size_t i = 0; i < reg.ref.size; ++i) dst[i] = static_cast<T>(dist(rng));
                break;
            }
        }
    }
    zero_grad();
}

template <class T>
Conv2d make_conv(ParamStore<T>& store, int cin, int cout, int kernel, int stride, int dilation) {
    require(cin > 0 && cout > 0 && kernel > 0 && stride > 0 && dilation > 0, ErrorCode::InvalidArch,
            "invalid convolution geometry");
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin) * kernel * kernel);
    Conv2d c;
    c.cin = cin;
    c.cout = cout;
    c.kernel = kernel;
    c.stride = stride;
    c.dilation = dilation;
    c.pad = dilation * (kernel - 1) / 2;
    c.weight = store.add(static_cast<std::size_t>(cout) * cin * kernel * kernel, {InitKind::uniform, bound});
    c.bias = store.add(static_cast<std::size_t>(cout), {InitKind::uniform, bound});
    return c;
}

template <class T>
Linear make_linear(ParamStore<T>& store, int in, int out) {
    require(in > 0 && out > 0, ErrorCode::InvalidArch, "invalid linear geometry");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = store.add(static_cast<std::size_t>(out) * in, {InitKind::uniform, bound});
    l.bias = store.add(static_cast<std::size_t>(out), {InitKind::uniform, bound});
    return l;
}

template <class T>
GroupNorm make_group_norm(ParamStore<T>& store, int channels) {
    require(channels > 0, ErrorCode::InvalidArch, "group norm needs channels");
    GroupNorm g;
    g.channels = channels;
    g.groups = std::gcd(channels, 8);
    g.gamma = store.add(static_cast<std::size_t>(channels), {InitKind::ones, 0.0});
    g.beta = store.add(static_cast<std::size_t>(channels), {InitKind::zeros, 0.0});
    return g;
}

namespace {

struct ConvGeom {
    int cin, h, w, n, k, stride, pad, dil, ho, wo;
    std::size_t cols() const { return static_cast<std::size_t>(n) * ho * wo; }
    std::size_t rows() const { return static_cast<std::size_t>(cin) * k * k; }
};

// Output columns ox with 0 <= ox*stride + off < w.
inline std::pair<int, int> valid_range(const ConvGeom& g, int off) {
    int lo = 0;
    while (lo < g.wo && lo * g.stride + off < 0) ++lo;
    int hi = g.wo;
    while (hi > lo && (hi - 1) * g.stride + off >= g.w) --hi;
    return {lo, hi};
}

template <class T>
void im2col(const ConvGeom& g, const T* x, T* col) {
    const std::size_t ncols = g.cols();
    const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
    for (int ci = 0; ci < g.cin; ++ci)
        for (int ky = 0; ky < g.k; ++ky)
            for (int kx = 0; kx < g.k; ++kx) {
                T* dst = col + ((static_cast<std::size_t>(ci) * g.k + ky) * g.k + kx) * ncols;
                for (int n = 0; n < g.n; ++n) {
                    const T* src = x + (static_cast<std::size_t>(ci) * g.n + n) * hw;
                    for (int oy = 0; oy < g.ho; ++oy) {
                        const int iy = oy * g.stride - g.pad + ky * g.dil;
                        T* row = dst + (static_cast<std::size_t>(n) * g.ho + oy) * g.wo;
                        if (iy < 0 || iy >= g.h) {
                            std::fill(row, row + g.wo, T(0));
                            continue;
                        }
                        const T* srow = src + static_cast<std::size_t>(iy) * g.w;
                        const int off = kx * g.dil - g.pad;
                        const auto [lo, hi] = valid_range(g, off);
                        std::fill(row, row + lo, T(0));
                        if (g.stride == 1) {
                            std::copy(srow + lo + off, srow + hi + off, row + lo);
                        } else {
                            for (int ox = lo; ox < hi; ++ox) row[ox] = srow[ox * g.stride + off];
                        }
                        std::fill(row + hi, row + g.wo, T(0));
                    }
                }
            }
}

template <class T>
void col2im(const ConvGeom& g, const T* col, T* dx) {
    const std::size_t ncols = g.cols();
    const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
    for (int ci = 0; ci < g.cin; ++ci)
        for (int ky = 0; ky < g.k; ++ky)
            for (int kx = 0; kx < g.k; ++kx) {
                const T* src = col + ((static_cast<std::size_t>(ci) * g.k + ky) * g.k + kx) * ncols;
                for (int n = 0; n < g.n; ++n) {
                    T* dst = dx + (static_cast<std::size_t>(ci) * g.n + n) * hw;
                    for (int oy = 0; oy < g.ho; ++oy) {
                        const int iy = oy * g.stride - g.pad + ky * g.dil;
                        if (iy < 0 || iy >= g.h) continue;
                        const T* row = src + (static_cast<std::size_t>(n) * g.ho + oy) * g.wo;
                        T* drow = dst + static_cast<std::size_t>(iy) * g.w;
                        const int off = kx * g.dil - g.pad;
                        const auto [lo, hi] = valid_range(g, off);
                        for (int ox = lo; ox < hi; ++ox) drow[ox * g.stride + off] += row[ox];
                    }
                }
            }
}

template <class T>
std::vector<T> transpose(const T* a, std::size_t rows, std::size_t cols) {
    std::vector<T> t(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = a[r * cols + c];
    return t;
}

template <class T>
T sigmoid_of(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <class T>
typename Graph<T>::Var Graph<T>::push(Tensor<T> t) {
    nodes_.push_back(Node{std::move(t), {}});
    return static_cast<Var>(nodes_.size() - 1);
}

template <class T>
std::vector<T>& Graph<T>::grad_buffer(Var v) {
    auto& node = nodes_[static_cast<std::size_t>(v)];
    if (node.grad.empty()) node.grad.assign(node.value.data.size(), T(0));
    return node.grad;
}

template <class T>
typename Graph<T>::Var Graph<T>::input(Tensor<T> t) {
    return push(std::move(t));
}

template <class T>
void Graph<T>::backward(Var out, std::span<const T> dout) {
    require(record_, ErrorCode::InvalidConfig, "backward on a graph built without recording");
    auto& g = grad_buffer(out);
    require(dout.size() == g.size(), ErrorCode::ShapeMismatch, "output gradient size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout[i];
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

template <class T>
typename Graph<T>::Var Graph<T>::conv2d(Var x, const Conv2d& conv) {
    const Shape in = shape(x);
    require(in.c == conv.cin, ErrorCode::ShapeMismatch, "conv2d input channels");
    ConvGeom g{in.c, in.h, in.w, in.n, conv.kernel, conv.stride, conv.pad, conv.dilation, 0, 0};
    g.ho = (in.h + 2 * g.pad - g.dil * (g.k - 1) - 1) / g.stride + 1;
    g.wo = (in.w + 2 * g.pad - g.dil * (g.k - 1) - 1) / g.stride + 1;
    require(g.ho > 0 && g.wo > 0, ErrorCode::ShapeMismatch, "conv2d output would be empty");
    const bool direct = g.k == 1 && g.stride == 1 && g.pad == 0;

    const auto& kern = simd::kernels<T>();
    std::vector<T> col;
    const T* colp = value(x).data.data();
    if (!direct) {
        col.resize(g.rows() * g.cols());
        im2col(g, value(x).data.data(), col.data());
        colp = col.data();
    }
    Tensor<T> out(Shape{conv.cout, in.n, g.ho, g.wo});
    const T* w = params_.value(conv.weight);
    const T* b = params_.value(conv.bias);
    kern.gemm(conv.cout, g.cols(), g.rows(), w, colp, out.data.data(), false);
    for (int o = 0; o < conv.cout; ++o) {
        T* row = out.data.data() + static_cast<std::size_t>(o) * g.cols();
        for (std::size_t j = 0; j < g.cols(); ++j) row[j] += b[o];
    }
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, x, y, conv, g, direct, col = std::move(col)]() {
            const auto& kern = simd::kernels<T>();
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            const std::size_t ncols = g.cols(), nrows = g.rows();
            const T* colp = direct ? value(x).data.data() : col.data();
            T* dw = params_.grad(conv.weight);
            T* db = params_.grad(conv.bias);
            for (int o = 0; o < conv.cout; ++o) {
                const T* dyo = dy.data() + static_cast<std::size_t>(o) * ncols;
                db[o] += std::accumulate(dyo, dyo + ncols, T(0));
            }
            // dWᵀ = col · dyᵀ, accumulated over column chunks.
            constexpr std::size_t chunk = 256;
            const std::size_t cout = static_cast<std::size_t>(conv.cout);
            std::vector<T> colc(nrows * chunk), dyt(chunk * cout), dwt(nrows * cout, T(0));
            for (std::size_t j0 = 0; j0 < ncols; j0 += chunk) {
                const std::size_t len = std::min(chunk, ncols - j0);
                for (std::size_t r = 0; r < nrows; ++r) std::copy_n(colp + r * ncols + j0, len, colc.data() + r * len);
                for (std::size_t o = 0; o < cout; ++o) {
                    const T* src = dy.data() + o * ncols + j0;
                    for (std::size_t j = 0; j < len; ++j) dyt[j * cout + o] = src[j];
                }
                kern.gemm(nrows, cout, len, colc.data(), dyt.data(), dwt.data(), true);
            }
            for (std::size_t o = 0; o < cout; ++o)
                for (std::size_t r = 0; r < nrows; ++r) dw[o * nrows + r] += dwt[r * cout + o];
            const auto wt = transpose(params_.value(conv.weight), static_cast<std::size_t>(conv.cout), nrows);
            auto& dx = grad_buffer(x);
            if (direct) {
                kern.gemm(nrows, ncols, conv.cout, wt.data(), dy.data(), dx.data(), true);
            } else {
                std::vector<T> dcol(nrows * ncols);
                kern.gemm(nrows, ncols, conv.cout, wt.data(), dy.data(), dcol.data(), false);
                col2im(g, dcol.data(), dx.data());
            }
        });
    }
    return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::linear(Var x, const Linear& lin) {
    const Shape in = shape(x);
    require(in.c == lin.in && in.h == 1 && in.w == 1, ErrorCode::ShapeMismatch, "linear expects [in, n, 1, 1]");
    const auto& kern = simd::kernels<T>();
    Tensor<T> out(Shape{lin.out, in.n, 1, 1});
    kern.gemm(lin.out, in.n, lin.in, params_.value(lin.weight), value(x).data.data(), out.data.data(), false);
    const T* b = params_.value(lin.bias);
    for (int o = 0; o < lin.out; ++o)
        for (int n = 0; n < in.n; ++n) out.data[static_cast<std::size_t>(o) * in.n + n] += b[o];
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, x, y, lin]() {
            const auto& kern = simd::kernels<T>();
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            const std::size_t n = static_cast<std::size_t>(shape(x).n);
            const T* xv = value(x).data.data();
            T* dw = params_.grad(lin.weight);
            T* db = params_.grad(lin.bias);
            for (int o = 0; o < lin.out; ++o) {
                const T* dyo = dy.data() + o * n;
                db[o] += std::accumulate(dyo, dyo + n, T(0));
                for (int i = 0; i < lin.in; ++i) dw[static_cast<std::size_t>(o) * lin.in + i] += kern.dot(dyo, xv + i * n, n);
            }
            const auto wt = transpose(params_.value(lin.weight), static_cast<std::size_t>(lin.out), static_cast<std::size_t>(lin.in));
            kern.gemm(lin.in, n, lin.out, wt.data(), dy.data(), grad_buffer(x).data(), true);
        });
    }
    return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::group_norm(Var x, const GroupNorm& gn) {
    const Shape s = shape(x);
    require(s.c == gn.channels, ErrorCode::ShapeMismatch, "group_norm channels");
    const int per_group = gn.channels / gn.groups;
    const std::size_t plane = s.plane();
    const double count = static_cast<double>(per_group) * plane;
    Tensor<T> xhat(s);
    std::vector<T> rstd(static_cast<std::size_t>(s.n) * gn.groups);
    const Tensor<T>& xv = value(x);
    for (int n = 0; n < s.n; ++n)
        for (int g = 0; g < gn.groups; ++g) {
            double sum = 0, sq = 0;
            for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
                const T* p = xv.channel(c, n);
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            const double mean = sum / count;
            for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
                const T* p = xv.channel(c, n);
                for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
            }
            const double r = 1.0 / std::sqrt(sq / count + gn.eps);
            rstd[static_cast<std::size_t>(n) * gn.groups + g] = static_cast<T>(r);
            for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
                const T* p = xv.channel(c, n);
                T* q = xhat.channel(c, n);
                for (std::size_t i = 0; i < plane; ++i) q[i] = static_cast<T>((p[i] - mean) * r);
            }
        }
    Tensor<T> out(s);
    const T* gamma = params_.value(gn.gamma);
    const T* beta = params_.value(gn.beta);
    for (int c = 0; c < s.c; ++c)
        for (int n = 0; n < s.n; ++n) {
            const T* q = xhat.channel(c, n);
            T* o = out.channel(c, n);
            for (std::size_t i = 0; i < plane; ++i) o[i] = gamma[c] * q[i] + beta[c];
        }
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, x, y, gn, per_group, count, xhat = std::move(xhat), rstd = std::move(rstd)]() {
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            const Shape s = xhat.shape;
            const std::size_t plane = s.plane();
            const T* gamma = params_.value(gn.gamma);
            T* dgamma = params_.grad(gn.gamma);
            T* dbeta = params_.grad(gn.beta);
            auto& dx = grad_buffer(x);
            auto at = [&](auto& buf, int c, int n) { return buf.data() + (static_cast<std::size_t>(c) * s.n + n) * plane; };
            for (int c = 0; c < s.c; ++c)
                for (int n = 0; n < s.n; ++n) {
                    const T* d = at(dy, c, n);
                    const T* q = xhat.channel(c, n);
                    double sg = 0, sb = 0;
                    for (std::size_t i = 0; i < plane; ++i) {
                        sg += d[i] * q[i];
                        sb += d[i];
                    }
                    dgamma[c] += static_cast<T>(sg);
                    dbeta[c] += static_cast<T>(sb);
                }
            for (int n = 0; n < s.n; ++n)
                for (int g = 0; g < gn.groups; ++g) {
                    double s1 = 0, s2 = 0;
                    for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
                        const T* d = at(dy, c, n);
                        const T* q = xhat.channel(c, n);
                        for (std::size_t i = 0; i < plane; ++i) {
                            const double dh = d[i] * gamma[c];
                            s1 += dh;
                            s2 += dh * q[i];
                        }
                    }
                    const double r = rstd[static_cast<std::size_t>(n) * gn.groups + g];
                    for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
                        const T* d = at(dy, c, n);
                        const T* q = xhat.channel(c, n);
                        T* o = at(dx, c, n);
                        for (std::size_t i = 0; i < plane; ++i) {
                            const double dh = d[i] * gamma[c];
                            o[i] += static_cast<T>(r / count * (count * dh - s1 - q[i] * s2));
                        }
                    }
                }
        });
    }
    return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::silu(Var x) {
    const Tensor<T>& xv = value(x);
    Tensor<T> out(xv.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = xv.data[i] * sigmoid_of(xv.data[i]);
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, x, y]() {
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            const auto& xv = value(x).data;
            auto& dx = grad_buffer(x);
            for (std::size_t i = 0; i < dx.size(); ++i) {
                const T s = sigmoid_of(xv[i]);
                dx[i] += dy[i] * (s + xv[i] * s * (T(1) - s));
            }
        });
    }
    return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::sigmoid(Var x) {
    const Tensor<T>& xv = value(x);
    Tensor<T> out(xv.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = sigmoid_of(xv.data[i]);
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, x, y]() {
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            const auto& yv = value(y).data;
            auto& dx = grad_buffer(x);
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * yv[i] * (T(1) - yv[i]);
        });
    }
    return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::add(Var a, Var b) {
    require(shape(a) == shape(b), ErrorCode::ShapeMismatch, "add operands");
    Tensor<T> out = value(a);
    const auto& bv = value(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv[i];
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, a, b, y]() {
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            for (Var v : {a, b}) {
                auto& d = grad_buffer(v);
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
            }
        });
    }
    return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::add_broadcast(Var x, Var v) {
    const Shape s = shape(x);
    const Shape vs = shape(v);
    require(vs.c == s.c && vs.n == s.n && vs.h == 1 && vs.w == 1, ErrorCode::ShapeMismatch, "add_broadcast operands");
    Tensor<T> out = value(x);
    const auto& vv = value(v).data;
    const std::size_t plane = s.plane();
    for (std::size_t cn = 0; cn < static_cast<std::size_t>(s.c) * s.n; ++cn) {
        T* p = out.data.data() + cn * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += vv[cn];
    }
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, x, v, y, plane]() {
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            auto& dx = grad_buffer(x);
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
            auto& dv = grad_buffer(v);
            for (std::size_t cn = 0; cn < dv.size(); ++cn) {
                const T* p = dy.data() + cn * plane;
                dv[cn] += std::accumulate(p, p + plane, T(0));
            }
        });
    }
    return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::concat(std::span<const Var> parts) {
    require(!parts.empty(), ErrorCode::ShapeMismatch, "concat of nothing");
    Shape s = shape(parts[0]);
    s.c = 0;
    for (Var p : parts) {
        const Shape ps = shape(p);
        require(ps.n == s.n && ps.h == s.h && ps.w == s.w, ErrorCode::ShapeMismatch, "concat operands");
        s.c += ps.c;
    }
    Tensor<T> out(s);
    std::size_t offset = 0;
    for (Var p : parts) {
        const auto& pv = value(p).data;
        std::copy(pv.begin(), pv.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += pv.size();
    }
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, y, ps = std::vector<Var>(parts.begin(), parts.end())]() {
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            std::size_t offset = 0;
            for (Var p : ps) {
                auto& d = grad_buffer(p);
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[offset + i];
                offset += d.size();
            }
        });
    }
    return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::upsample2(Var x) {
    const Shape s = shape(x);
    Shape os{s.c, s.n, s.h * 2, s.w * 2};
    Tensor<T> out(os);
    const auto& xv = value(x);
    for (int c = 0; c < s.c; ++c)
        for (int n = 0; n < s.n; ++n) {
            const T* p = xv.channel(c, n);
            T* q = out.channel(c, n);
            for (int y = 0; y < os.h; ++y)
                for (int xx = 0; xx < os.w; ++xx) q[y * os.w + xx] = p[(y / 2) * s.w + xx / 2];
        }
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, x, y, s, os]() {
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            auto& dx = grad_buffer(x);
            for (std::size_t cn = 0; cn < static_cast<std::size_t>(s.c) * s.n; ++cn) {
                const T* q = dy.data() + cn * os.plane();
                T* p = dx.data() + cn * s.plane();
                for (int yy = 0; yy < os.h; ++yy)
                    for (int xx = 0; xx < os.w; ++xx) p[(yy / 2) * s.w + xx / 2] += q[yy * os.w + xx];
            }
        });
    }
    return y;
}

template <class T>
typename Graph<T>::Var Graph<T>::avg_pool2(Var x) {
    const Shape s = shape(x);
    require(s.h % 2 == 0 && s.w % 2 == 0, ErrorCode::IndivisibleSize, "avg_pool2 needs even sides");
    Shape os{s.c, s.n, s.h / 2, s.w / 2};
    Tensor<T> out(os);
    const auto& xv = value(x);
    for (int c = 0; c < s.c; ++c)
        for (int n = 0; n < s.n; ++n) {
            const T* p = xv.channel(c, n);
            T* q = out.channel(c, n);
            for (int y = 0; y < os.h; ++y)
                for (int xx = 0; xx < os.w; ++xx)
                    q[y * os.w + xx] = T(0.25) * (p[2 * y * s.w + 2 * xx] + p[2 * y * s.w + 2 * xx + 1] +
                                                  p[(2 * y + 1) * s.w + 2 * xx] + p[(2 * y + 1) * s.w + 2 * xx + 1]);
        }
    const Var y = push(std::move(out));
    if (record_) {
        tape_.push_back([this, x, y, s, os]() {
            const auto& dy = nodes_[static_cast<std::size_t>(y)].grad;
            if (dy.empty()) return;
            auto& dx = grad_buffer(x);
            for (std::size_t cn = 0; cn < static_cast<std::size_t>(s.c) * s.n; ++cn) {
                const T* q = dy.data() + cn * os.plane();
                T* p = dx.data() + cn * s.plane();
                for (int yy = 0; yy < s.h; ++yy)
                    for (int xx = 0; xx < s.w; ++xx) p[yy * s.w + xx] += T(0.25) * q[(yy / 2) * os.w + xx / 2];
            }
        });
    }
    return y;
}

template <class T>
Tensor<T> pack_batch(std::span<const std::vector<double>> items, int c, int h, int w) {
    const int n = static_cast<int>(items.size());
    Tensor<T> t(Shape{c, n, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        require(items[static_cast<std::size_t>(i)].size() == static_cast<std::size_t>(c) * plane, ErrorCode::ShapeMismatch,
                "pack_batch item size");
        for (int ch = 0; ch < c; ++ch) {
            const double* src = items[static_cast<std::size_t>(i)].data() + ch * plane;
            T* dst = t.channel(ch, i);
            for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<T>(src[p]);
        }
    }
    return t;
}

template <class T>
std::vector<double> unpack_item(const Tensor<T>& t, int n) {
    const std::size_t plane = t.shape.plane();
    std::vector<double> out(static_cast<std::size_t>(t.shape.c) * plane);
    for (int ch = 0; ch < t.shape.c; ++ch) {
        const T* src = t.channel(ch, n);
        for (std::size_t p = 0; p < plane; ++p) out[ch * plane + p] = static_cast<double>(src[p]);
    }
    return out;
}

#define POLYPGEN_INSTANTIATE(T)                                                             \
    template class ParamStore<T>;                                                           \
    template class Graph<T>;                                                                \
    template Conv2d make_conv<T>(ParamStore<T>&, int, int, int, int, int);                  \
    template Linear make_linear<T>(ParamStore<T>&, int, int);                               \
    template GroupNorm make_group_norm<T>(ParamStore<T>&, int);                             \
    template Tensor<T> pack_batch<T>(std::span<const std::vector<double>>, int, int, int); \
    template std::vector<double> unpack_item<T>(const Tensor<T>&, int);

POLYPGEN_INSTANTIATE(float)
POLYPGEN_INSTANTIATE(double)

}  // namespace polypgen::nn
