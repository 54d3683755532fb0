#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "rfml/nn/tensor.hpp"

namespace rfml::nn {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MMap = Eigen::Map<RowMat<T>>;
template <class T>
using CMap = Eigen::Map<const RowMat<T>>;

template <class T>
CMap<T> cmap(const std::vector<T>& v, std::size_t r, std::size_t c, std::size_t off = 0) {
    return CMap<T>(v.data() + off, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
template <class T>
MMap<T> mmap(std::vector<T>& v, std::size_t r, std::size_t c, std::size_t off = 0) {
    return MMap<T>(v.data() + off, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

inline void check(bool ok, const char* msg) {
    if (!ok) throw ShapeMismatch(msg);
}

// Rows seen as a flattened (rows, last-dim) matrix.
template <class T>
std::size_t flat_rows(const Tensor<T>& t) {
    return t.size() / t.shape.back();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise

template <class T>
Ptr<T> add(const Ptr<T>& a, const Ptr<T>& b) {
    detail::check(a->shape == b->shape, "add: shape mismatch");
    auto out = make_op<T>(
        a->shape, {a, b}, [a, b](Tensor<T>& self) {
            if (a->requires_grad)
                for (std::size_t i = 0; i < self.size(); ++i) a->g[i] += self.g[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < self.size(); ++i) b->g[i] += self.g[i];
        });
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] + b->v[i];
    return out;
}

template <class T>
Ptr<T> mul(const Ptr<T>& a, const Ptr<T>& b) {
    detail::check(a->shape == b->shape, "mul: shape mismatch");
    auto out = make_op<T>(
        a->shape, {a, b}, [a, b](Tensor<T>& self) {
            if (a->requires_grad)
                for (std::size_t i = 0; i < self.size(); ++i) a->g[i] += self.g[i] * b->v[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < self.size(); ++i) b->g[i] += self.g[i] * a->v[i];
        });
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] * b->v[i];
    return out;
}

template <class T>
Ptr<T> scale(const Ptr<T>& a, T c) {
    auto out = make_op<T>(
        a->shape, {a}, [a, c](Tensor<T>& self) {
            if (a->requires_grad)
                for (std::size_t i = 0; i < self.size(); ++i) a->g[i] += self.g[i] * c;
        });
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] * c;
    return out;
}

// x + row vector b over the last dimension.
template <class T>
Ptr<T> add_rowvec(const Ptr<T>& x, const Ptr<T>& b) {
    detail::check(b->rank() == 1 && b->shape[0] == x->shape.back(), "add_rowvec: bad bias shape");
    const std::size_t d = x->shape.back();
    const std::size_t rows = detail::flat_rows(*x);
    auto out = make_op<T>(
        x->shape, {x, b}, [x, b, rows, d](Tensor<T>& self) {
            if (x->requires_grad)
                for (std::size_t i = 0; i < self.size(); ++i) x->g[i] += self.g[i];
            if (b->requires_grad)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < d; ++c) b->g[c] += self.g[r * d + c];
        });
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < d; ++c) out->v[r * d + c] = x->v[r * d + c] + b->v[c];
    return out;
}

template <class T>
Ptr<T> relu(const Ptr<T>& x) {
    auto out = make_op<T>(
        x->shape, {x}, [x](Tensor<T>& self) {
            if (x->requires_grad)
                for (std::size_t i = 0; i < self.size(); ++i)
                    if (x->v[i] > T(0)) x->g[i] += self.g[i];
        });
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = x->v[i] > T(0) ? x->v[i] : T(0);
    return out;
}

// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
template <class T>
Ptr<T> gelu(const Ptr<T>& x) {
    auto out = make_op<T>(
        x->shape, {x}, [x](Tensor<T>& self) {
            if (!x->requires_grad) return;
            constexpr double inv_sqrt2 = 0.70710678118654752440;
            constexpr double inv_sqrt2pi = 0.39894228040143267794;
            for (std::size_t i = 0; i < self.size(); ++i) {
                const double xi = static_cast<double>(x->v[i]);
                const double cdf = 0.5 * (1.0 + std::erf(xi * inv_sqrt2));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * xi * xi);
                x->g[i] += self.g[i] * static_cast<T>(cdf + xi * pdf);
            }
        });
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    for (std::size_t i = 0; i < out->size(); ++i) {
        const double xi = static_cast<double>(x->v[i]);
        out->v[i] = static_cast<T>(0.5 * xi * (1.0 + std::erf(xi * inv_sqrt2)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// dense products

// 2-D GEMM with optional transposes: C = op(A) * op(B).
template <class T>
Ptr<T> matmul(const Ptr<T>& a, const Ptr<T>& b, bool ta = false, bool tb = false) {
    detail::check(a->rank() == 2 && b->rank() == 2, "matmul: rank-2 operands required");
    const std::size_t m = ta ? a->shape[1] : a->shape[0];
    const std::size_t k = ta ? a->shape[0] : a->shape[1];
    const std::size_t kb = tb ? b->shape[1] : b->shape[0];
    const std::size_t n = tb ? b->shape[0] : b->shape[1];
    detail::check(k == kb, "matmul: inner dimension mismatch");

    auto out = make_op<T>(
        {m, n}, {a, b}, [a, b, ta, tb, m, k, n](Tensor<T>& self) {
            auto gC = detail::cmap(self.g, m, n);
            auto Av = detail::cmap(a->v, a->shape[0], a->shape[1]);
            auto Bv = detail::cmap(b->v, b->shape[0], b->shape[1]);
            if (a->requires_grad) {
                auto gA = detail::mmap(a->g, a->shape[0], a->shape[1]);
                if (!ta && !tb) gA.noalias() += gC * Bv.transpose();
                else if (!ta && tb) gA.noalias() += gC * Bv;
                else if (ta && !tb) gA.noalias() += Bv * gC.transpose();
                else gA.noalias() += Bv.transpose() * gC.transpose();
            }
            if (b->requires_grad) {
                auto gB = detail::mmap(b->g, b->shape[0], b->shape[1]);
                if (!ta && !tb) gB.noalias() += Av.transpose() * gC;
                else if (!ta && tb) gB.noalias() += gC.transpose() * Av;
                else if (ta && !tb) gB.noalias() += Av * gC;
                else gB.noalias() += gC.transpose() * Av.transpose();
            }
        });
    auto Av = detail::cmap(a->v, a->shape[0], a->shape[1]);
    auto Bv = detail::cmap(b->v, b->shape[0], b->shape[1]);
    auto C = detail::mmap(out->v, m, n);
    if (!ta && !tb) C.noalias() = Av * Bv;
    else if (!ta && tb) C.noalias() = Av * Bv.transpose();
    else if (ta && !tb) C.noalias() = Av.transpose() * Bv;
    else C.noalias() = Av.transpose() * Bv.transpose();
    return out;
}

// Batched GEMM over leading dimension: (N,m,k) x (N,k,n) -> (N,m,n).
template <class T>
Ptr<T> bmm(const Ptr<T>& a, const Ptr<T>& b, bool ta = false, bool tb = false) {
    detail::check(a->rank() == 3 && b->rank() == 3, "bmm: rank-3 operands required");
    detail::check(a->shape[0] == b->shape[0], "bmm: batch mismatch");
    const std::size_t nb = a->shape[0];
    const std::size_t ar = a->shape[1], ac = a->shape[2];
    const std::size_t br = b->shape[1], bc = b->shape[2];
    const std::size_t m = ta ? ac : ar;
    const std::size_t k = ta ? ar : ac;
    const std::size_t kb = tb ? bc : br;
    const std::size_t n = tb ? br : bc;
    detail::check(k == kb, "bmm: inner dimension mismatch");

    auto out = make_op<T>(
        {nb, m, n}, {a, b}, [a, b, ta, tb, nb, ar, ac, br, bc, m, n](Tensor<T>& self) {
            for (std::size_t i = 0; i < nb; ++i) {
                auto gC = detail::cmap(self.g, m, n, i * m * n);
                auto Av = detail::cmap(a->v, ar, ac, i * ar * ac);
                auto Bv = detail::cmap(b->v, br, bc, i * br * bc);
                if (a->requires_grad) {
                    auto gA = detail::mmap(a->g, ar, ac, i * ar * ac);
                    if (!ta && !tb) gA.noalias() += gC * Bv.transpose();
                    else if (!ta && tb) gA.noalias() += gC * Bv;
                    else if (ta && !tb) gA.noalias() += Bv * gC.transpose();
                    else gA.noalias() += Bv.transpose() * gC.transpose();
                }
                if (b->requires_grad) {
                    auto gB = detail::mmap(b->g, br, bc, i * br * bc);
                    if (!ta && !tb) gB.noalias() += Av.transpose() * gC;
                    else if (!ta && tb) gB.noalias() += gC.transpose() * Av;
                    else if (ta && !tb) gB.noalias() += Av * gC;
                    else gB.noalias() += gC.transpose() * Av.transpose();
                }
            }
        });
    for (std::size_t i = 0; i < nb; ++i) {
        auto Av = detail::cmap(a->v, ar, ac, i * ar * ac);
        auto Bv = detail::cmap(b->v, br, bc, i * br * bc);
        auto C = detail::mmap(out->v, m, n, i * m * n);
        if (!ta && !tb) C.noalias() = Av * Bv;
        else if (!ta && tb) C.noalias() = Av * Bv.transpose();
        else if (ta && !tb) C.noalias() = Av.transpose() * Bv;
        else C.noalias() = Av.transpose() * Bv.transpose();
    }
    return out;
}

// y = x W^T (+ b), with W stored (d_out, d_in). x may carry leading batch dims.
template <class T>
Ptr<T> linear(const Ptr<T>& x, const Ptr<T>& w, const Ptr<T>& b = nullptr) {
    detail::check(w->rank() == 2, "linear: weight must be rank 2");
    detail::check(x->shape.back() == w->shape[1], "linear: input dim mismatch");
    if (b) detail::check(b->rank() == 1 && b->shape[0] == w->shape[0], "linear: bias dim mismatch");
    const std::size_t rows = detail::flat_rows(*x);
    const std::size_t din = w->shape[1];
    const std::size_t dout = w->shape[0];
    std::vector<std::size_t> out_shape = x->shape;
    out_shape.back() = dout;

    std::vector<Ptr<T>> parents = {x, w};
    if (b) parents.push_back(b);
    auto out = make_op<T>(
        std::move(out_shape), std::move(parents), [x, w, b, rows, din, dout](Tensor<T>& self) {
            auto gY = detail::cmap(self.g, rows, dout);
            if (x->requires_grad) {
                auto gX = detail::mmap(x->g, rows, din);
                gX.noalias() += gY * detail::cmap(w->v, dout, din);
            }
            if (w->requires_grad) {
                auto gW = detail::mmap(w->g, dout, din);
                gW.noalias() += gY.transpose() * detail::cmap(x->v, rows, din);
            }
            if (b && b->requires_grad)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < dout; ++c) b->g[c] += self.g[r * dout + c];
        });
    auto Y = detail::mmap(out->v, rows, dout);
    Y.noalias() = detail::cmap(x->v, rows, din) * detail::cmap(w->v, dout, din).transpose();
    if (b)
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < dout; ++c) out->v[r * dout + c] += b->v[c];
    return out;
}

// ---------------------------------------------------------------------------
// normalization and reductions

// Softmax over the last dimension. With causal=true the input must be
// (N, Tq, Tk) with Tq == Tk; entries with key index > query index get
// probability zero and receive no gradient.
template <class T>
Ptr<T> softmax(const Ptr<T>& x, bool causal = false) {
    const std::size_t d = x->shape.back();
    const std::size_t rows = detail::flat_rows(*x);
    std::size_t tq = 1;
    if (causal) {
        detail::check(x->rank() == 3 && x->shape[1] == x->shape[2],
                      "softmax: causal mask needs square (N,T,T) scores");
        tq = x->shape[1];
    }
    auto valid_count = [causal, tq, d](std::size_t row) {
        return causal ? (row % tq) + 1 : d;
    };

    auto out = make_op<T>(
        x->shape, {x}, [x, rows, d, valid_count](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t nv = valid_count(r);
                const T* y = self.v.data() + r * d;
                const T* gy = self.g.data() + r * d;
                T dot = T(0);
                for (std::size_t c = 0; c < nv; ++c) dot += gy[c] * y[c];
                T* gx = x->g.data() + r * d;
                for (std::size_t c = 0; c < nv; ++c) gx[c] += y[c] * (gy[c] - dot);
            }
        });
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t nv = valid_count(r);
        const T* in = x->v.data() + r * d;
        T* y = out->v.data() + r * d;
        T mx = in[0];
        for (std::size_t c = 1; c < nv; ++c) mx = std::max(mx, in[c]);
        T sum = T(0);
        for (std::size_t c = 0; c < nv; ++c) {
            y[c] = std::exp(in[c] - mx);
            sum += y[c];
        }
        for (std::size_t c = 0; c < nv; ++c) y[c] /= sum;
        for (std::size_t c = nv; c < d; ++c) y[c] = T(0);
    }
    return out;
}

// Layer norm over the last dimension with learnable gain/bias.
template <class T>
Ptr<T> layer_norm(const Ptr<T>& x, const Ptr<T>& gain, const Ptr<T>& bias, T eps = T(1e-5)) {
    const std::size_t d = x->shape.back();
    detail::check(gain->rank() == 1 && gain->shape[0] == d, "layer_norm: gain dim mismatch");
    detail::check(bias->rank() == 1 && bias->shape[0] == d, "layer_norm: bias dim mismatch");
    const std::size_t rows = detail::flat_rows(*x);

    // Cache per-row mean and inverse stddev for the backward pass.
    auto stats = std::make_shared<std::vector<T>>(rows * 2);
    auto out = make_op<T>(
        x->shape, {x, gain, bias}, [x, gain, bias, stats, rows, d](Tensor<T>& self) {
            for (std::size_t r = 0; r < rows; ++r) {
                const T mu = (*stats)[2 * r];
                const T inv = (*stats)[2 * r + 1];
                const T* xv = x->v.data() + r * d;
                const T* gy = self.g.data() + r * d;
                if (gain->requires_grad || bias->requires_grad) {
                    for (std::size_t c = 0; c < d; ++c) {
                        const T xhat = (xv[c] - mu) * inv;
                        if (gain->requires_grad) gain->g[c] += gy[c] * xhat;
                        if (bias->requires_grad) bias->g[c] += gy[c];
                    }
                }
                if (x->requires_grad) {
                    T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
                    for (std::size_t c = 0; c < d; ++c) {
                        const T xhat = (xv[c] - mu) * inv;
                        const T dxhat = gy[c] * gain->v[c];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    T* gx = x->g.data() + r * d;
                    const T invd = T(1) / static_cast<T>(d);
                    for (std::size_t c = 0; c < d; ++c) {
                        const T xhat = (xv[c] - mu) * inv;
                        const T dxhat = gy[c] * gain->v[c];
                        gx[c] += inv * (dxhat - invd * sum_dxhat - invd * xhat * sum_dxhat_xhat);
                    }
                }
            }
        });
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xv = x->v.data() + r * d;
        T mu = T(0);
        for (std::size_t c = 0; c < d; ++c) mu += xv[c];
        mu /= static_cast<T>(d);
        T var = T(0);
        for (std::size_t c = 0; c < d; ++c) var += (xv[c] - mu) * (xv[c] - mu);
        var /= static_cast<T>(d);
        const T inv = T(1) / std::sqrt(var + eps);
        (*stats)[2 * r] = mu;
        (*stats)[2 * r + 1] = inv;
        T* y = out->v.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) y[c] = (xv[c] - mu) * inv * gain->v[c] + bias->v[c];
    }
    return out;
}

// Mean over one axis of a rank-2 or rank-3 tensor.
template <class T>
Ptr<T> mean_pool(const Ptr<T>& x, std::size_t axis) {
    detail::check(axis < x->rank(), "mean_pool: axis out of range");
    std::vector<std::size_t> out_shape;
    for (std::size_t i = 0; i < x->rank(); ++i)
        if (i != axis) out_shape.push_back(x->shape[i]);
    if (out_shape.empty()) out_shape = {1};

    // Flatten as outer x axis x inner.
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x->shape[i];
    for (std::size_t i = axis + 1; i < x->rank(); ++i) inner *= x->shape[i];
    const std::size_t n = x->shape[axis];
    const T invn = T(1) / static_cast<T>(n);

    auto out = make_op<T>(
        out_shape, {x}, [x, outer, inner, n, invn](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t k = 0; k < n; ++k)
                    for (std::size_t c = 0; c < inner; ++c)
                        x->g[(o * n + k) * inner + c] += self.g[o * inner + c] * invn;
        });
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t c = 0; c < inner; ++c) {
            T acc = T(0);
            for (std::size_t k = 0; k < n; ++k) acc += x->v[(o * n + k) * inner + c];
            out->v[o * inner + c] = acc * invn;
        }
    return out;
}

template <class T>
Ptr<T> sum_all(const Ptr<T>& x) {
    auto out = make_op<T>(
        {1}, {x}, [x](Tensor<T>& self) {
            if (x->requires_grad)
                for (std::size_t i = 0; i < x->size(); ++i) x->g[i] += self.g[0];
        });
    T acc = T(0);
    for (auto v : x->v) acc += v;
    out->v[0] = acc;
    return out;
}

// ---------------------------------------------------------------------------
// convolution and pooling

// x (B,Cin,L), w (Cout,Cin,K), bias (Cout) optional; zero padding.
template <class T>
Ptr<T> conv1d(const Ptr<T>& x, const Ptr<T>& w, const Ptr<T>& b, std::size_t stride,
              std::size_t padding) {
    detail::check(x->rank() == 3 && w->rank() == 3, "conv1d: rank-3 input and kernel required");
    detail::check(x->shape[1] == w->shape[1], "conv1d: channel mismatch");
    detail::check(stride >= 1, "conv1d: stride must be >= 1");
    const std::size_t nb = x->shape[0], cin = x->shape[1], len = x->shape[2];
    const std::size_t cout = w->shape[0], kk = w->shape[2];
    detail::check(len + 2 * padding >= kk, "conv1d: kernel larger than padded input");
    const std::size_t lout = (len + 2 * padding - kk) / stride + 1;
    if (b) detail::check(b->rank() == 1 && b->shape[0] == cout, "conv1d: bias dim mismatch");

    std::vector<Ptr<T>> parents = {x, w};
    if (b) parents.push_back(b);
    auto out = make_op<T>(
        {nb, cout, lout}, std::move(parents),
        [x, w, b, nb, cin, len, cout, kk, lout, stride, padding](Tensor<T>& self) {
            for (std::size_t bi = 0; bi < nb; ++bi)
                for (std::size_t co = 0; co < cout; ++co)
                    for (std::size_t t = 0; t < lout; ++t) {
                        const T gy = self.g[(bi * cout + co) * lout + t];
                        if (gy == T(0)) continue;
                        if (b && b->requires_grad) b->g[co] += gy;
                        for (std::size_t ci = 0; ci < cin; ++ci)
                            for (std::size_t k = 0; k < kk; ++k) {
                                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) -
                                                           static_cast<std::ptrdiff_t>(padding);
                                if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                                const std::size_t xi = (bi * cin + ci) * len + static_cast<std::size_t>(src);
                                if (x->requires_grad) x->g[xi] += gy * w->v[(co * cin + ci) * kk + k];
                                if (w->requires_grad) w->g[(co * cin + ci) * kk + k] += gy * x->v[xi];
                            }
                    }
        });
    for (std::size_t bi = 0; bi < nb; ++bi)
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t t = 0; t < lout; ++t) {
                T acc = b ? b->v[co] : T(0);
                for (std::size_t ci = 0; ci < cin; ++ci)
                    for (std::size_t k = 0; k < kk; ++k) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) -
                                                   static_cast<std::ptrdiff_t>(padding);
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                        acc += w->v[(co * cin + ci) * kk + k] *
                               x->v[(bi * cin + ci) * len + static_cast<std::size_t>(src)];
                    }
                out->v[(bi * cout + co) * lout + t] = acc;
            }
    return out;
}

template <class T>
Ptr<T> max_pool1d(const Ptr<T>& x, std::size_t width, std::size_t stride) {
    detail::check(x->rank() == 3, "max_pool1d: rank-3 input required");
    detail::check(width >= 1 && stride >= 1, "max_pool1d: width/stride must be >= 1");
    const std::size_t nb = x->shape[0], ch = x->shape[1], len = x->shape[2];
    detail::check(len >= width, "max_pool1d: window larger than input");
    const std::size_t lout = (len - width) / stride + 1;

    auto argmax = std::make_shared<std::vector<std::size_t>>(nb * ch * lout);
    auto out = make_op<T>(
        {nb, ch, lout}, {x}, [x, argmax](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t i = 0; i < self.size(); ++i) x->g[(*argmax)[i]] += self.g[i];
        });
    for (std::size_t bc = 0; bc < nb * ch; ++bc)
        for (std::size_t t = 0; t < lout; ++t) {
            std::size_t best = bc * len + t * stride;
            for (std::size_t k = 1; k < width; ++k) {
                const std::size_t idx = bc * len + t * stride + k;
                if (x->v[idx] > x->v[best]) best = idx;
            }
            out->v[bc * lout + t] = x->v[best];
            (*argmax)[bc * lout + t] = best;
        }
    return out;
}

template <class T>
Ptr<T> avg_pool1d(const Ptr<T>& x, std::size_t width, std::size_t stride) {
    detail::check(x->rank() == 3, "avg_pool1d: rank-3 input required");
    detail::check(width >= 1 && stride >= 1, "avg_pool1d: width/stride must be >= 1");
    const std::size_t nb = x->shape[0], ch = x->shape[1], len = x->shape[2];
    detail::check(len >= width, "avg_pool1d: window larger than input");
    const std::size_t lout = (len - width) / stride + 1;
    const T invw = T(1) / static_cast<T>(width);

    auto out = make_op<T>(
        {nb, ch, lout}, {x}, [x, nb, ch, len, lout, width, stride, invw](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t bc = 0; bc < nb * ch; ++bc)
                for (std::size_t t = 0; t < lout; ++t)
                    for (std::size_t k = 0; k < width; ++k)
                        x->g[bc * len + t * stride + k] += self.g[bc * lout + t] * invw;
        });
    for (std::size_t bc = 0; bc < nb * ch; ++bc)
        for (std::size_t t = 0; t < lout; ++t) {
            T acc = T(0);
            for (std::size_t k = 0; k < width; ++k) acc += x->v[bc * len + t * stride + k];
            out->v[bc * lout + t] = acc * invw;
        }
    return out;
}

// ---------------------------------------------------------------------------
// gathers, layout ops

// Rows of `table` (V,D) gathered by flat `indices`; output idx_shape + [D].
template <class T>
Ptr<T> embedding_lookup(const Ptr<T>& table, const std::vector<int>& indices,
                        std::vector<std::size_t> idx_shape) {
    detail::check(table->rank() == 2, "embedding_lookup: table must be rank 2");
    detail::check(numel(idx_shape) == indices.size(), "embedding_lookup: indices do not fit shape");
    const std::size_t vocab = table->shape[0];
    const std::size_t d = table->shape[1];
    for (int idx : indices)
        if (idx < 0 || static_cast<std::size_t>(idx) >= vocab)
            throw InvalidArgument("embedding_lookup: index out of range");
    std::vector<std::size_t> out_shape = std::move(idx_shape);
    out_shape.push_back(d);

    auto idx_copy = std::make_shared<std::vector<int>>(indices);
    auto out = make_op<T>(
        std::move(out_shape), {table}, [table, idx_copy, d](Tensor<T>& self) {
            if (!table->requires_grad) return;
            for (std::size_t r = 0; r < idx_copy->size(); ++r) {
                const std::size_t row = static_cast<std::size_t>((*idx_copy)[r]);
                for (std::size_t c = 0; c < d; ++c) table->g[row * d + c] += self.g[r * d + c];
            }
        });
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t row = static_cast<std::size_t>(indices[r]);
        std::copy_n(table->v.data() + row * d, d, out->v.data() + r * d);
    }
    return out;
}

// (T,D) -> (B,T,D) by repetition; gradients sum over the batch copy axis.
template <class T>
Ptr<T> broadcast_to_batch(const Ptr<T>& x, std::size_t batch) {
    detail::check(x->rank() == 2, "broadcast_to_batch: rank-2 input required");
    const std::size_t n = x->size();
    auto out = make_op<T>(
        {batch, x->shape[0], x->shape[1]}, {x}, [x, batch, n](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t i = 0; i < n; ++i) x->g[i] += self.g[b * n + i];
        });
    for (std::size_t b = 0; b < batch; ++b) std::copy_n(x->v.data(), n, out->v.data() + b * n);
    return out;
}

// Concatenate two (B,T,D) tensors along the token axis.
template <class T>
Ptr<T> concat_tokens(const Ptr<T>& a, const Ptr<T>& b) {
    detail::check(a->rank() == 3 && b->rank() == 3, "concat_tokens: rank-3 required");
    detail::check(a->shape[0] == b->shape[0] && a->shape[2] == b->shape[2],
                  "concat_tokens: batch/feature mismatch");
    const std::size_t nb = a->shape[0], ta = a->shape[1], tb = b->shape[1], d = a->shape[2];
    auto out = make_op<T>(
        {nb, ta + tb, d}, {a, b}, [a, b, nb, ta, tb, d](Tensor<T>& self) {
            const std::size_t tt = ta + tb;
            for (std::size_t bi = 0; bi < nb; ++bi) {
                if (a->requires_grad)
                    for (std::size_t i = 0; i < ta * d; ++i)
                        a->g[bi * ta * d + i] += self.g[bi * tt * d + i];
                if (b->requires_grad)
                    for (std::size_t i = 0; i < tb * d; ++i)
                        b->g[bi * tb * d + i] += self.g[bi * tt * d + ta * d + i];
            }
        });
    const std::size_t tt = ta + tb;
    for (std::size_t bi = 0; bi < nb; ++bi) {
        std::copy_n(a->v.data() + bi * ta * d, ta * d, out->v.data() + bi * tt * d);
        std::copy_n(b->v.data() + bi * tb * d, tb * d, out->v.data() + bi * tt * d + ta * d);
    }
    return out;
}

// Token-axis slice [from, to) of a (B,T,D) tensor.
template <class T>
Ptr<T> slice_tokens(const Ptr<T>& x, std::size_t from, std::size_t to) {
    detail::check(x->rank() == 3, "slice_tokens: rank-3 required");
    detail::check(from < to && to <= x->shape[1], "slice_tokens: bad range");
    const std::size_t nb = x->shape[0], t = x->shape[1], d = x->shape[2];
    const std::size_t span = to - from;
    auto out = make_op<T>(
        {nb, span, d}, {x}, [x, nb, t, d, from, span](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t bi = 0; bi < nb; ++bi)
                for (std::size_t i = 0; i < span * d; ++i)
                    x->g[(bi * t + from) * d + i] += self.g[bi * span * d + i];
        });
    for (std::size_t bi = 0; bi < nb; ++bi)
        std::copy_n(x->v.data() + (bi * t + from) * d, span * d, out->v.data() + bi * span * d);
    return out;
}

// Row slice [from, to) of a rank-2 tensor.
template <class T>
Ptr<T> slice_rows(const Ptr<T>& x, std::size_t from, std::size_t to) {
    detail::check(x->rank() == 2, "slice_rows: rank-2 required");
    detail::check(from < to && to <= x->shape[0], "slice_rows: bad range");
    const std::size_t d = x->shape[1];
    const std::size_t span = to - from;
    auto out = make_op<T>(
        {span, d}, {x}, [x, d, from, span](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t i = 0; i < span * d; ++i) x->g[from * d + i] += self.g[i];
        });
    std::copy_n(x->v.data() + from * d, span * d, out->v.data());
    return out;
}

// (B,T,D) -> (B*H, T, D/H): head h of sample b lands at slice b*H + h.
template <class T>
Ptr<T> split_heads(const Ptr<T>& x, std::size_t heads) {
    detail::check(x->rank() == 3, "split_heads: rank-3 required");
    detail::check(x->shape[2] % heads == 0, "split_heads: dim not divisible by heads");
    const std::size_t nb = x->shape[0], t = x->shape[1], d = x->shape[2];
    const std::size_t dk = d / heads;
    auto out = make_op<T>(
        {nb * heads, t, dk}, {x}, [x, nb, t, d, dk, heads](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t b = 0; b < nb; ++b)
                for (std::size_t h = 0; h < heads; ++h)
                    for (std::size_t i = 0; i < t; ++i)
                        for (std::size_t c = 0; c < dk; ++c)
                            x->g[(b * t + i) * d + h * dk + c] +=
                                self.g[((b * heads + h) * t + i) * dk + c];
        });
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t i = 0; i < t; ++i)
                std::copy_n(x->v.data() + (b * t + i) * d + h * dk, dk,
                            out->v.data() + ((b * heads + h) * t + i) * dk);
    return out;
}

// Inverse of split_heads.
template <class T>
Ptr<T> merge_heads(const Ptr<T>& x, std::size_t heads) {
    detail::check(x->rank() == 3, "merge_heads: rank-3 required");
    detail::check(x->shape[0] % heads == 0, "merge_heads: batch not divisible by heads");
    const std::size_t nb = x->shape[0] / heads, t = x->shape[1], dk = x->shape[2];
    const std::size_t d = dk * heads;
    auto out = make_op<T>(
        {nb, t, d}, {x}, [x, nb, t, d, dk, heads](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t b = 0; b < nb; ++b)
                for (std::size_t h = 0; h < heads; ++h)
                    for (std::size_t i = 0; i < t; ++i)
                        for (std::size_t c = 0; c < dk; ++c)
                            x->g[((b * heads + h) * t + i) * dk + c] +=
                                self.g[(b * t + i) * d + h * dk + c];
        });
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t i = 0; i < t; ++i)
                std::copy_n(x->v.data() + ((b * heads + h) * t + i) * dk, dk,
                            out->v.data() + (b * t + i) * d + h * dk);
    return out;
}

// (B,C,L) <-> (B,L,C)
template <class T>
Ptr<T> transpose_last2(const Ptr<T>& x) {
    detail::check(x->rank() == 3, "transpose_last2: rank-3 required");
    const std::size_t nb = x->shape[0], r = x->shape[1], c = x->shape[2];
    auto out = make_op<T>(
        {nb, c, r}, {x}, [x, nb, r, c](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t b = 0; b < nb; ++b)
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        x->g[(b * r + i) * c + j] += self.g[(b * c + j) * r + i];
        });
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                out->v[(b * c + j) * r + i] = x->v[(b * r + i) * c + j];
    return out;
}

// Inverted dropout; identity when rate == 0.
template <class T>
Ptr<T> dropout(const Ptr<T>& x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw InvalidArgument("dropout: rate must be < 1");
    auto mask = std::make_shared<std::vector<T>>(x->size());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (auto& m : *mask) m = rng.uniform() >= rate ? keep_scale : T(0);
    auto out = make_op<T>(
        x->shape, {x}, [x, mask](Tensor<T>& self) {
            if (!x->requires_grad) return;
            for (std::size_t i = 0; i < self.size(); ++i) x->g[i] += self.g[i] * (*mask)[i];
        });
    for (std::size_t i = 0; i < out->size(); ++i) out->v[i] = x->v[i] * (*mask)[i];
    return out;
}

// ---------------------------------------------------------------------------
// losses

template <class T>
Ptr<T> mse_loss(const Ptr<T>& pred, const Ptr<T>& target) {
    detail::check(pred->shape == target->shape, "mse_loss: shape mismatch");
    const std::size_t n = pred->size();
    const T invn = T(1) / static_cast<T>(n);
    auto out = make_op<T>(
        {1}, {pred, target}, [pred, target, invn](Tensor<T>& self) {
            const T s = self.g[0] * T(2) * invn;
            for (std::size_t i = 0; i < pred->size(); ++i) {
                const T diff = pred->v[i] - target->v[i];
                if (pred->requires_grad) pred->g[i] += s * diff;
                if (target->requires_grad) target->g[i] -= s * diff;
            }
        });
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T diff = pred->v[i] - target->v[i];
        acc += diff * diff;
    }
    out->v[0] = acc * invn;
    return out;
}

// Mean softmax cross entropy over rows of (N,C) logits.
template <class T>
Ptr<T> cross_entropy(const Ptr<T>& logits, const std::vector<int>& labels) {
    detail::check(logits->rank() == 2, "cross_entropy: rank-2 logits required");
    const std::size_t n = logits->shape[0], c = logits->shape[1];
    detail::check(labels.size() == n, "cross_entropy: label count mismatch");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= c)
            throw InvalidArgument("cross_entropy: label out of range");

    auto probs = std::make_shared<std::vector<T>>(n * c);
    auto lab = std::make_shared<std::vector<int>>(labels);
    auto out = make_op<T>(
        {1}, {logits}, [logits, probs, lab, n, c](Tensor<T>& self) {
            if (!logits->requires_grad) return;
            const T s = self.g[0] / static_cast<T>(n);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t k = 0; k < c; ++k) {
                    T p = (*probs)[r * c + k];
                    if (static_cast<std::size_t>((*lab)[r]) == k) p -= T(1);
                    logits->g[r * c + k] += s * p;
                }
        });
    T loss = T(0);
    for (std::size_t r = 0; r < n; ++r) {
        const T* z = logits->v.data() + r * c;
        T mx = z[0];
        for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, z[k]);
        T sum = T(0);
        for (std::size_t k = 0; k < c; ++k) sum += std::exp(z[k] - mx);
        const T lse = mx + std::log(sum);
        for (std::size_t k = 0; k < c; ++k) (*probs)[r * c + k] = std::exp(z[k] - lse);
        loss += lse - z[static_cast<std::size_t>(labels[r])];
    }
    out->v[0] = loss / static_cast<T>(n);
    return out;
}

}  // namespace rfml::nn
