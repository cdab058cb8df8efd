#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

#include "mcdnet/profiler.hpp"
#include "mcdnet/tensor.hpp"

namespace mcdnet {

struct Conv2dOptions {
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t dilation = 1;
    std::size_t groups = 1;
};

inline std::size_t conv_output_extent(std::size_t in, std::size_t kernel, const Conv2dOptions& o) {
    const std::ptrdiff_t span = static_cast<std::ptrdiff_t>(o.dilation * (kernel - 1) + 1);
    const std::ptrdiff_t padded = static_cast<std::ptrdiff_t>(in + 2 * o.padding);
    if (span > padded)
        throw ShapeError("conv2d: kernel extent " + std::to_string(span) + " exceeds padded input " +
                         std::to_string(padded));
    return static_cast<std::size_t>((padded - span) / static_cast<std::ptrdiff_t>(o.stride)) + 1;
}

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
    std::size_t n, cin, h, w, cout, kh, kw, ho, wo, cin_g, cout_g;
    Conv2dOptions opt;

    std::size_t patch() const { return cin_g * kh * kw; }
    std::size_t pixels() const { return ho * wo; }
    bool pointwise() const {
        return kh == 1 && kw == 1 && opt.stride == 1 && opt.padding == 0;
    }
};

// cols[(c*kh + i)*kw + j, oy*wo + ox] = x[c, oy*s - p + i*d, ox*s - p + j*d]
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
    const auto s = static_cast<std::ptrdiff_t>(g.opt.stride);
    const auto p = static_cast<std::ptrdiff_t>(g.opt.padding);
    const auto d = static_cast<std::ptrdiff_t>(g.opt.dilation);
    const auto H = static_cast<std::ptrdiff_t>(g.h), W = static_cast<std::ptrdiff_t>(g.w);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.cin_g; ++c)
        for (std::size_t i = 0; i < g.kh; ++i)
            for (std::size_t j = 0; j < g.kw; ++j, ++row) {
                T* out = cols + row * g.pixels();
                const T* plane = x + c * g.h * g.w;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(i) * d;
                    T* orow = out + oy * g.wo;
                    if (iy < 0 || iy >= H) {
                        std::fill_n(orow, g.wo, T{0});
                        continue;
                    }
                    const T* irow = plane + iy * W;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(j) * d;
                        orow[ox] = (ix < 0 || ix >= W) ? T{0} : irow[ix];
                    }
                }
            }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx) {
    const auto s = static_cast<std::ptrdiff_t>(g.opt.stride);
    const auto p = static_cast<std::ptrdiff_t>(g.opt.padding);
    const auto d = static_cast<std::ptrdiff_t>(g.opt.dilation);
    const auto H = static_cast<std::ptrdiff_t>(g.h), W = static_cast<std::ptrdiff_t>(g.w);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.cin_g; ++c)
        for (std::size_t i = 0; i < g.kh; ++i)
            for (std::size_t j = 0; j < g.kw; ++j, ++row) {
                const T* in = cols + row * g.pixels();
                T* plane = dx + c * g.h * g.w;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s - p + static_cast<std::ptrdiff_t>(i) * d;
                    if (iy < 0 || iy >= H) continue;
                    T* drow = plane + iy * W;
                    const T* crow = in + oy * g.wo;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s - p + static_cast<std::ptrdiff_t>(j) * d;
                        if (ix >= 0 && ix < W) drow[ix] += crow[ox];
                    }
                }
            }
}

}  // namespace detail

/// 2-D cross-correlation over [N,Cin,H,W] with weights [Cout,Cin/groups,kh,kw].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, const Conv2dOptions& opt) {
    if (x.rank() != 4 || w.rank() != 4)
        throw ShapeError("conv2d: expected rank-4 input and weight, got " + to_string(x.shape()) + " and " +
                         to_string(w.shape()));
    if (opt.stride == 0 || opt.dilation == 0 || opt.groups == 0)
        throw ShapeError("conv2d: stride, dilation and groups must be positive");
    detail::ConvGeometry g{};
    g.n = x.dim(0);
    g.cin = x.dim(1);
    g.h = x.dim(2);
    g.w = x.dim(3);
    g.cout = w.dim(0);
    g.kh = w.dim(2);
    g.kw = w.dim(3);
    g.opt = opt;
    if (g.cin % opt.groups != 0 || g.cout % opt.groups != 0)
        throw ShapeError("conv2d: groups " + std::to_string(opt.groups) + " must divide channels " +
                         std::to_string(g.cin) + " -> " + std::to_string(g.cout));
    g.cin_g = g.cin / opt.groups;
    g.cout_g = g.cout / opt.groups;
    if (w.dim(1) != g.cin_g)
        throw ShapeError("conv2d: weight " + to_string(w.shape()) + " incompatible with input " +
                         to_string(x.shape()) + " and groups " + std::to_string(opt.groups));
    if (b && (b->rank() != 1 || b->dim(0) != g.cout)) throw ShapeError("conv2d: bias must be [Cout]");
    g.ho = conv_output_extent(g.h, g.kh, opt);
    g.wo = conv_output_extent(g.w, g.kw, opt);

    using Map = Eigen::Map<detail::RowMatrix<T>>;
    using CMap = Eigen::Map<const detail::RowMatrix<T>>;

    const std::size_t K = g.patch(), P = g.pixels();
    Shape out{g.n, g.cout, g.ho, g.wo};
    std::vector<T> y(numel(out));
    std::vector<T> cols(g.pointwise() ? 0 : K * P);
    const T* xv = x.data().data();
    const T* wv = w.data().data();
    for (std::size_t n = 0; n < g.n; ++n)
        for (std::size_t grp = 0; grp < opt.groups; ++grp) {
            const T* xin = xv + (n * g.cin + grp * g.cin_g) * g.h * g.w;
            const T* colp = xin;
            if (!g.pointwise()) {
                detail::im2col(xin, g, cols.data());
                colp = cols.data();
            }
            Map out_m(y.data() + (n * g.cout + grp * g.cout_g) * P, static_cast<Eigen::Index>(g.cout_g),
                      static_cast<Eigen::Index>(P));
            CMap w_m(wv + grp * g.cout_g * K, static_cast<Eigen::Index>(g.cout_g), static_cast<Eigen::Index>(K));
            CMap c_m(colp, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
            out_m.noalias() = w_m * c_m;
            if (b)
                for (std::size_t o = 0; o < g.cout_g; ++o) out_m.row(static_cast<Eigen::Index>(o)).array() += b->data()[grp * g.cout_g + o];
        }
    detail::record_op("conv2d", CostKind::conv, out,
                      static_cast<std::uint64_t>(g.n) * P * g.cout * K);

    std::vector<Tensor<T>> inputs{x, w};
    if (b) inputs.push_back(*b);
    return detail::make_result<T>(out, std::move(y), "conv2d", std::move(inputs), [g](Node<T>& self) {
        auto& X = *self.inputs[0];
        auto& Wt = *self.inputs[1];
        const std::size_t K = g.patch(), P = g.pixels();
        std::vector<T> cols(g.pointwise() ? 0 : K * P);
        std::vector<T> dcols(X.requires_grad && !g.pointwise() ? K * P : 0);
        T* dx = X.requires_grad ? X.ensure_grad().data() : nullptr;
        T* dw = Wt.requires_grad ? Wt.ensure_grad().data() : nullptr;
        for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t grp = 0; grp < g.opt.groups; ++grp) {
                const std::size_t in_off = (n * g.cin + grp * g.cin_g) * g.h * g.w;
                CMap gy(self.grad.data() + (n * g.cout + grp * g.cout_g) * P, static_cast<Eigen::Index>(g.cout_g),
                        static_cast<Eigen::Index>(P));
                if (dw) {
                    const T* colp = X.data.data() + in_off;
                    if (!g.pointwise()) {
                        detail::im2col(colp, g, cols.data());
                        colp = cols.data();
                    }
                    CMap c_m(colp, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
                    Map dw_m(dw + grp * g.cout_g * K, static_cast<Eigen::Index>(g.cout_g), static_cast<Eigen::Index>(K));
                    dw_m.noalias() += gy * c_m.transpose();
                }
                if (dx) {
                    CMap w_m(Wt.data.data() + grp * g.cout_g * K, static_cast<Eigen::Index>(g.cout_g),
                             static_cast<Eigen::Index>(K));
                    if (g.pointwise()) {
                        Map dx_m(dx + in_off, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
                        dx_m.noalias() += w_m.transpose() * gy;
                    } else {
                        Map dc(dcols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
                        dc.noalias() = w_m.transpose() * gy;
                        detail::col2im_add(dcols.data(), g, dx + in_off);
                    }
                }
            }
        if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
            auto& db = self.inputs[2]->ensure_grad();
            for (std::size_t n = 0; n < g.n; ++n)
                for (std::size_t o = 0; o < g.cout; ++o) {
                    const T* gp = self.grad.data() + (n * g.cout + o) * P;
                    T s{0};
                    for (std::size_t i = 0; i < P; ++i) s += gp[i];
                    db[o] += s;
                }
        }
    });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Conv2dOptions& opt = {}) {
    return conv2d<T>(x, w, nullptr, opt);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const Conv2dOptions& opt = {}) {
    return conv2d<T>(x, w, &b, opt);
}

}  // namespace mcdnet
