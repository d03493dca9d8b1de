#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pastiche/core/autodiff.hpp"
#include "pastiche/core/errors.hpp"
#include "pastiche/core/tensor.hpp"

namespace pastiche::ops {

using ad::Var;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

struct PadSpec {
    int64_t top = 0, bottom = 0, left = 0, right = 0;
    bool empty() const { return top == 0 && bottom == 0 && left == 0 && right == 0; }
};

// Mirror-reflection index fold (no edge duplication), generalized so any
// pad amount is valid; a singleton axis clamps to its only element.
inline int64_t reflect_index(int64_t i, int64_t n) {
    if (n == 1) return 0;
    const int64_t period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

// Output extent of a stride-s convolution with "same" padding.
inline int64_t same_out_dim(int64_t in, int64_t stride) {
    return (in + stride - 1) / stride;
}

// Padding that makes a k x k stride-s convolution produce ceil(in/s)
// outputs; the extra pixel of an odd total goes to the trailing side.
inline void same_pad_amounts(int64_t in, int64_t k, int64_t s, int64_t& begin, int64_t& end) {
    const int64_t out = same_out_dim(in, s);
    const int64_t total = std::max<int64_t>((out - 1) * s + k - in, 0);
    begin = total / 2;
    end = total - begin;
}

inline PadSpec same_pad(int64_t h, int64_t w, int64_t k, int64_t s) {
    PadSpec p;
    same_pad_amounts(h, k, s, p.top, p.bottom);
    same_pad_amounts(w, k, s, p.left, p.right);
    return p;
}

inline Var reflect_pad(const Var& x, PadSpec p) {
    if (x->value.ndim() != 4) throw ShapeError("reflect_pad expects a rank-4 tensor");
    if (p.empty()) return x;
    const Tensor& xv = x->value;
    const int64_t N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const int64_t OH = H + p.top + p.bottom, OW = W + p.left + p.right;
    Tensor out({N, C, OH, OW});
    std::vector<int64_t> src_h(static_cast<size_t>(OH)), src_w(static_cast<size_t>(OW));
    for (int64_t i = 0; i < OH; ++i) src_h[static_cast<size_t>(i)] = reflect_index(i - p.top, H);
    for (int64_t j = 0; j < OW; ++j) src_w[static_cast<size_t>(j)] = reflect_index(j - p.left, W);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < OH; ++i) {
                const int64_t sh = src_h[static_cast<size_t>(i)];
                for (int64_t j = 0; j < OW; ++j)
                    out(n, c, i, j) = xv(n, c, sh, src_w[static_cast<size_t>(j)]);
            }
    return ad::make_result(std::move(out), {x}, [p, src_h, src_w](ad::Node& node) {
        const Tensor& g = node.grad;
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const int64_t N = xg.dim(0), C = xg.dim(1);
        const int64_t OH = g.dim(2), OW = g.dim(3);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c)
                for (int64_t i = 0; i < OH; ++i) {
                    const int64_t sh = src_h[static_cast<size_t>(i)];
                    for (int64_t j = 0; j < OW; ++j)
                        xg(n, c, sh, src_w[static_cast<size_t>(j)]) += g(n, c, i, j);
                }
    });
}

namespace detail {

// Column-matrix construction for output rows [oh0, oh0+oh_count); keeping a
// row window bounds the scratch memory for large images.
inline void im2col(const Tensor& x, int64_t n, int64_t k, int64_t s, int64_t oh0,
                   int64_t oh_count, int64_t ow_count, RowMat& col) {
    const int64_t CI = x.dim(1);
    for (int64_t ci = 0; ci < CI; ++ci)
        for (int64_t kh = 0; kh < k; ++kh)
            for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t row = (ci * k + kh) * k + kw;
                double* dst = col.data() + row * oh_count * ow_count;
                for (int64_t oh = oh0; oh < oh0 + oh_count; ++oh) {
                    const double* src = &x(n, ci, oh * s + kh, kw);
                    if (s == 1) {
                        std::copy(src, src + ow_count, dst);
                        dst += ow_count;
                    } else {
                        for (int64_t ow = 0; ow < ow_count; ++ow) *dst++ = src[ow * s];
                    }
                }
            }
}

inline void col2im_add(Tensor& xg, int64_t n, int64_t k, int64_t s, int64_t oh0,
                       int64_t oh_count, int64_t ow_count, const RowMat& dcol) {
    const int64_t CI = xg.dim(1);
    for (int64_t ci = 0; ci < CI; ++ci)
        for (int64_t kh = 0; kh < k; ++kh)
            for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t row = (ci * k + kh) * k + kw;
                const double* src = dcol.data() + row * oh_count * ow_count;
                for (int64_t oh = oh0; oh < oh0 + oh_count; ++oh) {
                    double* dst = &xg(n, ci, oh * s + kh, kw);
                    if (s == 1) {
                        for (int64_t ow = 0; ow < ow_count; ++ow) dst[ow] += *src++;
                    } else {
                        for (int64_t ow = 0; ow < ow_count; ++ow) dst[ow * s] += *src++;
                    }
                }
            }
}

// Output-row window that keeps the column matrix within a fixed budget.
inline int64_t conv_row_chunk(int64_t ci_kk, int64_t oh, int64_t ow) {
    constexpr int64_t kColBudgetDoubles = 8 * 1024 * 1024; // 64 MB scratch
    const int64_t rows = std::max<int64_t>(1, kColBudgetDoubles / std::max<int64_t>(1, ci_kk * ow));
    return std::min(oh, rows);
}

} // namespace detail

// Valid (unpadded) 2-d cross-correlation. x: [N,CI,H,W], w: [CO,CI,K,K],
// b: [CO]. Computed per sample as a GEMM against the im2col matrix; the
// backward pass rebuilds the column matrix instead of caching it.
inline Var conv2d_valid(const Var& x, const Var& w, const Var& b, int64_t stride) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (xv.ndim() != 4 || wv.ndim() != 4) throw ShapeError("conv2d expects rank-4 input and kernel");
    const int64_t N = xv.dim(0), CI = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const int64_t CO = wv.dim(0), K = wv.dim(2);
    if (wv.dim(1) != CI) throw ShapeError("conv2d: kernel input channels mismatch");
    if (wv.dim(3) != K) throw ShapeError("conv2d: only square kernels supported");
    if (b->value.numel() != CO) throw ShapeError("conv2d: bias size mismatch");
    if (H < K || W < K)
        throw DimensionError("conv2d: input " + xv.shape_str() + " smaller than kernel");
    const int64_t OH = (H - K) / stride + 1, OW = (W - K) / stride + 1;

    Tensor out({N, CO, OH, OW});
    {
        const int64_t chunk = detail::conv_row_chunk(CI * K * K, OH, OW);
        CMapRM wmat(wv.data(), CO, CI * K * K);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t oh0 = 0; oh0 < OH; oh0 += chunk) {
                const int64_t rows = std::min(chunk, OH - oh0);
                RowMat col(CI * K * K, rows * OW);
                detail::im2col(xv, n, K, stride, oh0, rows, OW, col);
                Eigen::Map<RowMat, 0, Eigen::OuterStride<>> omat(
                    out.data() + (n * CO * OH + oh0) * OW, CO, rows * OW,
                    Eigen::OuterStride<>(OH * OW));
                omat.noalias() = wmat * col;
                for (int64_t co = 0; co < CO; ++co) omat.row(co).array() += b->value.at(co);
            }
    }

    return ad::make_result(std::move(out), {x, w, b}, [stride, K](ad::Node& node) {
        const Tensor& g = node.grad;
        auto& xp = *node.parents[0];
        auto& wp = *node.parents[1];
        auto& bp = *node.parents[2];
        const Tensor& xv = xp.value;
        const Tensor& wv = wp.value;
        const int64_t N = xv.dim(0), CI = xv.dim(1);
        const int64_t CO = wv.dim(0);
        const int64_t OH = g.dim(2), OW = g.dim(3);
        CMapRM wmat(wv.data(), CO, CI * K * K);
        const int64_t chunk = detail::conv_row_chunk(CI * K * K, OH, OW);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t oh0 = 0; oh0 < OH; oh0 += chunk) {
                const int64_t rows = std::min(chunk, OH - oh0);
                Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> gmat(
                    g.data() + (n * CO * OH + oh0) * OW, CO, rows * OW,
                    Eigen::OuterStride<>(OH * OW));
                if (wp.requires_grad) {
                    RowMat col(CI * K * K, rows * OW);
                    detail::im2col(xv, n, K, stride, oh0, rows, OW, col);
                    MapRM wg(wp.ensure_grad().data(), CO, CI * K * K);
                    wg.noalias() += gmat * col.transpose();
                }
                if (bp.requires_grad) {
                    Tensor& bg = bp.ensure_grad();
                    for (int64_t co = 0; co < CO; ++co) bg.at(co) += gmat.row(co).sum();
                }
                if (xp.requires_grad) {
                    RowMat dcol(CI * K * K, rows * OW);
                    dcol.noalias() = wmat.transpose() * gmat;
                    detail::col2im_add(xp.ensure_grad(), n, K, stride, oh0, rows, OW, dcol);
                }
            }
    });
}

// Reflection-padded "same" convolution: output spatial dims are
// ceil(in/stride).
inline Var conv2d_same(const Var& x, const Var& w, const Var& b, int64_t stride) {
    const int64_t K = w->value.dim(2);
    PadSpec p = same_pad(x->value.dim(2), x->value.dim(3), K, stride);
    return conv2d_valid(reflect_pad(x, p), w, b, stride);
}

// Per-sample per-channel normalization over the spatial extent (population
// variance), no affine part; see channel_affine for the learnable scale
// and shift.
inline Var instance_norm(const Var& x, double eps) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 4) throw ShapeError("instance_norm expects a rank-4 tensor");
    const int64_t N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
    Tensor out(xv.shape());
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* src = xv.data() + (n * C + c) * HW;
            double* dst = out.data() + (n * C + c) * HW;
            double mean = 0.0;
            for (int64_t i = 0; i < HW; ++i) mean += src[i];
            mean /= static_cast<double>(HW);
            double var = 0.0;
            for (int64_t i = 0; i < HW; ++i) {
                const double d = src[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(HW);
            const double inv = 1.0 / std::sqrt(var + eps);
            for (int64_t i = 0; i < HW; ++i) dst[i] = (src[i] - mean) * inv;
        }
    return ad::make_result(std::move(out), {x}, [eps](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        const Tensor& xv = xp.value;
        const Tensor& g = node.grad;
        Tensor& xg = xp.ensure_grad();
        const int64_t N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
        const double inv_hw = 1.0 / static_cast<double>(HW);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
                const int64_t base = (n * C + c) * HW;
                const double* src = xv.data() + base;
                const double* gp = g.data() + base;
                double* dst = xg.data() + base;
                double mean = 0.0;
                for (int64_t i = 0; i < HW; ++i) mean += src[i];
                mean *= inv_hw;
                double var = 0.0;
                for (int64_t i = 0; i < HW; ++i) {
                    const double d = src[i] - mean;
                    var += d * d;
                }
                var *= inv_hw;
                const double inv = 1.0 / std::sqrt(var + eps);
                double g_mean = 0.0, gx_mean = 0.0;
                for (int64_t i = 0; i < HW; ++i) {
                    const double xh = (src[i] - mean) * inv;
                    g_mean += gp[i];
                    gx_mean += gp[i] * xh;
                }
                g_mean *= inv_hw;
                gx_mean *= inv_hw;
                for (int64_t i = 0; i < HW; ++i) {
                    const double xh = (src[i] - mean) * inv;
                    dst[i] += inv * (gp[i] - g_mean - xh * gx_mean);
                }
            }
    });
}

// y[n,c,h,w] = gamma[c] * x[n,c,h,w] + beta[c]
inline Var channel_affine(const Var& x, const Var& gamma, const Var& beta) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 4) throw ShapeError("channel_affine expects a rank-4 tensor");
    const int64_t N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
    if (gamma->value.numel() != C || beta->value.numel() != C)
        throw ShapeError("channel_affine: parameter size mismatch");
    Tensor out(xv.shape());
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double gsc = gamma->value.at(c), bsc = beta->value.at(c);
            const double* src = xv.data() + (n * C + c) * HW;
            double* dst = out.data() + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) dst[i] = gsc * src[i] + bsc;
        }
    return ad::make_result(std::move(out), {x, gamma, beta}, [](ad::Node& node) {
        auto& xp = *node.parents[0];
        auto& gp = *node.parents[1];
        auto& bp = *node.parents[2];
        const Tensor& g = node.grad;
        const Tensor& xv = xp.value;
        const int64_t N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
                const int64_t base = (n * C + c) * HW;
                const double* gr = g.data() + base;
                if (xp.requires_grad) {
                    const double gsc = gp.value.at(c);
                    double* dst = xp.ensure_grad().data() + base;
                    for (int64_t i = 0; i < HW; ++i) dst[i] += gsc * gr[i];
                }
                if (gp.requires_grad) {
                    const double* src = xv.data() + base;
                    double s = 0.0;
                    for (int64_t i = 0; i < HW; ++i) s += gr[i] * src[i];
                    gp.ensure_grad().at(c) += s;
                }
                if (bp.requires_grad) {
                    double s = 0.0;
                    for (int64_t i = 0; i < HW; ++i) s += gr[i];
                    bp.ensure_grad().at(c) += s;
                }
            }
    });
}

inline Var leaky_relu(const Var& x, double slope) {
    Tensor out(x->value.shape());
    const int64_t n = x->value.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double v = x->value.at(i);
        out.at(i) = v > 0.0 ? v : slope * v;
    }
    return ad::make_result(std::move(out), {x}, [slope](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const int64_t n = node.grad.numel();
        for (int64_t i = 0; i < n; ++i)
            xg.at(i) += node.grad.at(i) * (xp.value.at(i) > 0.0 ? 1.0 : slope);
    });
}

inline Var relu(const Var& x) { return leaky_relu(x, 0.0); }

inline Var sigmoid(const Var& x) {
    Tensor out(x->value.shape());
    const int64_t n = x->value.numel();
    for (int64_t i = 0; i < n; ++i) out.at(i) = 1.0 / (1.0 + std::exp(-x->value.at(i)));
    return ad::make_result(std::move(out), {x}, [](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const int64_t n = node.grad.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double y = node.value.at(i);
            xg.at(i) += node.grad.at(i) * y * (1.0 - y);
        }
    });
}

inline Var upsample_nearest_2x(const Var& x) {
    const Tensor& xv = x->value;
    if (xv.ndim() != 4) throw ShapeError("upsample expects a rank-4 tensor");
    const int64_t N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    Tensor out({N, C, 2 * H, 2 * W});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w) {
                    const double v = xv(n, c, h, w);
                    out(n, c, 2 * h, 2 * w) = v;
                    out(n, c, 2 * h, 2 * w + 1) = v;
                    out(n, c, 2 * h + 1, 2 * w) = v;
                    out(n, c, 2 * h + 1, 2 * w + 1) = v;
                }
    return ad::make_result(std::move(out), {x}, [](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const Tensor& g = node.grad;
        const int64_t N = xg.dim(0), C = xg.dim(1), H = xg.dim(2), W = xg.dim(3);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c)
                for (int64_t h = 0; h < H; ++h)
                    for (int64_t w = 0; w < W; ++w)
                        xg(n, c, h, w) += g(n, c, 2 * h, 2 * w) + g(n, c, 2 * h, 2 * w + 1) +
                                          g(n, c, 2 * h + 1, 2 * w) + g(n, c, 2 * h + 1, 2 * w + 1);
    });
}

inline Var add(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "add");
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.at(i) = a->value.at(i) + b->value.at(i);
    return ad::make_result(std::move(out), {a, b}, [](ad::Node& node) {
        for (int k = 0; k < 2; ++k) {
            auto& p = *node.parents[static_cast<size_t>(k)];
            if (!p.requires_grad) continue;
            Tensor& pg = p.ensure_grad();
            const int64_t n = node.grad.numel();
            for (int64_t i = 0; i < n; ++i) pg.at(i) += node.grad.at(i);
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "sub");
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.at(i) = a->value.at(i) - b->value.at(i);
    return ad::make_result(std::move(out), {a, b}, [](ad::Node& node) {
        const int64_t n = node.grad.numel();
        auto& ap = *node.parents[0];
        if (ap.requires_grad) {
            Tensor& pg = ap.ensure_grad();
            for (int64_t i = 0; i < n; ++i) pg.at(i) += node.grad.at(i);
        }
        auto& bp = *node.parents[1];
        if (bp.requires_grad) {
            Tensor& pg = bp.ensure_grad();
            for (int64_t i = 0; i < n; ++i) pg.at(i) -= node.grad.at(i);
        }
    });
}

inline Var scale(const Var& x, double c) {
    Tensor out(x->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.at(i) = c * x->value.at(i);
    return ad::make_result(std::move(out), {x}, [c](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const int64_t n = node.grad.numel();
        for (int64_t i = 0; i < n; ++i) xg.at(i) += c * node.grad.at(i);
    });
}

inline Var square(const Var& x) {
    Tensor out(x->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.at(i) = x->value.at(i) * x->value.at(i);
    return ad::make_result(std::move(out), {x}, [](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const int64_t n = node.grad.numel();
        for (int64_t i = 0; i < n; ++i) xg.at(i) += 2.0 * xp.value.at(i) * node.grad.at(i);
    });
}

inline Var sum_all(const Var& x) {
    Tensor out = Tensor::scalar(x->value.sum());
    return ad::make_result(std::move(out), {x}, [](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const double g = node.grad.at(0);
        const int64_t n = xg.numel();
        for (int64_t i = 0; i < n; ++i) xg.at(i) += g;
    });
}

inline Var mean_all(const Var& x) {
    return scale(sum_all(x), 1.0 / static_cast<double>(x->value.numel()));
}

// log(max(x, floor)); the derivative vanishes in the clamped region.
inline Var log_floor(const Var& x, double floor) {
    Tensor out(x->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.at(i) = std::log(std::max(x->value.at(i), floor));
    return ad::make_result(std::move(out), {x}, [floor](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const int64_t n = node.grad.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double v = xp.value.at(i);
            if (v > floor) xg.at(i) += node.grad.at(i) / v;
        }
    });
}

inline Var one_minus(const Var& x) {
    Tensor out(x->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.at(i) = 1.0 - x->value.at(i);
    return ad::make_result(std::move(out), {x}, [](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const int64_t n = node.grad.numel();
        for (int64_t i = 0; i < n; ++i) xg.at(i) -= node.grad.at(i);
    });
}

inline Var reshape(const Var& x, std::vector<int64_t> shape) {
    Tensor out(std::move(shape), x->value.vec());
    return ad::make_result(std::move(out), {x}, [](ad::Node& node) {
        auto& xp = *node.parents[0];
        if (!xp.requires_grad) return;
        Tensor& xg = xp.ensure_grad();
        const int64_t n = node.grad.numel();
        for (int64_t i = 0; i < n; ++i) xg.at(i) += node.grad.at(i);
    });
}

// x: [N,Fin], w: [Fout,Fin], b: [Fout] -> [N,Fout]
inline Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (xv.ndim() != 2 || wv.ndim() != 2) throw ShapeError("linear expects rank-2 tensors");
    const int64_t N = xv.dim(0), FI = xv.dim(1), FO = wv.dim(0);
    if (wv.dim(1) != FI || b->value.numel() != FO) throw ShapeError("linear: size mismatch");
    Tensor out({N, FO});
    {
        CMapRM xm(xv.data(), N, FI), wm(wv.data(), FO, FI);
        MapRM om(out.data(), N, FO);
        om.noalias() = xm * wm.transpose();
        for (int64_t i = 0; i < N; ++i)
            for (int64_t j = 0; j < FO; ++j) out(i, j) += b->value.at(j);
    }
    return ad::make_result(std::move(out), {x, w, b}, [](ad::Node& node) {
        auto& xp = *node.parents[0];
        auto& wp = *node.parents[1];
        auto& bp = *node.parents[2];
        const Tensor& g = node.grad;
        const int64_t N = g.dim(0), FO = g.dim(1), FI = xp.value.dim(1);
        CMapRM gm(g.data(), N, FO), xm(xp.value.data(), N, FI), wm(wp.value.data(), FO, FI);
        if (xp.requires_grad) {
            MapRM xg(xp.ensure_grad().data(), N, FI);
            xg.noalias() += gm * wm;
        }
        if (wp.requires_grad) {
            MapRM wg(wp.ensure_grad().data(), FO, FI);
            wg.noalias() += gm.transpose() * xm;
        }
        if (bp.requires_grad) {
            Tensor& bg = bp.ensure_grad();
            for (int64_t j = 0; j < FO; ++j) bg.at(j) += gm.col(j).sum();
        }
    });
}

// Mean over the batch of -log softmax(logits)[label].
inline Var softmax_cross_entropy(const Var& logits, std::vector<int64_t> labels) {
    const Tensor& lv = logits->value;
    if (lv.ndim() != 2) throw ShapeError("softmax_cross_entropy expects rank-2 logits");
    const int64_t N = lv.dim(0), K = lv.dim(1);
    if (static_cast<int64_t>(labels.size()) != N)
        throw ShapeError("softmax_cross_entropy: label count mismatch");
    for (int64_t y : labels)
        if (y < 0 || y >= K) throw ValueError("softmax_cross_entropy: label out of range");
    double loss = 0.0;
    std::vector<double> lse(static_cast<size_t>(N));
    for (int64_t i = 0; i < N; ++i) {
        double m = lv(i, 0);
        for (int64_t k = 1; k < K; ++k) m = std::max(m, lv(i, k));
        double s = 0.0;
        for (int64_t k = 0; k < K; ++k) s += std::exp(lv(i, k) - m);
        lse[static_cast<size_t>(i)] = m + std::log(s);
        loss += lse[static_cast<size_t>(i)] - lv(i, labels[static_cast<size_t>(i)]);
    }
    Tensor out = Tensor::scalar(loss / static_cast<double>(N));
    return ad::make_result(std::move(out), {logits},
                           [labels = std::move(labels), lse = std::move(lse)](ad::Node& node) {
                               auto& lp = *node.parents[0];
                               if (!lp.requires_grad) return;
                               Tensor& lg = lp.ensure_grad();
                               const Tensor& lv = lp.value;
                               const int64_t N = lv.dim(0), K = lv.dim(1);
                               const double g = node.grad.at(0) / static_cast<double>(N);
                               for (int64_t i = 0; i < N; ++i) {
                                   for (int64_t k = 0; k < K; ++k) {
                                       double p = std::exp(lv(i, k) - lse[static_cast<size_t>(i)]);
                                       if (k == labels[static_cast<size_t>(i)]) p -= 1.0;
                                       lg(i, k) += g * p;
                                   }
                               }
                           });
}

// v / ||v||_F over the whole tensor.
inline Var unit_normalize(const Var& v) {
    const double norm = std::sqrt(v->value.squared_norm());
    if (!(norm > 0.0)) throw ValueError("unit_normalize: zero tensor");
    Tensor out(v->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.at(i) = v->value.at(i) / norm;
    return ad::make_result(std::move(out), {v}, [norm](ad::Node& node) {
        auto& vp = *node.parents[0];
        if (!vp.requires_grad) return;
        Tensor& vg = vp.ensure_grad();
        const int64_t n = node.grad.numel();
        double dot = 0.0;
        for (int64_t i = 0; i < n; ++i) dot += node.value.at(i) * node.grad.at(i);
        for (int64_t i = 0; i < n; ++i)
            vg.at(i) += (node.grad.at(i) - node.value.at(i) * dot) / norm;
    });
}

} // namespace pastiche::ops
