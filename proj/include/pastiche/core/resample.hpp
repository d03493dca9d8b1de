#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "pastiche/core/tensor.hpp"

namespace pastiche {

// Bilinear resize of a rank-4 [N,C,H,W] tensor using half-pixel sample
// centers. Used for data-path resizing only; no gradient flows through it.
inline Tensor resize_bilinear(const Tensor& x, int64_t out_h, int64_t out_w) {
    if (x.ndim() != 4) throw ShapeError("resize_bilinear expects a rank-4 tensor");
    if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear: output dims must be positive");
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H == out_h && W == out_w) return x;
    Tensor out({N, C, out_h, out_w});
    const double sh = static_cast<double>(H) / static_cast<double>(out_h);
    const double sw = static_cast<double>(W) / static_cast<double>(out_w);
    for (int64_t oh = 0; oh < out_h; ++oh) {
        double fy = (static_cast<double>(oh) + 0.5) * sh - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(H - 1));
        const int64_t y0 = static_cast<int64_t>(fy);
        const int64_t y1 = std::min(y0 + 1, H - 1);
        const double wy = fy - static_cast<double>(y0);
        for (int64_t ow = 0; ow < out_w; ++ow) {
            double fx = (static_cast<double>(ow) + 0.5) * sw - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(W - 1));
            const int64_t x0 = static_cast<int64_t>(fx);
            const int64_t x1 = std::min(x0 + 1, W - 1);
            const double wx = fx - static_cast<double>(x0);
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double top = (1.0 - wx) * x(n, c, y0, x0) + wx * x(n, c, y0, x1);
                    const double bot = (1.0 - wx) * x(n, c, y1, x0) + wx * x(n, c, y1, x1);
                    out(n, c, oh, ow) = (1.0 - wy) * top + wy * bot;
                }
        }
    }
    return out;
}

} // namespace pastiche
