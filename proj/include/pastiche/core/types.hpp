#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "pastiche/core/errors.hpp"
#include "pastiche/core/tensor.hpp"

namespace pastiche {

// Batch of RGB images, values in [0,1], layout [N,3,H,W]. The constructor
// enforces the invariants; everything downstream may assume them.
struct ImageBatch {
    Tensor data;

    ImageBatch() = default;

    explicit ImageBatch(Tensor t) : data(std::move(t)) { validate(); }

    void validate() const {
        if (data.ndim() != 4) throw ShapeError("ImageBatch must be rank 4, got " + data.shape_str());
        if (data.dim(1) != 3) throw ShapeError("ImageBatch must have 3 channels");
        if (data.dim(0) < 1) throw ShapeError("ImageBatch needs at least one sample");
        if (data.dim(2) < 16 || data.dim(3) < 16)
            throw DimensionError("ImageBatch spatial dims must be >= 16, got " + data.shape_str());
        if (!data.all_finite()) throw NonFiniteError("ImageBatch contains non-finite values");
        if (!data.all_in(0.0, 1.0)) throw ValueError("ImageBatch values must lie in [0,1]");
    }

    int64_t n() const { return data.dim(0); }
    int64_t h() const { return data.dim(2); }
    int64_t w() const { return data.dim(3); }
};

// Encoder output, layout [N, ch, H/16, W/16].
struct LatentCode {
    Tensor data;

    LatentCode() = default;

    explicit LatentCode(Tensor t) : data(std::move(t)) {
        if (data.ndim() != 4) throw ShapeError("LatentCode must be rank 4");
        if (!data.all_finite()) throw NonFiniteError("LatentCode contains non-finite values");
    }

    // Element count per sample; the normalizer of the latent content loss.
    int64_t dims_per_sample() const { return data.numel() / data.dim(0); }
};

// Raw (pre-activation) logit maps: one full-depth map plus four
// intermediate-scale maps at 1/2, 1/4, 1/16 and 1/64 of the input extent.
struct DiscriminatorOutput {
    Tensor main;
    std::array<Tensor, 4> aux;

    std::vector<const Tensor*> scales() const {
        return {&main, &aux[0], &aux[1], &aux[2], &aux[3]};
    }
};

} // namespace pastiche
