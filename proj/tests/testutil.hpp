#pragma once

// Shared helpers for the test suites: finite-difference gradient checking,
// an independent brute-force convolution oracle, and synthetic corpora.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pastiche/core/rng.hpp"
#include "pastiche/core/types.hpp"
#include "pastiche/grouping.hpp"
#include "pastiche/nn/layers.hpp"

namespace testutil {

using pastiche::ImageBatch;
using pastiche::Rng;
using pastiche::Tensor;

inline Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t.at(i) = scale * rng.normal();
    return t;
}

inline Tensor random_unit_tensor(std::vector<int64_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t.at(i) = rng.uniform();
    return t;
}

inline ImageBatch random_image(int64_t n, int64_t h, int64_t w, Rng& rng) {
    return ImageBatch(random_unit_tensor({n, 3, h, w}, rng));
}

// Adds noise to every parameter so gradient checks run at a generic point
// rather than at the symmetric freshly-initialized one.
inline void perturb_params(const pastiche::nn::ParamList& params, Rng& rng, double scale = 0.1) {
    for (const auto& [name, p] : params)
        for (int64_t i = 0; i < p->value.numel(); ++i) p->value.at(i) += scale * rng.normal();
}

// ---------------------------------------------------------------------------
// Central finite differences against the analytic gradient on randomly
// sampled parameter coordinates. The error for a coordinate is
// |analytic - fd| / max(|analytic|, |fd|, floor); the floor keeps exact-zero
// gradients (where both sides are numerical noise) from dividing by zero.
struct FdReport {
    double max_rel_err = 0.0;
    int n_checked = 0;
    std::string worst_param;
};

inline FdReport fd_check(const pastiche::nn::ParamList& params,
                         const std::function<pastiche::ad::Var()>& build, int n_coords,
                         uint64_t seed, double step = 1e-5, double floor = 1e-6) {
    pastiche::nn::zero_grads(params);
    pastiche::ad::backward(build());
    auto eval = [&]() {
        pastiche::ad::NoGradGuard ng;
        return pastiche::ad::scalar(build());
    };
    Rng pick(pastiche::Rng::mix(seed));
    FdReport rep;
    for (int k = 0; k < n_coords; ++k) {
        const auto& [name, p] = params[static_cast<size_t>(
            pick.below(static_cast<int64_t>(params.size())))];
        const int64_t ci = pick.below(p->value.numel());
        const double analytic = p->grad.numel() ? p->grad.at(ci) : 0.0;
        const double orig = p->value.at(ci);
        p->value.at(ci) = orig + step;
        const double fp = eval();
        p->value.at(ci) = orig - step;
        const double fm = eval();
        p->value.at(ci) = orig;
        const double fd = (fp - fm) / (2.0 * step);
        const double err =
            std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), floor});
        if (err > rep.max_rel_err) {
            rep.max_rel_err = err;
            rep.worst_param = name;
        }
        ++rep.n_checked;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Brute-force reference convolution, written independently of the library's
// im2col path: direct nested loops, its own mirror fold.
inline int64_t mirror_fold(int64_t i, int64_t n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

inline Tensor reference_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride,
                               int64_t pad_top, int64_t pad_left, int64_t out_h, int64_t out_w) {
    const int64_t N = x.dim(0), CI = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t CO = w.dim(0), K = w.dim(2);
    Tensor out({N, CO, out_h, out_w});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t co = 0; co < CO; ++co)
            for (int64_t oh = 0; oh < out_h; ++oh)
                for (int64_t ow = 0; ow < out_w; ++ow) {
                    double acc = b.at(co);
                    for (int64_t ci = 0; ci < CI; ++ci)
                        for (int64_t kh = 0; kh < K; ++kh)
                            for (int64_t kw = 0; kw < K; ++kw) {
                                const int64_t ih = mirror_fold(oh * stride + kh - pad_top, H);
                                const int64_t iw = mirror_fold(ow * stride + kw - pad_left, W);
                                acc += x(n, ci, ih, iw) * w(co, ci, kh, kw);
                            }
                    out(n, co, oh, ow) = acc;
                }
    return out;
}

// Reference "same" convolution matching the library's padding convention:
// output extent ceil(in/stride), odd padding excess on the trailing side.
inline Tensor reference_conv2d_same(const Tensor& x, const Tensor& w, const Tensor& b,
                                    int64_t stride) {
    const int64_t H = x.dim(2), W = x.dim(3), K = w.dim(2);
    const int64_t oh = (H + stride - 1) / stride, ow = (W + stride - 1) / stride;
    const int64_t pad_h = std::max<int64_t>((oh - 1) * stride + K - H, 0) / 2;
    const int64_t pad_w = std::max<int64_t>((ow - 1) * stride + K - W, 0) / 2;
    return reference_conv2d(x, w, b, stride, pad_h, pad_w, oh, ow);
}

// ---------------------------------------------------------------------------
// Synthetic two-artist corpus: the same underlying images pushed through
// two different channel-emphasis transforms ("hue shifts"). Linearly
// separable by channel statistics, so a small classifier must nail it.
inline ImageBatch apply_synthetic_style(const ImageBatch& img, int artist) {
    Tensor out = img.data;
    const int64_t per = out.dim(2) * out.dim(3);
    for (int64_t n = 0; n < out.dim(0); ++n)
        for (int64_t c = 0; c < 3; ++c) {
            const bool boosted = (artist == 0) ? (c == 0) : (c == 2);
            double* p = out.data() + (n * 3 + c) * per;
            for (int64_t i = 0; i < per; ++i) p[i] = boosted ? 0.5 + 0.5 * p[i] : 0.5 * p[i];
        }
    return ImageBatch(std::move(out));
}

struct SyntheticCorpus {
    pastiche::grouping::LabeledImageSet labeled; // style images with artist labels
    std::vector<ImageBatch> content;             // untransformed base images
};

inline SyntheticCorpus make_synthetic_corpus(int per_artist, int n_content, int64_t size,
                                             uint64_t seed) {
    SyntheticCorpus corpus;
    corpus.labeled.class_names = {"artist_a", "artist_b"};
    Rng rng(pastiche::Rng::mix(seed));
    for (int artist = 0; artist < 2; ++artist)
        for (int i = 0; i < per_artist; ++i) {
            corpus.labeled.images.push_back(
                apply_synthetic_style(random_image(1, size, size, rng), artist));
            corpus.labeled.labels.push_back(artist);
        }
    for (int i = 0; i < n_content; ++i) corpus.content.push_back(random_image(1, size, size, rng));
    return corpus;
}

// Unique scratch directory under the build tree.
inline std::string scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("pastiche_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

} // namespace testutil
