#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pastiche/core/autodiff.hpp"
#include "pastiche/core/ops.hpp"
#include "pastiche/core/rng.hpp"

namespace pastiche::nn {

using ad::Var;

enum class InitScheme { Normal002, HeNormal };

// Named parameter list in a stable construction order; the unit of
// serialization and optimization.
using ParamList = std::vector<std::pair<std::string, Var>>;

inline void init_conv_weight(Tensor& w, InitScheme scheme, Rng& rng) {
    const int64_t n = w.numel();
    if (scheme == InitScheme::HeNormal) {
        const int64_t fan_in = w.dim(1) * w.dim(2) * w.dim(3);
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (int64_t i = 0; i < n; ++i) w.at(i) = std * rng.normal();
    } else {
        for (int64_t i = 0; i < n; ++i) w.at(i) = 0.02 * rng.normal();
    }
}

struct Conv2d {
    Var weight; // [out, in, k, k]
    Var bias;   // [out]
    int64_t kernel = 3;
    int64_t stride = 1;

    static Conv2d create(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
                         InitScheme scheme, Rng& rng) {
        Conv2d c;
        c.kernel = kernel;
        c.stride = stride;
        Tensor w({out_ch, in_ch, kernel, kernel});
        init_conv_weight(w, scheme, rng);
        c.weight = ad::leaf(std::move(w));
        c.bias = ad::leaf(Tensor({out_ch}));
        return c;
    }

    // Reflection-padded "same" convolution.
    Var operator()(const Var& x) const {
        return ops::conv2d_same(x, weight, bias, stride);
    }

    void collect(ParamList& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".weight", weight);
        out.emplace_back(prefix + ".bias", bias);
    }
};

struct InstanceNorm {
    Var gamma, beta; // unused when affine is false
    bool affine = true;
    double eps = 1e-5;

    static InstanceNorm create(int64_t channels, bool affine, double eps) {
        InstanceNorm n;
        n.affine = affine;
        n.eps = eps;
        if (affine) {
            n.gamma = ad::leaf(Tensor::full({channels}, 1.0));
            n.beta = ad::leaf(Tensor({channels}));
        }
        return n;
    }

    Var operator()(const Var& x) const {
        Var y = ops::instance_norm(x, eps);
        return affine ? ops::channel_affine(y, gamma, beta) : y;
    }

    void collect(ParamList& out, const std::string& prefix) const {
        if (!affine) return;
        out.emplace_back(prefix + ".gamma", gamma);
        out.emplace_back(prefix + ".beta", beta);
    }
};

enum class Activation { None, ReLU, LeakyReLU02, Sigmoid };

inline Var activate(const Var& x, Activation act) {
    switch (act) {
        case Activation::ReLU: return ops::relu(x);
        case Activation::LeakyReLU02: return ops::leaky_relu(x, 0.2);
        case Activation::Sigmoid: return ops::sigmoid(x);
        case Activation::None: default: return x;
    }
}

// Convolution-InstanceNorm-activation, the repeated unit of all four
// networks.
struct ConvBlock {
    Conv2d conv;
    InstanceNorm norm;
    Activation act = Activation::ReLU;

    static ConvBlock create(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
                            Activation act, InitScheme scheme, double eps, Rng& rng) {
        ConvBlock b;
        b.conv = Conv2d::create(in_ch, out_ch, kernel, stride, scheme, rng);
        b.norm = InstanceNorm::create(out_ch, /*affine=*/true, eps);
        b.act = act;
        return b;
    }

    Var operator()(const Var& x) const { return activate(norm(conv(x)), act); }

    void collect(ParamList& out, const std::string& prefix) const {
        conv.collect(out, prefix + ".conv");
        norm.collect(out, prefix + ".norm");
    }
};

struct Linear {
    Var weight; // [out, in]
    Var bias;   // [out]

    static Linear create(int64_t in_f, int64_t out_f, Rng& rng) {
        Linear l;
        Tensor w({out_f, in_f});
        const double std = std::sqrt(2.0 / static_cast<double>(in_f));
        for (int64_t i = 0; i < w.numel(); ++i) w.at(i) = std * rng.normal();
        l.weight = ad::leaf(std::move(w));
        l.bias = ad::leaf(Tensor({out_f}));
        return l;
    }

    Var operator()(const Var& x) const { return ops::linear(x, weight, bias); }

    void collect(ParamList& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".weight", weight);
        out.emplace_back(prefix + ".bias", bias);
    }
};

inline void zero_grads(const ParamList& params) {
    for (const auto& [name, p] : params) p->zero_grad();
}

} // namespace pastiche::nn
