#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pastiche/core/types.hpp"
#include "pastiche/nn/layers.hpp"

namespace pastiche::nn {

// Architecture knobs. width_scale multiplies every channel count (rounded
// to the nearest integer, at least 1) so the same topology runs from CPU
// smoke-test size up to the full-width configuration.
struct NetworkSpec {
    double width_scale = 1.0;
    int64_t n_residual_blocks = 9;
    int64_t transformer_kernel = 10;
    double instance_norm_epsilon = 1e-5;
    InitScheme init_scheme = InitScheme::Normal002;

    void validate() const {
        if (!(width_scale > 0.0)) throw ValueError("width_scale must be positive");
        if (n_residual_blocks < 1) throw ValueError("n_residual_blocks must be >= 1");
        if (transformer_kernel < 1) throw ValueError("transformer_kernel must be >= 1");
        if (!(instance_norm_epsilon > 0.0)) throw ValueError("instance_norm_epsilon must be positive");
    }

    int64_t scaled(int64_t base) const {
        return std::max<int64_t>(1, std::llround(static_cast<double>(base) * width_scale));
    }

    int64_t latent_channels() const { return scaled(256); }
};

// Downsampling factor of the encoder (four stride-2 stages).
inline constexpr int64_t kEncoderFactor = 16;
// Downsampling factor of the discriminator trunk (seven stride-2 stages).
inline constexpr int64_t kDiscriminatorFactor = 128;

// --------------------------------------------------------------------------
// Encoder: input InstanceNorm, one stride-1 conv, four stride-2 convs.
// Channel ladder 32-32-64-128-256 (scaled).
class Encoder {
public:
    InstanceNorm input_norm; // bare normalization of the raw RGB input
    ConvBlock conv1;
    std::array<ConvBlock, 4> down;

    static Encoder create(const NetworkSpec& spec, Rng& rng) {
        Encoder e;
        e.input_norm = InstanceNorm::create(3, /*affine=*/false, spec.instance_norm_epsilon);
        e.conv1 = ConvBlock::create(3, spec.scaled(32), 3, 1, Activation::ReLU, spec.init_scheme,
                                    spec.instance_norm_epsilon, rng);
        const int64_t chans[5] = {spec.scaled(32), spec.scaled(32), spec.scaled(64),
                                  spec.scaled(128), spec.scaled(256)};
        for (int i = 0; i < 4; ++i)
            e.down[static_cast<size_t>(i)] =
                ConvBlock::create(chans[i], chans[i + 1], 3, 2, Activation::ReLU,
                                  spec.init_scheme, spec.instance_norm_epsilon, rng);
        return e;
    }

    static std::array<int64_t, 2> latent_dims(int64_t h, int64_t w) {
        if (h % kEncoderFactor != 0 || w % kEncoderFactor != 0)
            throw DimensionError("encoder input dims must be divisible by 16, got " +
                                 std::to_string(h) + "x" + std::to_string(w));
        return {h / kEncoderFactor, w / kEncoderFactor};
    }

    Var forward(const Var& x) const {
        Var h = input_norm(x);
        h = conv1(h);
        for (const auto& d : down) h = d(h);
        return h;
    }

    // Activations of the first convolutional block; the feature space of
    // the conv1 ablation loss.
    Var conv1_features(const Var& x) const { return conv1(input_norm(x)); }

    LatentCode encode(const ImageBatch& x) const {
        latent_dims(x.h(), x.w());
        if (!x.data.all_finite()) throw NonFiniteError("encode: non-finite input");
        ad::NoGradGuard ng;
        return LatentCode(forward(ad::constant(x.data))->value);
    }

    void collect(ParamList& out, const std::string& prefix) const {
        conv1.collect(out, prefix + ".conv1");
        for (size_t i = 0; i < down.size(); ++i)
            down[i].collect(out, prefix + ".down" + std::to_string(i + 1));
    }
};

// --------------------------------------------------------------------------
// Residual block: two 3x3 convolutions each followed by InstanceNorm, with
// a ReLU between them and an identity skip.
struct ResidualBlock {
    Conv2d conv1, conv2;
    InstanceNorm norm1, norm2;

    static ResidualBlock create(int64_t channels, const NetworkSpec& spec, Rng& rng) {
        ResidualBlock b;
        b.conv1 = Conv2d::create(channels, channels, 3, 1, spec.init_scheme, rng);
        b.norm1 = InstanceNorm::create(channels, true, spec.instance_norm_epsilon);
        b.conv2 = Conv2d::create(channels, channels, 3, 1, spec.init_scheme, rng);
        b.norm2 = InstanceNorm::create(channels, true, spec.instance_norm_epsilon);
        return b;
    }

    Var operator()(const Var& x) const {
        Var h = ops::relu(norm1(conv1(x)));
        h = norm2(conv2(h));
        return ops::add(x, h);
    }

    void collect(ParamList& out, const std::string& prefix) const {
        conv1.collect(out, prefix + ".conv1");
        norm1.collect(out, prefix + ".norm1");
        conv2.collect(out, prefix + ".conv2");
        norm2.collect(out, prefix + ".norm2");
    }
};

// --------------------------------------------------------------------------
// Decoder: residual blocks at the latent width, four upscaling blocks
// (nearest-neighbor x2 then a stride-1 conv; avoids the checkerboard
// artifacts of fractionally strided convolutions), and a 7x7 output conv
// with sigmoid.
class Decoder {
public:
    std::vector<ResidualBlock> blocks;
    std::array<ConvBlock, 4> up;
    ConvBlock output;

    static Decoder create(const NetworkSpec& spec, Rng& rng) {
        Decoder d;
        const int64_t lat = spec.latent_channels();
        d.blocks.reserve(static_cast<size_t>(spec.n_residual_blocks));
        for (int64_t i = 0; i < spec.n_residual_blocks; ++i)
            d.blocks.push_back(ResidualBlock::create(lat, spec, rng));
        const int64_t chans[5] = {lat, spec.scaled(256), spec.scaled(128), spec.scaled(64),
                                  spec.scaled(32)};
        for (int i = 0; i < 4; ++i)
            d.up[static_cast<size_t>(i)] =
                ConvBlock::create(chans[i], chans[i + 1], 3, 1, Activation::ReLU,
                                  spec.init_scheme, spec.instance_norm_epsilon, rng);
        d.output = ConvBlock::create(chans[4], 3, 7, 1, Activation::Sigmoid, spec.init_scheme,
                                     spec.instance_norm_epsilon, rng);
        return d;
    }

    Var forward(const Var& z) const {
        Var h = z;
        for (const auto& b : blocks) h = b(h);
        for (const auto& u : up) h = u(ops::upsample_nearest_2x(h));
        return output(h);
    }

    ImageBatch decode(const LatentCode& z) const {
        ParamList params;
        collect(params, "decoder");
        for (const auto& [name, p] : params)
            if (!p->value.all_finite()) throw NonFiniteError("decode: non-finite parameter " + name);
        ad::NoGradGuard ng;
        return ImageBatch(forward(ad::constant(z.data))->value);
    }

    void collect(ParamList& out, const std::string& prefix) const {
        for (size_t i = 0; i < blocks.size(); ++i)
            blocks[i].collect(out, prefix + ".res" + std::to_string(i + 1));
        for (size_t i = 0; i < up.size(); ++i)
            up[i].collect(out, prefix + ".up" + std::to_string(i + 1));
        output.collect(out, prefix + ".output");
    }
};

// --------------------------------------------------------------------------
// Transformer block: a single wide convolution whose kernel is rescaled to
// unit Frobenius norm on every application. Comparing images after this
// weak learned transform gives the pixel-level loss something softer than
// a raw RGB difference.
class TransformerBlock {
public:
    Var kernel_raw; // [3,3,k,k]; the applied kernel is kernel_raw / ||kernel_raw||
    Var bias;       // [3]
    int64_t kernel = 10;

    static TransformerBlock create(const NetworkSpec& spec, Rng& rng) {
        TransformerBlock t;
        t.kernel = spec.transformer_kernel;
        Tensor w({3, 3, t.kernel, t.kernel});
        const double bound = 1.0 / std::sqrt(static_cast<double>(3 * t.kernel * t.kernel));
        for (int64_t i = 0; i < w.numel(); ++i) w.at(i) = rng.uniform(-bound, bound);
        t.kernel_raw = ad::leaf(std::move(w));
        t.bias = ad::leaf(Tensor({3}));
        return t;
    }

    Var forward(const Var& img) const {
        ops::PadSpec p = ops::same_pad(img->value.dim(2), img->value.dim(3), kernel, 1);
        return ops::conv2d_valid(ops::reflect_pad(img, p), ops::unit_normalize(kernel_raw), bias, 1);
    }

    Tensor transform(const ImageBatch& img) const {
        if (!img.data.all_finite()) throw NonFiniteError("transform: non-finite input");
        ad::NoGradGuard ng;
        return forward(ad::constant(img.data))->value;
    }

    // The kernel actually applied; unit Frobenius norm by construction.
    Tensor effective_kernel() const {
        ad::NoGradGuard ng;
        return ops::unit_normalize(kernel_raw)->value;
    }

    void collect(ParamList& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".kernel", kernel_raw);
        out.emplace_back(prefix + ".bias", bias);
    }
};

// --------------------------------------------------------------------------
// Discriminator: seven stride-2 5x5 Conv-InstanceNorm-LeakyReLU stages with
// a 1-filter 3x3 prediction head on the final stage and four auxiliary
// 1-filter heads after stages 1, 2, 4 and 6. Heads are plain convolutions
// producing raw logits.
class Discriminator {
public:
    std::array<ConvBlock, 7> stages;
    Conv2d main_head;
    std::array<Conv2d, 4> aux_heads;

    static constexpr std::array<int, 4> kAuxAfterStage = {1, 2, 4, 6};

    static Discriminator create(const NetworkSpec& spec, Rng& rng) {
        Discriminator d;
        const int64_t chans[8] = {3,
                                  spec.scaled(128),
                                  spec.scaled(128),
                                  spec.scaled(256),
                                  spec.scaled(512),
                                  spec.scaled(512),
                                  spec.scaled(1024),
                                  spec.scaled(1024)};
        for (int i = 0; i < 7; ++i)
            d.stages[static_cast<size_t>(i)] =
                ConvBlock::create(chans[i], chans[i + 1], 5, 2, Activation::LeakyReLU02,
                                  spec.init_scheme, spec.instance_norm_epsilon, rng);
        d.main_head = Conv2d::create(chans[7], 1, 3, 1, spec.init_scheme, rng);
        for (size_t a = 0; a < 4; ++a)
            d.aux_heads[a] =
                Conv2d::create(chans[kAuxAfterStage[a]], 1, 3, 1, spec.init_scheme, rng);
        return d;
    }

    struct Out {
        Var main;
        std::array<Var, 4> aux;

        std::vector<Var> all() const { return {main, aux[0], aux[1], aux[2], aux[3]}; }
    };

    Out forward(const Var& img) const {
        Out out;
        Var h = img;
        size_t next_aux = 0;
        for (int i = 0; i < 7; ++i) {
            h = stages[static_cast<size_t>(i)](h);
            if (next_aux < 4 && kAuxAfterStage[next_aux] == i + 1) {
                out.aux[next_aux] = aux_heads[next_aux](h);
                ++next_aux;
            }
        }
        out.main = main_head(h);
        return out;
    }

    DiscriminatorOutput discriminate(const ImageBatch& img) const {
        check_dims(img.h(), img.w());
        ad::NoGradGuard ng;
        Out o = forward(ad::constant(img.data));
        DiscriminatorOutput r;
        r.main = o.main->value;
        for (size_t a = 0; a < 4; ++a) r.aux[a] = o.aux[a]->value;
        return r;
    }

    // Spatial extent after `halvings` ceil-halving stages.
    static int64_t stage_dim(int64_t in, int halvings) {
        int64_t d = in;
        for (int i = 0; i < halvings; ++i) d = ops::same_out_dim(d, 2);
        return d;
    }

    static std::array<int64_t, 2> main_dims(int64_t h, int64_t w) {
        return {stage_dim(h, 7), stage_dim(w, 7)};
    }

    static std::array<int64_t, 2> aux_dims(int64_t h, int64_t w, size_t aux_index) {
        const int hv = kAuxAfterStage[aux_index];
        return {stage_dim(h, hv), stage_dim(w, hv)};
    }

    static void check_dims(int64_t h, int64_t w) {
        for (int i = 1; i <= 7; ++i)
            if (stage_dim(h, i) < 1 || stage_dim(w, i) < 1)
                throw DimensionError("discriminator input collapses at stage " + std::to_string(i));
    }

    void collect(ParamList& out, const std::string& prefix) const {
        for (size_t i = 0; i < stages.size(); ++i)
            stages[i].collect(out, prefix + ".stage" + std::to_string(i + 1));
        main_head.collect(out, prefix + ".main_head");
        for (size_t a = 0; a < 4; ++a)
            aux_heads[a].collect(out, prefix + ".aux_head" + std::to_string(a + 1));
    }
};

// --------------------------------------------------------------------------
// The full model: encoder, decoder, transformer block and discriminator
// built from one spec and one seed.
struct StylizerModel {
    NetworkSpec spec;
    Encoder encoder;
    Decoder decoder;
    TransformerBlock transformer;
    Discriminator discriminator;

    static StylizerModel create(const NetworkSpec& spec, uint64_t seed) {
        spec.validate();
        StylizerModel m;
        m.spec = spec;
        Rng rng(Rng::mix(seed));
        m.encoder = Encoder::create(spec, rng);
        m.decoder = Decoder::create(spec, rng);
        m.transformer = TransformerBlock::create(spec, rng);
        m.discriminator = Discriminator::create(spec, rng);
        return m;
    }

    // Encoder+decoder parameters: the generator side of the optimization.
    ParamList params_eg() const {
        ParamList out;
        encoder.collect(out, "encoder");
        decoder.collect(out, "decoder");
        return out;
    }

    ParamList params_t() const {
        ParamList out;
        transformer.collect(out, "transformer");
        return out;
    }

    ParamList params_d() const {
        ParamList out;
        discriminator.collect(out, "discriminator");
        return out;
    }

    ParamList params_all() const {
        ParamList out = params_eg();
        for (auto& p : params_t()) out.push_back(p);
        for (auto& p : params_d()) out.push_back(p);
        return out;
    }

    // One feed-forward pass: decode(encode(x)). Output shape equals input
    // shape; repeated calls are bit-identical.
    ImageBatch stylize(const ImageBatch& x) const {
        Encoder::latent_dims(x.h(), x.w());
        ad::NoGradGuard ng;
        Var y = decoder.forward(encoder.forward(ad::constant(x.data)));
        return ImageBatch(y->value);
    }
};

} // namespace pastiche::nn
