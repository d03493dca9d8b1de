#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pastiche/nn/networks.hpp"
#include "testutil.hpp"

using namespace pastiche;
using testutil::random_image;
using testutil::random_tensor;

namespace {

nn::StylizerModel desk_model(double width_scale, uint64_t seed = 42) {
    nn::NetworkSpec spec;
    spec.width_scale = width_scale;
    return nn::StylizerModel::create(spec, seed);
}

} // namespace

TEST_CASE("channel scaling rounds to nearest, at least 1") {
    nn::NetworkSpec spec;
    spec.width_scale = 0.125;
    CHECK(spec.scaled(256) == 32);
    CHECK(spec.scaled(32) == 4);
    spec.width_scale = 0.0625;
    CHECK(spec.scaled(32) == 2);
    CHECK(spec.scaled(1024) == 64);
    spec.width_scale = 0.001;
    CHECK(spec.scaled(32) == 1);
    spec.width_scale = 1.0;
    CHECK(spec.scaled(256) == 256);
    spec.width_scale = -1.0;
    CHECK_THROWS_AS(spec.validate(), ValueError);
}

TEST_CASE("encode shape law") {
    Rng rng(1);
    {
        auto m = desk_model(0.125);
        LatentCode z = m.encoder.encode(random_image(2, 64, 64, rng));
        CHECK(z.data.shape() == std::vector<int64_t>{2, 32, 4, 4});
    }
    {
        // full-width model, one forward through the encoder
        auto spec = nn::NetworkSpec{};
        Rng init(3);
        auto enc = nn::Encoder::create(spec, init);
        LatentCode z = enc.encode(random_image(1, 256, 256, rng));
        CHECK(z.data.shape() == std::vector<int64_t>{1, 256, 16, 16});
    }
    // stride arithmetic, checked symbolically
    CHECK(nn::Encoder::latent_dims(768, 768) == std::array<int64_t, 2>{48, 48});
    CHECK(nn::Encoder::latent_dims(256, 256) == std::array<int64_t, 2>{16, 16});
    CHECK_THROWS_AS(nn::Encoder::latent_dims(65, 64), DimensionError);
}

TEST_CASE("decode shape and range laws") {
    auto m = desk_model(0.125);
    Rng rng(2);
    {
        LatentCode z(random_tensor({1, 32, 4, 4}, rng));
        ImageBatch y = m.decoder.decode(z);
        CHECK(y.data.shape() == std::vector<int64_t>{1, 3, 64, 64});
        CHECK(y.data.min() > 0.0);
        CHECK(y.data.max() < 1.0);
    }
    {
        // all-zero latent: constant spatial pattern per channel, still in (0,1)
        LatentCode z(Tensor({1, 32, 4, 4}));
        ImageBatch y = m.decoder.decode(z);
        for (int64_t c = 0; c < 3; ++c) {
            const double v0 = y.data(0, c, 0, 0);
            CHECK(v0 > 0.0);
            CHECK(v0 < 1.0);
            for (int64_t i = 0; i < 64; ++i)
                for (int64_t j = 0; j < 64; ++j)
                    CHECK(y.data(0, c, i, j) == doctest::Approx(v0).epsilon(1e-12));
        }
    }
}

TEST_CASE("stylize composes encode and decode, preserves shape") {
    auto m = desk_model(0.125);
    Rng rng(3);
    ImageBatch x = random_image(1, 64, 96, rng);
    ImageBatch y = m.stylize(x);
    CHECK(y.data.shape() == x.data.shape());
    ImageBatch composed = m.decoder.decode(m.encoder.encode(x));
    CHECK(y.data == composed.data);

    // repeated calls are bit-identical
    CHECK(m.stylize(x).data == y.data);
}

TEST_CASE("stylize is independent per sample") {
    auto m = desk_model(0.125);
    Rng rng(4);
    ImageBatch batch = random_image(4, 64, 64, rng);
    ImageBatch out = m.stylize(batch);
    for (int64_t i = 0; i < 4; ++i) {
        Tensor single({1, 3, 64, 64});
        const int64_t per = 3 * 64 * 64;
        std::copy(batch.data.data() + i * per, batch.data.data() + (i + 1) * per, single.data());
        ImageBatch yi = m.stylize(ImageBatch(single));
        for (int64_t k = 0; k < per; ++k) CHECK(yi.data.at(k) == out.data.at(i * per + k));
    }
}

TEST_CASE("same parameters serve multiple resolutions") {
    auto m = desk_model(0.0625);
    Rng rng(5);
    ImageBatch small = random_image(1, 64, 64, rng);
    ImageBatch large = random_image(1, 1280, 1280, rng);
    CHECK(m.stylize(small).data.shape() == small.data.shape());
    CHECK(m.stylize(large).data.shape() == large.data.shape());
}

TEST_CASE("model creation is deterministic per seed") {
    auto a = desk_model(0.125, 7);
    auto b = desk_model(0.125, 7);
    auto pa = a.params_all();
    auto pb = b.params_all();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(pa[i].second->value == pb[i].second->value);
    }
    auto c = desk_model(0.125, 8);
    CHECK_FALSE(c.params_all()[0].second->value == pa[0].second->value);
}

TEST_CASE("discriminator logit map dims") {
    auto m = desk_model(0.125);
    Rng rng(6);
    DiscriminatorOutput out = m.discriminator.discriminate(random_image(1, 256, 256, rng));
    CHECK(out.main.shape() == std::vector<int64_t>{1, 1, 2, 2});
    CHECK(out.aux[0].shape() == std::vector<int64_t>{1, 1, 128, 128});
    CHECK(out.aux[1].shape() == std::vector<int64_t>{1, 1, 64, 64});
    CHECK(out.aux[2].shape() == std::vector<int64_t>{1, 1, 16, 16});
    CHECK(out.aux[3].shape() == std::vector<int64_t>{1, 1, 4, 4});

    // 768-input arithmetic, symbolic
    CHECK(nn::Discriminator::main_dims(768, 768) == std::array<int64_t, 2>{6, 6});
    CHECK(nn::Discriminator::aux_dims(768, 768, 0) == std::array<int64_t, 2>{384, 384});
    CHECK(nn::Discriminator::aux_dims(768, 768, 1) == std::array<int64_t, 2>{192, 192});
    CHECK(nn::Discriminator::aux_dims(768, 768, 2) == std::array<int64_t, 2>{48, 48});
    CHECK(nn::Discriminator::aux_dims(768, 768, 3) == std::array<int64_t, 2>{12, 12});

    // small inputs never collapse below one cell
    DiscriminatorOutput tiny = m.discriminator.discriminate(random_image(1, 64, 64, rng));
    CHECK(tiny.main.shape() == std::vector<int64_t>{1, 1, 1, 1});
}

TEST_CASE("transformer block: shape, bias invariance, unit norm") {
    auto m = desk_model(0.125);
    Rng rng(7);
    ImageBatch x = random_image(1, 64, 64, rng);
    ImageBatch y = random_image(1, 64, 64, rng);

    Tensor tx = m.transformer.transform(x);
    CHECK(tx.shape() == x.data.shape());

    // T(x) - T(y) does not depend on the bias term
    Tensor diff_zero_bias(tx.shape());
    {
        Tensor ty = m.transformer.transform(y);
        for (int64_t i = 0; i < tx.numel(); ++i) diff_zero_bias.at(i) = tx.at(i) - ty.at(i);
    }
    for (int64_t c = 0; c < 3; ++c) m.transformer.bias->value.at(c) = 0.37 * (c + 1);
    {
        Tensor tx2 = m.transformer.transform(x);
        Tensor ty2 = m.transformer.transform(y);
        for (int64_t i = 0; i < tx.numel(); ++i)
            CHECK(tx2.at(i) - ty2.at(i) == doctest::Approx(diff_zero_bias.at(i)).epsilon(1e-12));
    }

    // applied kernel keeps unit norm after arbitrary raw-parameter updates
    for (int trial = 0; trial < 5; ++trial) {
        for (int64_t i = 0; i < m.transformer.kernel_raw->value.numel(); ++i)
            m.transformer.kernel_raw->value.at(i) += 0.3 * rng.normal();
        const Tensor k = m.transformer.effective_kernel();
        CHECK(std::abs(std::sqrt(k.squared_norm()) - 1.0) <= 1e-6);
    }
}

TEST_CASE("instance norm law holds inside encoder blocks") {
    auto m = desk_model(0.125);
    Rng rng(8);
    ImageBatch img = random_image(1, 64, 64, rng);
    ad::NoGradGuard ng;

    auto check_pre_affine_stats = [](const ad::Var& pre_affine) {
        const Tensor& t = pre_affine->value;
        const int64_t N = t.dim(0), C = t.dim(1), HW = t.dim(2) * t.dim(3);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
                double mean = 0.0, var = 0.0;
                for (int64_t i = 0; i < HW; ++i) mean += t.at((n * C + c) * HW + i);
                mean /= static_cast<double>(HW);
                for (int64_t i = 0; i < HW; ++i) {
                    const double d = t.at((n * C + c) * HW + i) - mean;
                    var += d * d;
                }
                var /= static_cast<double>(HW);
                CHECK(std::abs(mean) <= 1e-4);
                CHECK(var >= 1.0 - 1e-3);
                CHECK(var <= 1.0 + 1e-3);
            }
    };

    // walk the encoder stage by stage, probing each normalization input
    ad::Var h = m.encoder.input_norm(ad::constant(img.data));
    const nn::ConvBlock* blocks[5] = {&m.encoder.conv1, &m.encoder.down[0], &m.encoder.down[1],
                                      &m.encoder.down[2], &m.encoder.down[3]};
    for (const nn::ConvBlock* b : blocks) {
        ad::Var conv_out = b->conv(h);
        ad::Var normed = ops::instance_norm(conv_out, b->norm.eps);
        check_pre_affine_stats(normed);
        h = b->operator()(h);
    }
}

TEST_CASE("input validation errors") {
    auto m = desk_model(0.125);
    Tensor bad({1, 3, 64, 64});
    bad.at(5) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ImageBatch{bad}, NonFiniteError);
    Tensor out_of_range = Tensor::full({1, 3, 64, 64}, 1.5);
    CHECK_THROWS_AS(ImageBatch{out_of_range}, ValueError);
    Tensor small = Tensor::full({1, 3, 8, 8}, 0.5);
    CHECK_THROWS_AS(ImageBatch{small}, DimensionError);

    Rng rng(9);
    CHECK_THROWS_AS(m.stylize(random_image(1, 65, 64, rng)), DimensionError);

    // non-finite decoder parameter is caught by decode()
    auto broken = desk_model(0.125);
    broken.decoder.output.conv.weight->value.at(0) = std::numeric_limits<double>::infinity();
    LatentCode z(random_tensor({1, 32, 4, 4}, rng));
    CHECK_THROWS_AS(broken.decoder.decode(z), NonFiniteError);
}
