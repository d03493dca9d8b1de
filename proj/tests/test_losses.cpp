#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pastiche/losses.hpp"
#include "testutil.hpp"

using namespace pastiche;
using testutil::random_image;
using testutil::random_tensor;

namespace {

Tensor logit_map(std::vector<int64_t> shape, double prob) {
    return Tensor::full(std::move(shape), std::log(prob / (1.0 - prob)));
}

double sac(const Tensor& a, const Tensor& b) {
    ad::NoGradGuard ng;
    return ad::scalar(losses::style_aware_content(ad::constant(a), ad::constant(b)));
}

// Independent recomputation of the pixel loss after the transformer:
// reference convolution with the unit-normalized kernel, then the
// normalized squared difference.
double reference_transformed_loss(const ImageBatch& x, const ImageBatch& y,
                                  const nn::TransformerBlock& t) {
    Tensor v = t.kernel_raw->value;
    const double norm = std::sqrt(v.squared_norm());
    for (int64_t i = 0; i < v.numel(); ++i) v.at(i) /= norm;
    Tensor tx = testutil::reference_conv2d_same(x.data, v, t.bias->value, 1);
    Tensor ty = testutil::reference_conv2d_same(y.data, v, t.bias->value, 1);
    double s = 0.0;
    for (int64_t i = 0; i < tx.numel(); ++i) {
        const double d = tx.at(i) - ty.at(i);
        s += d * d;
    }
    return s / static_cast<double>(tx.numel());
}

// Independent recomputation of the encoder-first-block feature loss:
// instance norm of the raw input, reference convolution, instance norm,
// affine, relu, normalized squared difference.
Tensor reference_conv1_features(const Tensor& img, const nn::Encoder& enc) {
    auto inorm = [](const Tensor& x, double eps) {
        Tensor out(x.shape());
        const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
        for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
                double mean = 0.0, var = 0.0;
                for (int64_t i = 0; i < HW; ++i) mean += x.at((n * C + c) * HW + i);
                mean /= static_cast<double>(HW);
                for (int64_t i = 0; i < HW; ++i) {
                    const double d = x.at((n * C + c) * HW + i) - mean;
                    var += d * d;
                }
                var /= static_cast<double>(HW);
                const double inv = 1.0 / std::sqrt(var + eps);
                for (int64_t i = 0; i < HW; ++i)
                    out.at((n * C + c) * HW + i) = (x.at((n * C + c) * HW + i) - mean) * inv;
            }
        return out;
    };
    Tensor h = inorm(img, enc.input_norm.eps);
    h = testutil::reference_conv2d_same(h, enc.conv1.conv.weight->value,
                                        enc.conv1.conv.bias->value, 1);
    h = inorm(h, enc.conv1.norm.eps);
    const int64_t C = h.dim(1), HW = h.dim(2) * h.dim(3);
    for (int64_t n = 0; n < h.dim(0); ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < HW; ++i) {
                double& v = h.at((n * C + c) * HW + i);
                v = v * enc.conv1.norm.gamma->value.at(c) + enc.conv1.norm.beta->value.at(c);
                if (v < 0.0) v = 0.0;
            }
    return h;
}

} // namespace

TEST_CASE("latent content loss closed forms") {
    CHECK(sac(Tensor::full({2, 4, 2, 2}, 0.3), Tensor::full({2, 4, 2, 2}, 0.3)) == 0.0);
    CHECK(sac(Tensor({1, 4, 2, 2}), Tensor::full({1, 4, 2, 2}, 1.0)) == doctest::Approx(1.0));
    CHECK(sac(Tensor({1, 2}, {1.0, 2.0}), Tensor({1, 2}, {1.0, 0.0})) == doctest::Approx(2.0));
    // batch of two samples: mean over batch of per-sample normalized distances
    CHECK(sac(Tensor({2, 2}, {1.0, 2.0, 0.0, 0.0}), Tensor({2, 2}, {1.0, 0.0, 0.0, 0.0})) ==
          doctest::Approx(1.0));
    CHECK_THROWS_AS(sac(Tensor({1, 2}), Tensor({1, 3})), ShapeError);
}

TEST_CASE("latent content loss symmetry and positivity") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = random_tensor({2, 3, 4, 4}, rng);
        Tensor b = random_tensor({2, 3, 4, 4}, rng);
        CHECK(sac(a, b) == sac(b, a));
        CHECK(sac(a, b) > 0.0);
        CHECK(sac(a, a) == 0.0);
    }
}

TEST_CASE("transformed image loss: zero at identity, bias invariant, matches oracle") {
    nn::NetworkSpec spec;
    spec.width_scale = 0.0625;
    Rng init(17);
    auto t = nn::TransformerBlock::create(spec, init);

    Rng rng(18);
    ImageBatch x = random_image(1, 16, 16, rng);
    ImageBatch y = random_image(1, 16, 16, rng);

    CHECK(losses::transformed_image_loss(x, x, t) == 0.0);

    const double base = losses::transformed_image_loss(x, y, t);
    CHECK(base > 0.0);
    for (int64_t c = 0; c < 3; ++c) t.bias->value.at(c) = 1.7 * (c + 1);
    CHECK(losses::transformed_image_loss(x, y, t) == doctest::Approx(base).epsilon(1e-9));

    const double ref = reference_transformed_loss(x, y, t);
    CHECK(losses::transformed_image_loss(x, y, t) ==
          doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("conv1 feature loss: zero at identity, non-negative, matches oracle") {
    nn::NetworkSpec spec;
    spec.width_scale = 0.0625;
    Rng init(19);
    auto enc = nn::Encoder::create(spec, init);
    // generic affine parameters
    Rng noise(20);
    for (int64_t i = 0; i < enc.conv1.norm.gamma->value.numel(); ++i) {
        enc.conv1.norm.gamma->value.at(i) += 0.2 * noise.normal();
        enc.conv1.norm.beta->value.at(i) += 0.2 * noise.normal();
    }

    Rng rng(21);
    ImageBatch x = random_image(1, 16, 16, rng);
    ImageBatch y = random_image(1, 16, 16, rng);

    CHECK(losses::conv1_feature_loss(x, x, enc) == 0.0);
    const double val = losses::conv1_feature_loss(x, y, enc);
    CHECK(val >= 0.0);

    Tensor fx = reference_conv1_features(x.data, enc);
    Tensor fy = reference_conv1_features(y.data, enc);
    double s = 0.0;
    for (int64_t i = 0; i < fx.numel(); ++i) {
        const double d = fx.at(i) - fy.at(i);
        s += d * d;
    }
    const double ref = s / static_cast<double>(fx.numel());
    CHECK(val == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("adversarial discriminator loss closed forms") {
    // uniform 0.5 on one scale: log 0.5 + log 0.5
    CHECK(losses::adversarial_d_loss({logit_map({1, 1, 3, 3}, 0.5)},
                                     {logit_map({1, 1, 3, 3}, 0.5)}) ==
          doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-9));

    // D(real)=0.9, D(fake)=0.1 everywhere: 2 ln 0.9
    CHECK(losses::adversarial_d_loss({logit_map({1, 1, 2, 2}, 0.9)},
                                     {logit_map({1, 1, 2, 2}, 0.1)}) ==
          doctest::Approx(2.0 * std::log(0.9)).epsilon(1e-9));

    // five scales, each contributing -2 ln 2
    DiscriminatorOutput real, fake;
    real.main = logit_map({1, 1, 2, 2}, 0.5);
    fake.main = logit_map({1, 1, 2, 2}, 0.5);
    for (int a = 0; a < 4; ++a) {
        real.aux[static_cast<size_t>(a)] = logit_map({1, 1, 4, 4}, 0.5);
        fake.aux[static_cast<size_t>(a)] = logit_map({1, 1, 4, 4}, 0.5);
    }
    CHECK(losses::adversarial_d_loss(real, fake) ==
          doctest::Approx(-5.0 * 2.0 * std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("generator adversarial loss closed forms") {
    CHECK(losses::adversarial_g_loss({logit_map({1, 1, 3, 3}, 0.5)}, false) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(losses::adversarial_g_loss({logit_map({1, 1, 3, 3}, 0.5)}, true) ==
          doctest::Approx(-std::log(2.0)).epsilon(1e-9));

    // D(fake) -> 1: the non-saturating loss approaches zero from above
    const double near_one = losses::adversarial_g_loss({Tensor::full({1, 1, 2, 2}, 40.0)}, false);
    CHECK(near_one > 0.0);
    CHECK(near_one < 1e-6);
}

TEST_CASE("multi-scale adversarial losses equal the sum over scales") {
    Rng rng(30);
    std::vector<Tensor> real, fake;
    std::vector<int64_t> sizes{6, 5, 4, 3, 2};
    for (int64_t s : sizes) {
        real.push_back(random_tensor({2, 1, s, s}, rng));
        fake.push_back(random_tensor({2, 1, s, s}, rng));
    }
    double d_sum = 0.0, g_sum = 0.0;
    for (size_t i = 0; i < sizes.size(); ++i) {
        d_sum += losses::adversarial_d_loss({real[i]}, {fake[i]});
        g_sum += losses::adversarial_g_loss({fake[i]}, false);
    }
    CHECK(losses::adversarial_d_loss(real, fake) == doctest::Approx(d_sum).epsilon(1e-12));
    CHECK(losses::adversarial_g_loss(fake, false) == doctest::Approx(g_sum).epsilon(1e-12));
}

TEST_CASE("total loss arithmetic") {
    CHECK(losses::total_loss(1.0, 0.5, 10.0, 0.001) == doctest::Approx(1.51).epsilon(1e-12));
    CHECK(losses::total_loss(0.7, 0.2, 123.0, 0.0) == doctest::Approx(0.9));
    CHECK(losses::total_loss(0.0, 0.0, 42.0, 1.0) == doctest::Approx(42.0));
    CHECK_THROWS_AS(losses::total_loss(1.0, 1.0, 1.0, -0.1), ValueError);
}

TEST_CASE("log clamp keeps extreme logits finite") {
    CHECK(std::isfinite(losses::adversarial_d_loss({Tensor::full({1, 1, 2, 2}, 800.0)},
                                                   {Tensor::full({1, 1, 2, 2}, 800.0)})));
    CHECK(std::isfinite(losses::adversarial_g_loss({Tensor::full({1, 1, 2, 2}, -800.0)}, false)));
}

TEST_CASE("analytic gradients match finite differences at 32x32") {
    nn::NetworkSpec spec;
    spec.width_scale = 0.0625;
    auto model = nn::StylizerModel::create(spec, 91);
    Rng noise(92);
    testutil::perturb_params(model.params_all(), noise, 0.1);

    Rng rng(93);
    const Tensor x = random_image(1, 32, 32, rng).data;
    const Tensor style = random_image(1, 32, 32, rng).data;
    auto xv = ad::constant(x);
    auto sv = ad::constant(style);

    const int n_coords = 60;
    const double tol = 1e-3;

    SUBCASE("latent content loss") {
        auto rep = testutil::fd_check(model.params_eg(), [&] {
            auto z_in = model.encoder.forward(xv);
            auto z_out = model.encoder.forward(model.decoder.forward(z_in));
            return losses::style_aware_content(z_in, z_out);
        }, n_coords, 101);
        CAPTURE(rep.worst_param);
        CHECK(rep.max_rel_err <= tol);
    }
    SUBCASE("transformed image loss") {
        nn::ParamList params = model.params_eg();
        for (auto& p : model.params_t()) params.push_back(p);
        auto rep = testutil::fd_check(params, [&] {
            auto y = model.decoder.forward(model.encoder.forward(xv));
            return losses::transformed_image(xv, y, model.transformer);
        }, n_coords, 102);
        CAPTURE(rep.worst_param);
        CHECK(rep.max_rel_err <= tol);
    }
    SUBCASE("conv1 feature loss") {
        auto rep = testutil::fd_check(model.params_eg(), [&] {
            auto y = model.decoder.forward(model.encoder.forward(xv));
            return losses::conv1_feature(xv, y, model.encoder);
        }, n_coords, 103);
        CAPTURE(rep.worst_param);
        CHECK(rep.max_rel_err <= tol);
    }
    SUBCASE("adversarial losses") {
        nn::ParamList params = model.params_eg();
        for (auto& p : model.params_d()) params.push_back(p);
        auto rep_d = testutil::fd_check(params, [&] {
            auto y = model.decoder.forward(model.encoder.forward(xv));
            auto d_real = model.discriminator.forward(sv);
            auto d_fake = model.discriminator.forward(y);
            return losses::adversarial_d(d_real.all(), d_fake.all());
        }, n_coords, 104);
        CAPTURE(rep_d.worst_param);
        CHECK(rep_d.max_rel_err <= tol);

        auto rep_g = testutil::fd_check(params, [&] {
            auto y = model.decoder.forward(model.encoder.forward(xv));
            auto d_fake = model.discriminator.forward(y);
            return losses::adversarial_g(d_fake.all(), false);
        }, n_coords, 105);
        CAPTURE(rep_g.worst_param);
        CHECK(rep_g.max_rel_err <= tol);
    }
}
