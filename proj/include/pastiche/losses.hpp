#pragma once

#include <cmath>
#include <vector>

#include "pastiche/core/ops.hpp"
#include "pastiche/core/types.hpp"
#include "pastiche/nn/networks.hpp"

namespace pastiche::losses {

using ad::Var;

// Probabilities are clamped here before the log to keep the adversarial
// losses finite for extreme logits.
inline constexpr double kLogFloor = 1e-12;

// Every loss value produced in one training step.
struct LossReport {
    double l_content = 0.0;     // latent-space content term
    double l_transformed = 0.0; // pixel-comparison term (transformed/conv1/rgb)
    double l_adv_d = 0.0;       // discriminator objective value (D maximizes this)
    double l_adv_g = 0.0;       // generator adversarial term
    double total_eg = 0.0;      // objective minimized by the encoder-decoder
    double lambda = 0.0;
    double d_accuracy_batch = 0.0;

    bool all_finite() const {
        return std::isfinite(l_content) && std::isfinite(l_transformed) &&
               std::isfinite(l_adv_d) && std::isfinite(l_adv_g) && std::isfinite(total_eg) &&
               std::isfinite(d_accuracy_batch);
    }
};

namespace detail {

// Mean over the batch of (1/per_sample_dims) * squared distance.
inline Var normalized_sq_distance(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "normalized_sq_distance");
    const double denom = static_cast<double>(a->value.numel()); // batch * per-sample dims
    return ops::scale(ops::sum_all(ops::square(ops::sub(a, b))), 1.0 / denom);
}

} // namespace detail

// --------------------------------------------------------------------------
// Latent-space content loss: normalized squared Euclidean distance between
// the codes of the input and of its stylization, averaged over the batch.
inline Var style_aware_content(const Var& z_in, const Var& z_out) {
    return detail::normalized_sq_distance(z_in, z_out);
}

inline double style_aware_content_loss(const LatentCode& z_in, const LatentCode& z_out) {
    ad::NoGradGuard ng;
    return ad::scalar(style_aware_content(ad::constant(z_in.data), ad::constant(z_out.data)));
}

// --------------------------------------------------------------------------
// Pixel-level loss measured after the learned transformer block.
inline Var transformed_image(const Var& x, const Var& y, const nn::TransformerBlock& t) {
    require_same_shape(x->value, y->value, "transformed_image");
    return detail::normalized_sq_distance(t.forward(x), t.forward(y));
}

inline double transformed_image_loss(const ImageBatch& x, const ImageBatch& y,
                                     const nn::TransformerBlock& t) {
    ad::NoGradGuard ng;
    return ad::scalar(transformed_image(ad::constant(x.data), ad::constant(y.data), t));
}

// Ablation variant: plain RGB-space difference (identity transform).
inline Var rgb_pixel(const Var& x, const Var& y) {
    return detail::normalized_sq_distance(x, y);
}

// Ablation variant: difference in the encoder's first-conv feature space.
inline Var conv1_feature(const Var& x, const Var& y, const nn::Encoder& encoder) {
    require_same_shape(x->value, y->value, "conv1_feature");
    return detail::normalized_sq_distance(encoder.conv1_features(x), encoder.conv1_features(y));
}

inline double conv1_feature_loss(const ImageBatch& x, const ImageBatch& y,
                                 const nn::Encoder& encoder) {
    ad::NoGradGuard ng;
    return ad::scalar(conv1_feature(ad::constant(x.data), ad::constant(y.data), encoder));
}

// --------------------------------------------------------------------------
// Adversarial losses. Each logit map is averaged per cell, then the five
// scales are summed, so the magnitude is independent of input resolution.

// E[log D(real)] + E[log(1 - D(fake))], the quantity the discriminator
// maximizes. Callers negate it for gradient descent.
inline Var adversarial_d(const std::vector<Var>& real_scales, const std::vector<Var>& fake_scales) {
    if (real_scales.empty() || real_scales.size() != fake_scales.size())
        throw ShapeError("adversarial_d: scale lists must be non-empty and equal length");
    Var total;
    for (size_t s = 0; s < real_scales.size(); ++s) {
        Var term = ops::add(
            ops::mean_all(ops::log_floor(ops::sigmoid(real_scales[s]), kLogFloor)),
            ops::mean_all(ops::log_floor(ops::one_minus(ops::sigmoid(fake_scales[s])), kLogFloor)));
        total = total ? ops::add(total, term) : term;
    }
    return total;
}

// Generator adversarial term. Non-saturating by default:
// -E[log D(fake)]; the saturating flag selects E[log(1 - D(fake))], the
// term the generator literally inherits from the min-max objective.
inline Var adversarial_g(const std::vector<Var>& fake_scales, bool saturating = false) {
    if (fake_scales.empty()) throw ShapeError("adversarial_g: empty scale list");
    Var total;
    for (const Var& f : fake_scales) {
        Var term =
            saturating
                ? ops::mean_all(ops::log_floor(ops::one_minus(ops::sigmoid(f)), kLogFloor))
                : ops::scale(ops::mean_all(ops::log_floor(ops::sigmoid(f), kLogFloor)), -1.0);
        total = total ? ops::add(total, term) : term;
    }
    return total;
}

namespace detail {

inline std::vector<Var> as_vars(const std::vector<Tensor>& maps) {
    std::vector<Var> out;
    out.reserve(maps.size());
    for (const Tensor& m : maps) out.push_back(ad::constant(m));
    return out;
}

inline std::vector<Tensor> as_tensors(const DiscriminatorOutput& d) {
    std::vector<Tensor> out;
    for (const Tensor* t : d.scales()) out.push_back(*t);
    return out;
}

} // namespace detail

inline double adversarial_d_loss(const std::vector<Tensor>& real, const std::vector<Tensor>& fake) {
    ad::NoGradGuard ng;
    return ad::scalar(adversarial_d(detail::as_vars(real), detail::as_vars(fake)));
}

inline double adversarial_d_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
    return adversarial_d_loss(detail::as_tensors(real), detail::as_tensors(fake));
}

inline double adversarial_g_loss(const std::vector<Tensor>& fake, bool saturating = false) {
    ad::NoGradGuard ng;
    return ad::scalar(adversarial_g(detail::as_vars(fake), saturating));
}

inline double adversarial_g_loss(const DiscriminatorOutput& fake, bool saturating = false) {
    return adversarial_g_loss(detail::as_tensors(fake), saturating);
}

// --------------------------------------------------------------------------
inline double total_loss(double l_c, double l_t, double l_adv_g, double lambda) {
    if (lambda < 0.0) throw ValueError("total_loss: lambda must be >= 0");
    return l_c + l_t + lambda * l_adv_g;
}

} // namespace pastiche::losses
