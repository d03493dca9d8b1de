#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pastiche/core/resample.hpp"
#include "pastiche/core/rng.hpp"
#include "pastiche/core/types.hpp"
#include "pastiche/io/config.hpp"
#include "pastiche/io/serialize.hpp"
#include "pastiche/losses.hpp"
#include "pastiche/nn/adam.hpp"
#include "pastiche/nn/networks.hpp"

namespace pastiche::training {

// Which pixel-comparison loss the generator objective uses. `Transformed`
// is the standard configuration; the others exist as ablation toggles.
enum class PixelLossKind { Transformed, Conv1, Rgb, None };

inline std::string to_string(PixelLossKind k) {
    switch (k) {
        case PixelLossKind::Transformed: return "transformed";
        case PixelLossKind::Conv1: return "conv1";
        case PixelLossKind::Rgb: return "rgb";
        case PixelLossKind::None: return "none";
    }
    return "transformed";
}

inline PixelLossKind pixel_loss_from_string(const std::string& s) {
    if (s == "transformed") return PixelLossKind::Transformed;
    if (s == "conv1") return PixelLossKind::Conv1;
    if (s == "rgb") return PixelLossKind::Rgb;
    if (s == "none") return PixelLossKind::None;
    throw ValueError("unknown pixel_loss kind: " + s);
}

struct TrainConfig {
    int64_t patch_size = 768;
    int64_t batch_size = 1;
    double lr = 2e-4;
    int64_t total_iters = 300000;
    int64_t lr_drop_iter = 200000;
    double lr_drop_factor = 10.0;
    double lambda = 0.001;
    double acc_gate = 0.8;
    double ema_coeff = 0.05;
    uint64_t seed = 1;
    double width_scale = 1.0;
    int64_t n_residual_blocks = 9;
    int64_t checkpoint_every = 1000;
    // ablation toggles
    bool content_loss = true;
    PixelLossKind pixel_loss = PixelLossKind::Transformed;
    bool saturating_g = false;

    void validate() const {
        if (patch_size < 16 || patch_size % nn::kEncoderFactor != 0)
            throw ValueError("patch_size must be a positive multiple of 16");
        if (batch_size < 1) throw ValueError("batch_size must be >= 1");
        if (!(lr > 0.0)) throw ValueError("lr must be positive");
        if (total_iters < 1) throw ValueError("total_iters must be >= 1");
        if (lr_drop_iter >= total_iters) throw ValueError("lr_drop_iter must be < total_iters");
        if (!(lr_drop_factor >= 1.0)) throw ValueError("lr_drop_factor must be >= 1");
        if (lambda < 0.0) throw ValueError("lambda must be >= 0");
        if (!(acc_gate > 0.0 && acc_gate < 1.0)) throw ValueError("acc_gate must be in (0,1)");
        if (!(ema_coeff > 0.0 && ema_coeff < 1.0)) throw ValueError("ema_coeff must be in (0,1)");
        if (!(width_scale > 0.0)) throw ValueError("width_scale must be positive");
        if (n_residual_blocks < 1) throw ValueError("n_residual_blocks must be >= 1");
        if (checkpoint_every < 1) throw ValueError("checkpoint_every must be >= 1");
    }

    nn::NetworkSpec network_spec() const {
        nn::NetworkSpec s;
        s.width_scale = width_scale;
        s.n_residual_blocks = n_residual_blocks;
        return s;
    }

    io::KeyValues to_key_values() const {
        io::KeyValues kv;
        kv["patch_size"] = std::to_string(patch_size);
        kv["batch_size"] = std::to_string(batch_size);
        std::ostringstream lrs;
        lrs.precision(17);
        lrs << lr;
        kv["lr"] = lrs.str();
        kv["total_iters"] = std::to_string(total_iters);
        kv["lr_drop_iter"] = std::to_string(lr_drop_iter);
        kv["lr_drop_factor"] = fmt_double(lr_drop_factor);
        kv["lambda"] = fmt_double(lambda);
        kv["acc_gate"] = fmt_double(acc_gate);
        kv["ema_coeff"] = fmt_double(ema_coeff);
        kv["seed"] = std::to_string(seed);
        kv["width_scale"] = fmt_double(width_scale);
        kv["n_residual_blocks"] = std::to_string(n_residual_blocks);
        kv["checkpoint_every"] = std::to_string(checkpoint_every);
        kv["content_loss"] = content_loss ? "true" : "false";
        kv["pixel_loss"] = to_string(pixel_loss);
        kv["saturating_g"] = saturating_g ? "true" : "false";
        return kv;
    }

    // Keys present in `kv` override the corresponding fields of `base`;
    // unknown keys are rejected.
    static TrainConfig from_key_values(const io::KeyValues& kv, TrainConfig base = {}) {
        static const char* known[] = {"patch_size",     "batch_size",     "lr",
                                      "total_iters",    "lr_drop_iter",   "lr_drop_factor",
                                      "lambda",         "acc_gate",       "ema_coeff",
                                      "seed",           "width_scale",    "n_residual_blocks",
                                      "checkpoint_every", "content_loss", "pixel_loss",
                                      "saturating_g"};
        for (const auto& [k, v] : kv) {
            bool ok = false;
            for (const char* name : known)
                if (k == name) { ok = true; break; }
            if (!ok) throw IoError("unknown config key: " + k);
        }
        TrainConfig c = base;
        c.patch_size = io::kv_int(kv, "patch_size", c.patch_size);
        c.batch_size = io::kv_int(kv, "batch_size", c.batch_size);
        c.lr = io::kv_double(kv, "lr", c.lr);
        c.total_iters = io::kv_int(kv, "total_iters", c.total_iters);
        c.lr_drop_iter = io::kv_int(kv, "lr_drop_iter", c.lr_drop_iter);
        c.lr_drop_factor = io::kv_double(kv, "lr_drop_factor", c.lr_drop_factor);
        c.lambda = io::kv_double(kv, "lambda", c.lambda);
        c.acc_gate = io::kv_double(kv, "acc_gate", c.acc_gate);
        c.ema_coeff = io::kv_double(kv, "ema_coeff", c.ema_coeff);
        c.seed = static_cast<uint64_t>(io::kv_int(kv, "seed", static_cast<int64_t>(c.seed)));
        c.width_scale = io::kv_double(kv, "width_scale", c.width_scale);
        c.n_residual_blocks = io::kv_int(kv, "n_residual_blocks", c.n_residual_blocks);
        c.checkpoint_every = io::kv_int(kv, "checkpoint_every", c.checkpoint_every);
        c.content_loss = io::kv_bool(kv, "content_loss", c.content_loss);
        c.pixel_loss =
            pixel_loss_from_string(io::kv_string(kv, "pixel_loss", to_string(base.pixel_loss)));
        c.saturating_g = io::kv_bool(kv, "saturating_g", c.saturating_g);
        return c;
    }

    std::string canonical_text() const { return io::format_key_values(to_key_values()); }
    uint64_t hash() const { return io::fnv1a(canonical_text()); }

private:
    static std::string fmt_double(double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    }
};

// --------------------------------------------------------------------------
// Stand-alone pieces of the loop, each independently testable.

inline double lr_at(int64_t iter, const TrainConfig& cfg) {
    if (iter < 0 || iter >= cfg.total_iters)
        throw ValueError("lr_at: iteration " + std::to_string(iter) + " out of range");
    return iter < cfg.lr_drop_iter ? cfg.lr : cfg.lr / cfg.lr_drop_factor;
}

inline double update_ema(double ema, double batch_acc, double coeff) {
    if (!(ema >= 0.0 && ema <= 1.0)) throw ValueError("update_ema: ema out of [0,1]");
    if (!(batch_acc >= 0.0 && batch_acc <= 1.0))
        throw ValueError("update_ema: batch accuracy out of [0,1]");
    if (!(coeff > 0.0 && coeff < 1.0)) throw ValueError("update_ema: coeff out of (0,1)");
    return (1.0 - coeff) * ema + coeff * batch_acc;
}

// Fraction of logit-map cells classified correctly at sigmoid threshold
// 0.5, pooled over all scales; the real and fake sides contribute with
// equal weight.
inline double discriminator_batch_accuracy(const std::vector<Tensor>& real,
                                           const std::vector<Tensor>& fake) {
    if (real.empty() || fake.empty())
        throw ValueError("discriminator_batch_accuracy: empty scale list");
    int64_t real_total = 0, real_ok = 0, fake_total = 0, fake_ok = 0;
    for (const Tensor& m : real) {
        if (!m.all_finite()) throw NonFiniteError("discriminator_batch_accuracy: non-finite logits");
        real_total += m.numel();
        for (int64_t i = 0; i < m.numel(); ++i)
            if (m.at(i) > 0.0) ++real_ok;
    }
    for (const Tensor& m : fake) {
        if (!m.all_finite()) throw NonFiniteError("discriminator_batch_accuracy: non-finite logits");
        fake_total += m.numel();
        for (int64_t i = 0; i < m.numel(); ++i)
            if (!(m.at(i) > 0.0)) ++fake_ok;
    }
    return 0.5 * (static_cast<double>(real_ok) / static_cast<double>(real_total) +
                  static_cast<double>(fake_ok) / static_cast<double>(fake_total));
}

inline double discriminator_batch_accuracy(const DiscriminatorOutput& real,
                                           const DiscriminatorOutput& fake) {
    auto tensors = [](const DiscriminatorOutput& d) {
        std::vector<Tensor> out;
        for (const Tensor* t : d.scales()) out.push_back(*t);
        return out;
    };
    return discriminator_batch_accuracy(tensors(real), tensors(fake));
}

// Uniformly random square crop. Images smaller than the patch are first
// upscaled (bilinear) so the short side matches the patch size.
inline ImageBatch sample_patch(const ImageBatch& image, int64_t size, Rng& rng) {
    if (image.n() != 1) throw ValueError("sample_patch expects a single image");
    if (size < 16) throw ValueError("sample_patch: size must be >= 16");
    Tensor src = image.data;
    int64_t h = src.dim(2), w = src.dim(3);
    if (h < size || w < size) {
        const double scale = static_cast<double>(size) / static_cast<double>(std::min(h, w));
        const int64_t nh = std::max<int64_t>(size, std::llround(static_cast<double>(h) * scale));
        const int64_t nw = std::max<int64_t>(size, std::llround(static_cast<double>(w) * scale));
        src = resize_bilinear(src, nh, nw);
        // bilinear interpolation of [0,1] data stays in [0,1]
        h = nh;
        w = nw;
    }
    const int64_t top = rng.below(h - size + 1);
    const int64_t left = rng.below(w - size + 1);
    Tensor out({1, 3, size, size});
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t i = 0; i < size; ++i)
            for (int64_t j = 0; j < size; ++j) out(0, c, i, j) = src(0, c, top + i, left + j);
    return ImageBatch(std::move(out));
}

// Per-iteration record.
struct StepLog {
    int64_t iter = 0;                   // iteration index of this step (0-based)
    bool updated_discriminator = false; // which gate branch ran
    double lr = 0.0;
    double ema_before = 0.0; // the value the gate read
    double ema_after = 0.0;
    losses::LossReport report;
};

using StepCallback = std::function<void(const StepLog&)>;
using WarnCallback = std::function<void(const std::string&)>;

// --------------------------------------------------------------------------
// The joint optimization loop. Exactly one of the two parameter groups
// (discriminator vs encoder-decoder-transformer) is updated per step,
// selected by comparing the accuracy EMA from the previous step against
// the gate. The per-step batch is a pure function of (seed, iter), which
// makes resumed runs bit-identical to uninterrupted ones.
class Trainer {
public:
    Trainer(TrainConfig cfg, std::vector<ImageBatch> content, std::vector<ImageBatch> style,
            WarnCallback warn = {})
        : cfg_(std::move(cfg)),
          content_(std::move(content)),
          style_(std::move(style)),
          warn_(std::move(warn)),
          model_(nn::StylizerModel::create(cfg_.network_spec(), cfg_.seed)),
          master_rng_(Rng::mix(cfg_.seed ^ 0x7261696e6c6f6f70ull)) {
        cfg_.validate();
        if (content_.empty()) throw ValueError("training requires a non-empty content corpus");
        if (style_.empty()) throw ValueError("training requires a non-empty style set");
        if (style_.size() == 1) {
            single_style_warned_ = true;
            emit_warning("style set contains a single image; training with one style image "
                         "is prone to mode collapse — provide a grouped style set");
        }
        params_eg_ = model_.params_eg();
        params_t_ = model_.params_t();
        params_d_ = model_.params_d();
        opt_eg_.allocate(params_eg_);
        opt_t_.allocate(params_t_);
        opt_d_.allocate(params_d_);
    }

    const TrainConfig& config() const { return cfg_; }
    const nn::StylizerModel& model() const { return model_; }
    int64_t iter() const { return iter_; }
    double ema_accuracy() const { return ema_; }
    void set_ema_accuracy(double v) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValueError("ema accuracy must be in [0,1]");
        ema_ = v;
    }
    bool single_style_warning_emitted() const { return single_style_warned_; }

    StepLog step() {
        if (iter_ >= cfg_.total_iters) throw ValueError("training already finished");
        StepLog log;
        log.iter = iter_;
        log.lr = lr_at(iter_, cfg_);
        log.ema_before = ema_;

        Rng r = Rng::for_step(cfg_.seed, static_cast<uint64_t>(iter_));
        const Tensor x = assemble_batch(content_, r);
        const Tensor style = assemble_batch(style_, r);

        const bool update_d = ema_ < cfg_.acc_gate;
        log.updated_discriminator = update_d;

        losses::LossReport rep;
        rep.lambda = cfg_.lambda;

        if (update_d) {
            // Generator outputs are data here; no gradients flow into E/G/T.
            Tensor fake_img, z_in_v, z_out_v;
            {
                ad::NoGradGuard ng;
                auto z_in = model_.encoder.forward(ad::constant(x));
                auto y = model_.decoder.forward(z_in);
                fake_img = y->value;
                z_in_v = z_in->value;
                z_out_v = model_.encoder.forward(y)->value;
                rep.l_content = content_loss_value(z_in_v, z_out_v);
                rep.l_transformed = pixel_loss_value(x, fake_img);
            }
            auto d_real = model_.discriminator.forward(ad::constant(style));
            auto d_fake = model_.discriminator.forward(ad::constant(fake_img));
            auto l_adv_d = losses::adversarial_d(d_real.all(), d_fake.all());
            rep.l_adv_d = ad::scalar(l_adv_d);
            {
                ad::NoGradGuard ng;
                rep.l_adv_g = ad::scalar(losses::adversarial_g(d_fake.all(), cfg_.saturating_g));
            }
            rep.d_accuracy_batch = accuracy_of(d_real, d_fake);
            rep.total_eg = assemble_total(rep);
            check_finite(rep);
            // D maximizes l_adv_d; descend on its negation.
            nn::zero_grads(params_d_);
            ad::backward(ops::scale(l_adv_d, -1.0));
            opt_d_.step(params_d_, log.lr);
        } else {
            auto xv = ad::constant(x);
            auto z_in = model_.encoder.forward(xv);
            auto y = model_.decoder.forward(z_in);
            auto z_out = model_.encoder.forward(y);

            ad::Var total;
            if (cfg_.content_loss) {
                auto l_c = losses::style_aware_content(z_in, z_out);
                rep.l_content = ad::scalar(l_c);
                total = l_c;
            }
            ad::Var l_px = pixel_loss_graph(xv, y);
            if (l_px) {
                rep.l_transformed = ad::scalar(l_px);
                total = total ? ops::add(total, l_px) : l_px;
            }

            auto d_fake = model_.discriminator.forward(y);
            nn::Discriminator::Out d_real;
            {
                ad::NoGradGuard ng;
                d_real = model_.discriminator.forward(ad::constant(style));
            }
            auto l_adv_g = losses::adversarial_g(d_fake.all(), cfg_.saturating_g);
            rep.l_adv_g = ad::scalar(l_adv_g);
            {
                ad::NoGradGuard ng;
                rep.l_adv_d = ad::scalar(losses::adversarial_d(d_real.all(), d_fake.all()));
            }
            rep.d_accuracy_batch = accuracy_of(d_real, d_fake);
            if (cfg_.lambda > 0.0) {
                auto scaled = ops::scale(l_adv_g, cfg_.lambda);
                total = total ? ops::add(total, scaled) : scaled;
            }
            if (!total) throw ValueError("all generator loss terms disabled");
            rep.total_eg = assemble_total(rep);
            check_finite(rep);
            nn::zero_grads(params_eg_);
            nn::zero_grads(params_t_);
            ad::backward(total);
            opt_eg_.step(params_eg_, log.lr);
            opt_t_.step(params_t_, log.lr);
        }

        ema_ = update_ema(ema_, rep.d_accuracy_batch, cfg_.ema_coeff);
        ++iter_;
        log.ema_after = ema_;
        log.report = rep;
        return log;
    }

    // Run until total_iters, checkpointing every checkpoint_every
    // iterations and at the end. Returns the final step log.
    StepLog run(const std::string& checkpoint_dir = {}, const StepCallback& cb = {}) {
        StepLog last;
        while (iter_ < cfg_.total_iters) {
            last = step();
            if (cb) cb(last);
            if (!checkpoint_dir.empty() &&
                (iter_ % cfg_.checkpoint_every == 0 || iter_ == cfg_.total_iters))
                save_checkpoint(checkpoint_path(checkpoint_dir, iter_));
        }
        if (!checkpoint_dir.empty()) save_checkpoint(final_checkpoint_path(checkpoint_dir));
        return last;
    }

    static std::string checkpoint_path(const std::string& dir, int64_t iter) {
        return (std::filesystem::path(dir) / ("checkpoint_" + std::to_string(iter) + ".ckpt"))
            .string();
    }

    static std::string final_checkpoint_path(const std::string& dir) {
        return (std::filesystem::path(dir) / "checkpoint_final.ckpt").string();
    }

    // ---------------- checkpointing ----------------

    static constexpr char kMagic[9] = "PSTCKPT1";

    void save_checkpoint(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write checkpoint: " + path);
        io::write_magic(f, kMagic);
        io::write_pod<uint32_t>(f, 1);
        const std::string cfg_text = cfg_.canonical_text();
        io::write_string(f, cfg_text);
        io::write_pod<uint64_t>(f, io::fnv1a(cfg_text));
        io::write_pod<int64_t>(f, iter_);
        io::write_pod<double>(f, ema_);
        io::write_string(f, master_rng_.serialize());
        io::write_pod<uint64_t>(f, opt_eg_.step_count());
        io::write_pod<uint64_t>(f, opt_t_.step_count());
        io::write_pod<uint64_t>(f, opt_d_.step_count());
        uint64_t count = 0;
        for_each_named_tensor([&](const std::string&, const Tensor&) { ++count; });
        io::write_pod<uint64_t>(f, count);
        for_each_named_tensor([&](const std::string& name, const Tensor& t) {
            io::write_string(f, name);
            io::write_tensor(f, t);
        });
        if (!f) throw IoError("checkpoint write failed: " + path);
    }

    void load_checkpoint(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open checkpoint: " + path);
        io::expect_magic(f, kMagic, "checkpoint");
        const uint32_t version = io::read_pod<uint32_t>(f);
        if (version != 1) throw IoError("unsupported checkpoint version");
        const std::string cfg_text = io::read_string(f);
        const uint64_t stored_hash = io::read_pod<uint64_t>(f);
        if (stored_hash != io::fnv1a(cfg_text)) throw IoError("checkpoint corrupt: config hash");
        if (cfg_text != cfg_.canonical_text())
            throw ValueError("checkpoint was produced with a different config");
        iter_ = io::read_pod<int64_t>(f);
        ema_ = io::read_pod<double>(f);
        master_rng_.deserialize(io::read_string(f));
        opt_eg_.set_step_count(io::read_pod<uint64_t>(f));
        opt_t_.set_step_count(io::read_pod<uint64_t>(f));
        opt_d_.set_step_count(io::read_pod<uint64_t>(f));
        const uint64_t count = io::read_pod<uint64_t>(f);
        std::map<std::string, Tensor> table;
        for (uint64_t i = 0; i < count; ++i) {
            std::string name = io::read_string(f);
            table.emplace(std::move(name), io::read_tensor(f));
        }
        size_t used = 0;
        for_each_named_tensor_mut([&](const std::string& name, Tensor& t) {
            auto it = table.find(name);
            if (it == table.end()) throw IoError("checkpoint missing tensor: " + name);
            if (!it->second.same_shape(t))
                throw IoError("checkpoint tensor shape mismatch: " + name);
            t = it->second;
            ++used;
        });
        if (used != table.size()) throw IoError("checkpoint contains unexpected tensors");
    }

    // Resume a run from a checkpoint; the config is taken from the file.
    static Trainer from_checkpoint(const std::string& path, std::vector<ImageBatch> content,
                                   std::vector<ImageBatch> style, WarnCallback warn = {}) {
        TrainConfig cfg = read_config(path);
        Trainer t(std::move(cfg), std::move(content), std::move(style), std::move(warn));
        t.load_checkpoint(path);
        return t;
    }

    static TrainConfig read_config(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open checkpoint: " + path);
        io::expect_magic(f, kMagic, "checkpoint");
        const uint32_t version = io::read_pod<uint32_t>(f);
        if (version != 1) throw IoError("unsupported checkpoint version");
        std::istringstream cfg_stream(io::read_string(f));
        return TrainConfig::from_key_values(io::parse_key_values(cfg_stream));
    }

private:
    void emit_warning(const std::string& msg) const {
        if (warn_)
            warn_(msg);
        else
            std::cerr << "warning: " << msg << "\n";
    }

    Tensor assemble_batch(const std::vector<ImageBatch>& corpus, Rng& r) const {
        Tensor batch({cfg_.batch_size, 3, cfg_.patch_size, cfg_.patch_size});
        for (int64_t b = 0; b < cfg_.batch_size; ++b) {
            const int64_t idx = r.below(static_cast<int64_t>(corpus.size()));
            ImageBatch patch = sample_patch(corpus[static_cast<size_t>(idx)], cfg_.patch_size, r);
            const int64_t per = 3 * cfg_.patch_size * cfg_.patch_size;
            std::copy(patch.data.data(), patch.data.data() + per, batch.data() + b * per);
        }
        return batch;
    }

    double content_loss_value(const Tensor& z_in, const Tensor& z_out) const {
        ad::NoGradGuard ng;
        return ad::scalar(losses::style_aware_content(ad::constant(z_in), ad::constant(z_out)));
    }

    double pixel_loss_value(const Tensor& x, const Tensor& y) const {
        ad::NoGradGuard ng;
        ad::Var v = pixel_loss_graph(ad::constant(x), ad::constant(y));
        return v ? ad::scalar(v) : 0.0;
    }

    ad::Var pixel_loss_graph(const ad::Var& x, const ad::Var& y) const {
        switch (cfg_.pixel_loss) {
            case PixelLossKind::Transformed:
                return losses::transformed_image(x, y, model_.transformer);
            case PixelLossKind::Conv1: return losses::conv1_feature(x, y, model_.encoder);
            case PixelLossKind::Rgb: return losses::rgb_pixel(x, y);
            case PixelLossKind::None: return {};
        }
        return {};
    }

    double assemble_total(const losses::LossReport& rep) const {
        return losses::total_loss(rep.l_content, rep.l_transformed, rep.l_adv_g, cfg_.lambda);
    }

    static double accuracy_of(const nn::Discriminator::Out& real,
                              const nn::Discriminator::Out& fake) {
        auto values = [](const nn::Discriminator::Out& o) {
            std::vector<Tensor> v;
            for (const auto& s : o.all()) v.push_back(s->value);
            return v;
        };
        return discriminator_batch_accuracy(values(real), values(fake));
    }

    void check_finite(const losses::LossReport& rep) const {
        if (rep.all_finite()) return;
        std::ostringstream os;
        os << "non-finite loss at iteration " << iter_ << ": l_content=" << rep.l_content
           << " l_transformed=" << rep.l_transformed << " l_adv_d=" << rep.l_adv_d
           << " l_adv_g=" << rep.l_adv_g << " total_eg=" << rep.total_eg
           << " d_accuracy_batch=" << rep.d_accuracy_batch;
        throw NonFiniteError(os.str());
    }

    template <typename F>
    void for_each_named_tensor(F&& fn) const {
        const_cast<Trainer*>(this)->for_each_named_tensor_mut(
            [&](const std::string& name, Tensor& t) { fn(name, std::as_const(t)); });
    }

    template <typename F>
    void for_each_named_tensor_mut(F&& fn) {
        auto walk_group = [&](const nn::ParamList& params, nn::Adam& opt, const std::string& g) {
            for (auto& [name, p] : params) fn("param." + name, p->value);
            auto& slots = opt.slots();
            for (size_t i = 0; i < params.size(); ++i) {
                fn("adam." + g + ".m." + params[i].first, slots[i].m);
                fn("adam." + g + ".v." + params[i].first, slots[i].v);
            }
        };
        walk_group(params_eg_, opt_eg_, "eg");
        walk_group(params_t_, opt_t_, "t");
        walk_group(params_d_, opt_d_, "d");
    }

    TrainConfig cfg_;
    std::vector<ImageBatch> content_;
    std::vector<ImageBatch> style_;
    WarnCallback warn_;
    nn::StylizerModel model_;
    nn::ParamList params_eg_, params_t_, params_d_;
    nn::Adam opt_eg_, opt_t_, opt_d_;
    Rng master_rng_;
    int64_t iter_ = 0;
    double ema_ = 0.5; // neutral prior; either gate branch reachable at step 0
    bool single_style_warned_ = false;
};

// Loads just the model from a checkpoint (for stylization/evaluation).
struct LoadedStylizer {
    TrainConfig config;
    nn::StylizerModel model;
    int64_t iter = 0;
};

inline LoadedStylizer load_stylizer(const std::string& path) {
    TrainConfig cfg = Trainer::read_config(path);
    LoadedStylizer out{cfg, nn::StylizerModel::create(cfg.network_spec(), cfg.seed), 0};

    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    io::expect_magic(f, Trainer::kMagic, "checkpoint");
    io::read_pod<uint32_t>(f);               // version, validated by read_config
    io::read_string(f);                      // config text
    io::read_pod<uint64_t>(f);               // config hash
    out.iter = io::read_pod<int64_t>(f);
    io::read_pod<double>(f);                 // ema
    io::read_string(f);                      // rng state
    io::read_pod<uint64_t>(f);               // adam step counts
    io::read_pod<uint64_t>(f);
    io::read_pod<uint64_t>(f);
    const uint64_t count = io::read_pod<uint64_t>(f);
    std::map<std::string, Tensor> table;
    for (uint64_t i = 0; i < count; ++i) {
        std::string name = io::read_string(f);
        table.emplace(std::move(name), io::read_tensor(f));
    }
    for (auto& [name, p] : out.model.params_all()) {
        auto it = table.find("param." + name);
        if (it == table.end()) throw IoError("checkpoint missing tensor: " + name);
        if (!it->second.same_shape(p->value))
            throw IoError("checkpoint tensor shape mismatch: " + name);
        p->value = it->second;
    }
    return out;
}

} // namespace pastiche::training
