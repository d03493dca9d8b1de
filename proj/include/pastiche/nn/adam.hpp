#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pastiche/core/errors.hpp"
#include "pastiche/nn/layers.hpp"

namespace pastiche::nn {

// Adam with decoupled per-group state. Moments advance only when the group
// is stepped, so a gated group keeps exact state across skipped iterations.
class Adam {
public:
    double beta1 = 0.5; // GAN-friendly default
    double beta2 = 0.999;
    double eps = 1e-8;

    Adam() = default;
    Adam(double b1, double b2, double e) : beta1(b1), beta2(b2), eps(e) {}

    void step(const ParamList& params, double lr) {
        if (slots_.empty()) allocate(params);
        if (slots_.size() != params.size()) throw ValueError("Adam: parameter list changed size");
        ++step_count_;
        const double t = static_cast<double>(step_count_);
        const double alpha = lr * std::sqrt(1.0 - std::pow(beta2, t)) / (1.0 - std::pow(beta1, t));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = *params[i].second;
            Slot& s = slots_[i];
            Tensor& value = p.value;
            const Tensor& g = p.ensure_grad();
            const int64_t n = value.numel();
            for (int64_t j = 0; j < n; ++j) {
                const double gj = g.at(j);
                double& m = s.m.at(j);
                double& v = s.v.at(j);
                m = beta1 * m + (1.0 - beta1) * gj;
                v = beta2 * v + (1.0 - beta2) * gj * gj;
                value.at(j) -= alpha * m / (std::sqrt(v) + eps);
            }
        }
    }

    uint64_t step_count() const { return step_count_; }

    struct Slot {
        Tensor m, v;
    };

    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }
    void set_step_count(uint64_t c) { step_count_ = c; }

    void allocate(const ParamList& params) {
        slots_.clear();
        slots_.reserve(params.size());
        for (const auto& [name, p] : params)
            slots_.push_back({Tensor::zeros(p->value.shape()), Tensor::zeros(p->value.shape())});
    }

private:
    std::vector<Slot> slots_;
    uint64_t step_count_ = 0;
};

} // namespace pastiche::nn
