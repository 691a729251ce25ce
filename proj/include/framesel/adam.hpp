#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "framesel/errors.hpp"
#include "framesel/tensor.hpp"

namespace framesel {

template <typename T>
struct AdamConfig {
    T lr = T(1e-5);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
};

// Per-parameter Adam state. Moment buffers always match the parameter shape;
// the step counter advances by exactly one per update.
template <typename T>
struct AdamState {
    Tensor<T> m;
    Tensor<T> v;
    std::int64_t t = 0;
};

// One bias-corrected Adam update, in place.
template <typename T>
inline void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& state,
                      const AdamConfig<T>& cfg) {
    if (!param.same_shape(grad))
        throw ShapeError("adam_step: grad shape " + grad.shape_str() + " != param " +
                         param.shape_str());
    if (state.m.size() == 0) {
        state.m.assign_like(param);
        state.m.zero();
        state.v.assign_like(param);
        state.v.zero();
    } else if (!state.m.same_shape(param)) {
        throw ShapeError("adam_step: state shape mismatch");
    }
    state.t += 1;
    T bc1 = T(1) - std::pow(cfg.beta1, static_cast<T>(state.t));
    T bc2 = T(1) - std::pow(cfg.beta2, static_cast<T>(state.t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        T g = grad.data[i];
        state.m.data[i] = cfg.beta1 * state.m.data[i] + (T(1) - cfg.beta1) * g;
        state.v.data[i] = cfg.beta2 * state.v.data[i] + (T(1) - cfg.beta2) * g * g;
        T mhat = state.m.data[i] / bc1;
        T vhat = state.v.data[i] / bc2;
        param.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    require_finite(param, "adam_step");
}

// Optimizer over an ordered parameter list. States are indexed positionally,
// so the caller must keep the list stable across steps.
template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig<T> cfg) : cfg_(cfg) {}

    void step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>>& grads) {
        if (params.size() != grads.size()) throw ShapeError("Adam::step: list size mismatch");
        if (states_.empty()) states_.resize(params.size());
        if (states_.size() != params.size()) throw ShapeError("Adam::step: parameter count changed");
        for (std::size_t i = 0; i < params.size(); ++i)
            adam_step(*params[i], grads[i], states_[i], cfg_);
    }

    const AdamConfig<T>& config() const { return cfg_; }

private:
    AdamConfig<T> cfg_;
    std::vector<AdamState<T>> states_;
};

} // namespace framesel
