#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "stainbench/layers.hpp"

namespace stainbench {

/// Optimizer and schedule settings, serialized alongside checkpoints.
/// Momentum, weight decay and batch size are artifact defaults; the schedule
/// endpoints come from the training recipe (0.01 annealed to 0).
struct TrainConfig {
    double lr0 = 0.01;
    int epochs = 300;
    double momentum = 0.9;
    double weight_decay = 0.0;
    int batch_size = 4;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lr0 > 0)) throw ConfigError("TrainConfig: lr0 must be > 0");
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (momentum < 0 || momentum >= 1) throw ConfigError("TrainConfig: momentum must be in [0,1)");
        if (weight_decay < 0) throw ConfigError("TrainConfig: weight_decay must be >= 0");
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    }
};

/// Cosine annealing, stepped per epoch: 0.5 * lr0 * (1 + cos(pi * e / T)).
/// Exactly lr0 at epoch 0 and exactly 0 at epoch T.
inline double cosine_lr(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch > cfg.epochs) {
        throw ConfigError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(cfg.epochs) + "]");
    }
    const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
    return 0.5 * cfg.lr0 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

/// Momentum buffers, one per registered parameter.
template <class T>
struct SgdState {
    GradientSet<T> velocity;

    static SgdState zeros_like(const LayerStack<T>& stack) {
        SgdState s;
        s.velocity.reserve(stack.params.size());
        for (const auto& p : stack.params) {
            s.velocity.push_back(ParamGrads<T>{
                Tensor4<T>(p.value.weights.n, p.value.weights.c, p.value.weights.h,
                           p.value.weights.w),
                std::vector<T>(p.value.bias.size(), T(0))});
        }
        return s;
    }
};

namespace detail {

template <class T>
inline void sgd_update_span(T* param, T* vel, const T* grad, std::size_t len, T lr, T momentum,
                            T weight_decay) {
#pragma omp simd
    for (std::size_t i = 0; i < len; ++i) {
        const T g = grad[i] + weight_decay * param[i];
        vel[i] = momentum * vel[i] + g;
        param[i] -= lr * vel[i];
    }
}

}  // namespace detail

/// velocity <- m * velocity + grad; param <- param - lr * velocity.
/// With momentum 0 this reduces to plain SGD.
template <class T>
void sgd_step(LayerStack<T>& stack, const GradientSet<T>& grads, double lr,
              const TrainConfig& cfg, SgdState<T>& state) {
    if (grads.size() != stack.params.size()) {
        throw ConfigError("sgd_step: gradient set covers " + std::to_string(grads.size()) +
                          " parameters, registry has " + std::to_string(stack.params.size()));
    }
    for (std::size_t i = 0; i < stack.params.size(); ++i) {
        auto& p = stack.params[i].value;
        const auto& g = grads[i];
        auto& v = state.velocity[i];
        if (g.weights.size() != p.weights.size() || g.bias.size() != p.bias.size()) {
            throw ConfigError("sgd_step: missing or mis-shaped gradient for parameter '" +
                              stack.params[i].name + "'");
        }
        detail::sgd_update_span(p.weights.data.data(), v.weights.data.data(),
                                g.weights.data.data(), p.weights.size(), static_cast<T>(lr),
                                static_cast<T>(cfg.momentum), static_cast<T>(cfg.weight_decay));
        detail::sgd_update_span(p.bias.data(), v.bias.data(), g.bias.data(), p.bias.size(),
                                static_cast<T>(lr), static_cast<T>(cfg.momentum),
                                static_cast<T>(cfg.weight_decay));
    }
}

}  // namespace stainbench
