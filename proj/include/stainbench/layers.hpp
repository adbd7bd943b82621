#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stainbench/kernels.hpp"
#include "stainbench/rng.hpp"
#include "stainbench/tensor.hpp"

namespace stainbench {

enum class LayerKind { kConv, kRelu, kPool, kUpconv, kConcat };

/// One node of the (small, fixed) computation graph. `input` and `skip` are
/// indices of earlier nodes, -1 meaning the stack input.
struct LayerDesc {
    LayerKind kind;
    int input = -1;
    int skip = -1;   // second operand for concat
    int param = -1;  // index into the parameter registry for conv/upconv
};

template <class T>
struct Param {
    std::string name;  // stable across save/load, e.g. "enc1.conv1"
    ConvParams<T> value;
};

template <class T>
struct ParamGrads {
    Tensor4<T> weights;
    std::vector<T> bias;
};

template <class T>
using GradientSet = std::vector<ParamGrads<T>>;  // aligned with the registry

/// Per-call forward context: node outputs plus pool masks, owned by the call
/// so concurrent evaluations never alias caches.
template <class T>
struct ForwardCache {
    std::vector<Tensor4<T>> outputs;
    std::vector<ArgmaxMask> masks;
};

/// Ordered layer descriptors plus the parameter registry. The last node is
/// the stack output. Spatial dims of the input must be divisible by
/// `spatial_divisor` (product of pooling factors).
template <class T>
struct LayerStack {
    std::vector<LayerDesc> layers;
    std::vector<Param<T>> params;
    int spatial_divisor = 1;

    int find_param(const std::string& name) const {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].name == name) return static_cast<int>(i);
        }
        return -1;
    }

    std::size_t param_count() const {
        std::size_t total = 0;
        for (const auto& p : params) total += p.value.weights.size() + p.value.bias.size();
        return total;
    }

    void check_input(const Tensor4<T>& x) const {
        if (x.h % spatial_divisor != 0 || x.w % spatial_divisor != 0) {
            throw ShapeError("LayerStack: input dims " + std::to_string(x.h) + "x" +
                             std::to_string(x.w) + " must be divisible by " +
                             std::to_string(spatial_divisor));
        }
    }

    Tensor4<T> forward(const Tensor4<T>& x, ForwardCache<T>& cache) const {
        check_input(x);
        cache.outputs.assign(layers.size(), Tensor4<T>());
        cache.masks.assign(layers.size(), ArgmaxMask{});
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const LayerDesc& d = layers[i];
            const Tensor4<T>& in = d.input < 0 ? x : cache.outputs[d.input];
            switch (d.kind) {
                case LayerKind::kConv:
                    cache.outputs[i] = conv2d_forward(in, params[d.param].value);
                    break;
                case LayerKind::kRelu:
                    cache.outputs[i] = relu_forward(in);
                    break;
                case LayerKind::kPool: {
                    auto r = maxpool2x2_forward(in);
                    cache.outputs[i] = std::move(r.output);
                    cache.masks[i] = std::move(r.mask);
                    break;
                }
                case LayerKind::kUpconv:
                    cache.outputs[i] = upconv2x2_forward(in, params[d.param].value);
                    break;
                case LayerKind::kConcat: {
                    const Tensor4<T>& other = d.skip < 0 ? x : cache.outputs[d.skip];
                    cache.outputs[i] = concat_channels(in, other);
                    break;
                }
            }
        }
        return cache.outputs.back();
    }

    Tensor4<T> forward(const Tensor4<T>& x) const {
        ForwardCache<T> cache;
        return forward(x, cache);
    }

    /// Backpropagates `grad_output` through the cached forward pass, filling
    /// one gradient slot per registered parameter.
    GradientSet<T> backward(const Tensor4<T>& x, const ForwardCache<T>& cache,
                            const Tensor4<T>& grad_output) const {
        GradientSet<T> grads(params.size());
        std::vector<Tensor4<T>> cotangent(layers.size());
        cotangent.back() = grad_output;

        auto add_into = [](Tensor4<T>& dst, const Tensor4<T>& src) {
            if (dst.size() == 0) {
                dst = src;
                return;
            }
            for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
        };

        for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
            if (cotangent[i].size() == 0) continue;  // node feeds nothing downstream
            const LayerDesc& d = layers[i];
            const Tensor4<T>& in = d.input < 0 ? x : cache.outputs[d.input];
            const Tensor4<T>& go = cotangent[i];
            switch (d.kind) {
                case LayerKind::kConv: {
                    auto g = conv2d_backward(go, in, params[d.param].value);
                    grads[d.param] = ParamGrads<T>{std::move(g.weights), std::move(g.bias)};
                    if (d.input >= 0) add_into(cotangent[d.input], g.input);
                    break;
                }
                case LayerKind::kRelu: {
                    auto g = relu_backward(go, in);
                    if (d.input >= 0) add_into(cotangent[d.input], g);
                    break;
                }
                case LayerKind::kPool: {
                    auto g = maxpool2x2_backward(go, cache.masks[i]);
                    if (d.input >= 0) add_into(cotangent[d.input], g);
                    break;
                }
                case LayerKind::kUpconv: {
                    auto g = upconv2x2_backward(go, in, params[d.param].value);
                    grads[d.param] = ParamGrads<T>{std::move(g.weights), std::move(g.bias)};
                    if (d.input >= 0) add_into(cotangent[d.input], g.input);
                    break;
                }
                case LayerKind::kConcat: {
                    auto [ga, gb] = split_channels(go, in.c);
                    if (d.input >= 0) add_into(cotangent[d.input], ga);
                    if (d.skip >= 0) add_into(cotangent[d.skip], gb);
                    break;
                }
            }
            cotangent[i] = Tensor4<T>();  // done with this node
        }
        return grads;
    }

    template <class U>
    LayerStack<U> cast() const {
        LayerStack<U> out;
        out.layers = layers;
        out.spatial_divisor = spatial_divisor;
        out.params.reserve(params.size());
        for (const auto& p : params) {
            out.params.push_back(Param<U>{p.name, p.value.template cast<U>()});
        }
        return out;
    }
};

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases. Each parameter
/// draws from its own stream so the result does not depend on registry
/// iteration order.
struct InitSpec {
    std::uint64_t seed = 0;
};

template <class T>
void init_params(const InitSpec& spec, LayerStack<T>& stack) {
    for (std::size_t i = 0; i < stack.params.size(); ++i) {
        auto& p = stack.params[i].value;
        const int fan_in = p.in_ch() * p.kernel() * p.kernel();
        const double stddev = std::sqrt(2.0 / fan_in);
        Rng rng(mix_seed(spec.seed, i));
        for (auto& v : p.weights.data) v = static_cast<T>(rng.normal(0.0, stddev));
        std::fill(p.bias.begin(), p.bias.end(), T(0));
    }
}

template <class T>
struct LossResult {
    T loss;
    Tensor4<T> grad;
};

/// Mean absolute difference over all elements; gradient is
/// sign(pred - target) / count with sign(0) = 0.
template <class T>
LossResult<T> l1_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
    if (!pred.same_shape(target)) {
        throw ShapeError("l1_loss: pred shape " + pred.shape() + " != target shape " +
                         target.shape());
    }
    LossResult<T> r{T(0), Tensor4<T>(pred.n, pred.c, pred.h, pred.w)};
    const T inv = T(1) / static_cast<T>(pred.size());
    // per-plane partial sums, combined in fixed order for determinism
    const int planes = pred.n * pred.c;
    const int plane = pred.h * pred.w;
    std::vector<T> partial(planes, T(0));
#pragma omp parallel for schedule(static)
    for (int pidx = 0; pidx < planes; ++pidx) {
        const T* a = pred.data.data() + static_cast<std::size_t>(pidx) * plane;
        const T* b = target.data.data() + static_cast<std::size_t>(pidx) * plane;
        T* g = r.grad.data.data() + static_cast<std::size_t>(pidx) * plane;
        T s = T(0);
        for (int i = 0; i < plane; ++i) {
            const T d = a[i] - b[i];
            s += d > T(0) ? d : -d;
            g[i] = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
        }
        partial[pidx] = s;
    }
    T total = T(0);
    for (const T s : partial) total += s;
    r.loss = total * inv;
    return r;
}

template <class T>
struct TrainStep {
    T loss;
    GradientSet<T> grads;
};

/// One forward/backward pass under the L1 objective.
template <class T>
TrainStep<T> forward_backward(const LayerStack<T>& model, const Tensor4<T>& batch_in,
                              const Tensor4<T>& batch_target) {
    ForwardCache<T> cache;
    Tensor4<T> pred = model.forward(batch_in, cache);
    auto loss = l1_loss(pred, batch_target);
    if (!std::isfinite(static_cast<double>(loss.loss))) {
        throw NumericError("forward_backward: non-finite loss");
    }
    return TrainStep<T>{loss.loss, model.backward(batch_in, cache, loss.grad)};
}

}  // namespace stainbench
