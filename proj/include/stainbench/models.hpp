#pragma once

#include <string>
#include <vector>

#include "stainbench/layers.hpp"

namespace stainbench {

enum class ModelKind { kUnet, kPixelMapper };

inline std::string to_string(ModelKind k) {
    return k == ModelKind::kUnet ? "unet" : "pixelmapper";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "unet") return ModelKind::kUnet;
    if (s == "pixelmapper") return ModelKind::kPixelMapper;
    throw ConfigError("unknown model kind '" + s + "' (expected unet or pixelmapper)");
}

/// Architecture description. `base_channels` is the width of the first
/// encoder stage and of the final U-Net feature map; the pixel mapper is a
/// stack of 1x1 convolutions over `pm_widths`.
struct ModelSpec {
    ModelKind kind = ModelKind::kUnet;
    int base_channels = 64;
    int depth = 2;  // contraction blocks; fixed at 2 for this architecture
    std::vector<int> pm_widths = {3, 32, 32, 3};

    void validate() const {
        if (kind == ModelKind::kUnet) {
            if (base_channels < 1) throw ConfigError("ModelSpec: base_channels must be >= 1");
            if (depth != 2) throw ConfigError("ModelSpec: only depth 2 is supported");
        } else {
            if (pm_widths.size() < 2) {
                throw ConfigError("ModelSpec: pixelmapper needs at least input and output widths");
            }
            for (const int w : pm_widths) {
                if (w < 1) throw ConfigError("ModelSpec: pixelmapper widths must be >= 1");
            }
            if (pm_widths.front() != 3 || pm_widths.back() != 3) {
                throw ConfigError("ModelSpec: pixelmapper must map 3 -> 3 channels");
            }
        }
    }
};

template <class T>
struct Model {
    ModelSpec spec;
    LayerStack<T> stack;
};

namespace detail {

template <class T>
int add_conv(LayerStack<T>& s, const std::string& name, int in_ch, int out_ch, int k, int pad,
             int input) {
    ConvParams<T> p;
    p.weights = Tensor4<T>(out_ch, in_ch, k, k);
    p.bias.assign(out_ch, T(0));
    p.stride = 1;
    p.padding = pad;
    s.params.push_back(Param<T>{name, std::move(p)});
    s.layers.push_back(LayerDesc{LayerKind::kConv, input, -1, static_cast<int>(s.params.size()) - 1});
    return static_cast<int>(s.layers.size()) - 1;
}

template <class T>
int add_relu(LayerStack<T>& s, int input) {
    s.layers.push_back(LayerDesc{LayerKind::kRelu, input, -1, -1});
    return static_cast<int>(s.layers.size()) - 1;
}

template <class T>
int add_pool(LayerStack<T>& s, int input) {
    s.layers.push_back(LayerDesc{LayerKind::kPool, input, -1, -1});
    return static_cast<int>(s.layers.size()) - 1;
}

template <class T>
int add_upconv(LayerStack<T>& s, const std::string& name, int in_ch, int input) {
    ConvParams<T> p;
    p.weights = Tensor4<T>(in_ch / 2, in_ch, 2, 2);
    p.bias.assign(in_ch / 2, T(0));
    p.stride = 2;
    p.padding = 0;
    s.params.push_back(Param<T>{name, std::move(p)});
    s.layers.push_back(
        LayerDesc{LayerKind::kUpconv, input, -1, static_cast<int>(s.params.size()) - 1});
    return static_cast<int>(s.layers.size()) - 1;
}

template <class T>
int add_concat(LayerStack<T>& s, int input, int skip) {
    s.layers.push_back(LayerDesc{LayerKind::kConcat, input, skip, -1});
    return static_cast<int>(s.layers.size()) - 1;
}

// Two same-padded 3x3 convolutions, each followed by ReLU.
template <class T>
int add_double_conv(LayerStack<T>& s, const std::string& prefix, int in_ch, int out_ch,
                    int input) {
    int node = add_conv(s, prefix + ".conv1", in_ch, out_ch, 3, 1, input);
    node = add_relu(s, node);
    node = add_conv(s, prefix + ".conv2", out_ch, out_ch, 3, 1, node);
    return add_relu(s, node);
}

}  // namespace detail

/// Two contraction blocks, a bottleneck, and two expansion blocks with skip
/// concatenations; channels double per contraction and halve per up
/// convolution; a linear 1x1 convolution maps the final feature map to RGB.
template <class T>
Model<T> build_unet(const ModelSpec& spec) {
    spec.validate();
    if (spec.kind != ModelKind::kUnet) throw ConfigError("build_unet: spec.kind must be unet");
    const int b = spec.base_channels;

    Model<T> m;
    m.spec = spec;
    LayerStack<T>& s = m.stack;
    s.spatial_divisor = 4;  // two pooling stages

    const int enc1 = detail::add_double_conv(s, "enc1", 3, b, -1);
    const int pool1 = detail::add_pool(s, enc1);
    const int enc2 = detail::add_double_conv(s, "enc2", b, 2 * b, pool1);
    const int pool2 = detail::add_pool(s, enc2);
    const int bottleneck = detail::add_double_conv(s, "bottleneck", 2 * b, 4 * b, pool2);
    const int up1 = detail::add_upconv(s, "up1", 4 * b, bottleneck);
    const int cat1 = detail::add_concat(s, up1, enc2);
    const int dec1 = detail::add_double_conv(s, "dec1", 4 * b, 2 * b, cat1);
    const int up2 = detail::add_upconv(s, "up2", 2 * b, dec1);
    const int cat2 = detail::add_concat(s, up2, enc1);
    const int dec2 = detail::add_double_conv(s, "dec2", 2 * b, b, cat2);
    detail::add_conv(s, "final", b, 3, 1, 0, dec2);
    return m;
}

/// StainNet-style stack of 1x1 convolutions with ReLU between and a linear
/// final layer; pixel-local by construction, so spatial dims are free.
template <class T>
Model<T> build_pixelmapper(const ModelSpec& spec) {
    spec.validate();
    if (spec.kind != ModelKind::kPixelMapper) {
        throw ConfigError("build_pixelmapper: spec.kind must be pixelmapper");
    }
    Model<T> m;
    m.spec = spec;
    LayerStack<T>& s = m.stack;
    s.spatial_divisor = 1;

    int node = -1;
    const auto& widths = spec.pm_widths;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        node = detail::add_conv(s, "pm" + std::to_string(i + 1), widths[i], widths[i + 1], 1, 0,
                                node);
        if (i + 2 < widths.size()) node = detail::add_relu(s, node);
    }
    return m;
}

template <class T>
Model<T> build_model(const ModelSpec& spec) {
    return spec.kind == ModelKind::kUnet ? build_unet<T>(spec) : build_pixelmapper<T>(spec);
}

template <class T>
Model<T> init_model(const ModelSpec& spec, const InitSpec& init) {
    Model<T> m = build_model<T>(spec);
    init_params(init, m.stack);
    return m;
}

/// Inference on a [0,1] image batch; the output is clamped back to [0,1].
/// Clamping is the only nonlinearity after the final 1x1 layer, and is not
/// applied during training.
template <class T>
Tensor4<T> infer(const Model<T>& model, const Tensor4<T>& image) {
    if (image.c != 3) {
        throw ShapeError("infer: expected 3-channel input, got " + std::to_string(image.c));
    }
    if (model.spec.kind == ModelKind::kUnet && (image.h % 4 != 0 || image.w % 4 != 0)) {
        throw ShapeError("infer: unet input dims " + std::to_string(image.h) + "x" +
                         std::to_string(image.w) +
                         " must be divisible by 4; tile or pad the image first");
    }
    Tensor4<T> out = model.stack.forward(image);
    for (auto& v : out.data) v = std::min(T(1), std::max(T(0), v));
    if (!out.all_finite()) throw NumericError("infer: non-finite model output");
    return out;
}

}  // namespace stainbench
