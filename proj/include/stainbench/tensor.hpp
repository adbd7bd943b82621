#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "stainbench/errors.hpp"

namespace stainbench {

/// Dense rank-4 array in (batch, channel, row, col) order, row-major.
/// Float is the training/inference scalar; the double instantiation exists
/// for gradient checking.
template <class T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4() = default;

    Tensor4(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
        if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1) {
            throw ShapeError("Tensor4: all dimensions must be >= 1, got (" + shape_str(n_, c_, h_, w_) + ")");
        }
        data.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0));
    }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    std::string shape() const { return shape_str(n, c, h, w); }

    std::size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
    }

    T& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
    T at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }

    /// Pointer to the contiguous h*w plane of one (batch, channel) slot.
    T* plane(int in, int ic) { return data.data() + index(in, ic, 0, 0); }
    const T* plane(int in, int ic) const { return data.data() + index(in, ic, 0, 0); }

    T* row(int in, int ic, int iy) { return data.data() + index(in, ic, iy, 0); }
    const T* row(int in, int ic, int iy) const { return data.data() + index(in, ic, iy, 0); }

    bool all_finite() const {
        for (const T v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    template <class U>
    Tensor4<U> cast() const {
        Tensor4<U> out(n, c, h, w);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    static std::string shape_str(int n_, int c_, int h_, int w_) {
        return std::to_string(n_) + "x" + std::to_string(c_) + "x" + std::to_string(h_) + "x" +
               std::to_string(w_);
    }
};

using Tensor = Tensor4<float>;
using TensorD = Tensor4<double>;

}  // namespace stainbench
