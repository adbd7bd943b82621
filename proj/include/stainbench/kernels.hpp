#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "stainbench/tensor.hpp"

namespace stainbench {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline int thread_num() {
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}

namespace detail {

template <class T>
inline void axpy_span(T* acc, T a, const T* x, int len) {
#pragma omp simd
    for (int i = 0; i < len; ++i) acc[i] += a * x[i];
}

// 4 source rows per pass: amortizes the accumulator load/store traffic
template <class T>
inline void axpy4_span(T* acc, const T* coef, const T* x0, const T* x1, const T* x2, const T* x3,
                       int len) {
    const T a0 = coef[0], a1 = coef[1], a2 = coef[2], a3 = coef[3];
#pragma omp simd
    for (int i = 0; i < len; ++i) {
        acc[i] += a0 * x0[i] + a1 * x1[i] + a2 * x2[i] + a3 * x3[i];
    }
}

template <class T>
inline T dot_span(const T* a, const T* b, int len) {
    T s = T(0);
#pragma omp simd reduction(+ : s)
    for (int i = 0; i < len; ++i) s += a[i] * b[i];
    return s;
}

// 4 dot products sharing one left-hand row
template <class T>
inline void dot4_span(const T* a, const T* b0, const T* b1, const T* b2, const T* b3, int len,
                      T* out) {
    T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
#pragma omp simd reduction(+ : s0, s1, s2, s3)
    for (int i = 0; i < len; ++i) {
        s0 += a[i] * b0[i];
        s1 += a[i] * b1[i];
        s2 += a[i] * b2[i];
        s3 += a[i] * b3[i];
    }
    out[0] = s0;
    out[1] = s1;
    out[2] = s2;
    out[3] = s3;
}

}  // namespace detail

/// Weights are (out_ch, in_ch, kh, kw); bias has out_ch entries.
/// conv2d accepts 1x1 and 3x3 kernels; the 2x2 stride-2 shape is reserved for
/// the transposed convolution.
template <class T>
struct ConvParams {
    Tensor4<T> weights;
    std::vector<T> bias;
    int stride = 1;
    int padding = 0;

    int out_ch() const { return weights.n; }
    int in_ch() const { return weights.c; }
    int kernel() const { return weights.h; }

    void validate_square() const {
        if (weights.h != weights.w) {
            throw ShapeError("ConvParams: kernel must be square, got kh=" + std::to_string(weights.h) +
                             " kw=" + std::to_string(weights.w));
        }
        if (bias.size() != static_cast<std::size_t>(weights.n)) {
            throw ShapeError("ConvParams: bias length " + std::to_string(bias.size()) +
                             " != out_ch " + std::to_string(weights.n));
        }
        if (stride < 1) throw ShapeError("ConvParams: stride must be positive");
        if (padding < 0) throw ShapeError("ConvParams: padding must be non-negative");
    }

    template <class U>
    ConvParams<U> cast() const {
        return ConvParams<U>{weights.template cast<U>(), std::vector<U>(bias.begin(), bias.end()),
                             stride, padding};
    }
};

using ConvParamsF = ConvParams<float>;
using ConvParamsD = ConvParams<double>;

template <class T>
struct ConvGrads {
    Tensor4<T> input;
    Tensor4<T> weights;
    std::vector<T> bias;
};

enum class ConvAlgo { kIm2col, kDirect };

namespace detail {

template <class T>
inline void check_conv_input(const Tensor4<T>& in, const ConvParams<T>& p, bool forward) {
    p.validate_square();
    const int k = p.kernel();
    // the networks use 1x1 and 3x3 kernels; forward additionally accepts the
    // 2x2 stride-2 shape so it can act as the adjoint of upconv2x2
    if (k != 1 && k != 3 && !(forward && k == 2)) {
        throw ShapeError("conv2d: kernel size must be 1 or 3, got " + std::to_string(k));
    }
    if (in.c != p.in_ch()) {
        throw ShapeError("conv2d: input channels " + std::to_string(in.c) + " != weight in_ch " +
                         std::to_string(p.in_ch()));
    }
}

inline std::pair<int, int> conv_out_dims(int h, int w, int k, int stride, int padding) {
    const int ny = h + 2 * padding - k;
    const int nx = w + 2 * padding - k;
    if (ny < 0 || nx < 0 || ny % stride != 0 || nx % stride != 0) {
        throw ShapeError("conv2d: spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                         " incompatible with kernel " + std::to_string(k) + " stride " +
                         std::to_string(stride) + " padding " + std::to_string(padding));
    }
    return {ny / stride + 1, nx / stride + 1};
}

// Number of output rows per im2col chunk so the K x (rows * OW) buffer stays
// around 4 MB.
inline int im2col_chunk_rows(int kdim, int ow_count, int oh_count, std::size_t elem_size) {
    const std::size_t target = std::size_t(4) << 20;
    const std::size_t row_bytes = static_cast<std::size_t>(kdim) * ow_count * elem_size;
    const int rows = static_cast<int>(std::max<std::size_t>(1, target / std::max<std::size_t>(1, row_bytes)));
    return std::min(rows, oh_count);
}

// Fills a K x (rows * OW) slab for output rows [oh0, oh0 + rows). Buffer rows
// are indexed by (ic, kh, kw) in weight order, so accumulations walk the
// flattened weight buffer linearly. Out-of-image taps are zero (same padding).
template <class T>
inline void fill_im2col_chunk(const Tensor4<T>& in, int n, int oh0, int rows, int k, int stride,
                              int padding, int ow_count, T* buf) {
    const int kdim = in.c * k * k;
#pragma omp parallel for schedule(static)
    for (int kk = 0; kk < kdim; ++kk) {
        const int ic = kk / (k * k);
        const int kh = (kk / k) % k;
        const int kw = kk % k;
        T* dst = buf + static_cast<std::size_t>(kk) * rows * ow_count;
        for (int r = 0; r < rows; ++r) {
            const int iy = (oh0 + r) * stride + kh - padding;
            T* drow = dst + static_cast<std::size_t>(r) * ow_count;
            if (iy < 0 || iy >= in.h) {
                std::fill(drow, drow + ow_count, T(0));
                continue;
            }
            const T* src = in.row(n, ic, iy);
            for (int ow = 0; ow < ow_count; ++ow) {
                const int ix = ow * stride + kw - padding;
                drow[ow] = (ix >= 0 && ix < in.w) ? src[ix] : T(0);
            }
        }
    }
}

template <class T>
Tensor4<T> conv2d_forward_im2col(const Tensor4<T>& in, const ConvParams<T>& p) {
    const int k = p.kernel();
    const auto [oh_count, ow_count] = conv_out_dims(in.h, in.w, k, p.stride, p.padding);
    Tensor4<T> out(in.n, p.out_ch(), oh_count, ow_count);
    const int kdim = in.c * k * k;

    if (k == 1 && p.stride == 1 && p.padding == 0) {
        // the buffer would be a copy of the input; accumulate over planes
        for (int n = 0; n < in.n; ++n) {
#pragma omp parallel for schedule(static)
            for (int oc = 0; oc < p.out_ch(); ++oc) {
                T* acc = out.plane(n, oc);
                const int plane = oh_count * ow_count;
                std::fill(acc, acc + plane, p.bias[oc]);
                for (int ic = 0; ic < in.c; ++ic) {
                    axpy_span(acc, p.weights.at(oc, ic, 0, 0), in.plane(n, ic), plane);
                }
            }
        }
        return out;
    }

    const int chunk_rows = im2col_chunk_rows(kdim, ow_count, oh_count, sizeof(T));
    std::vector<T> cols(static_cast<std::size_t>(kdim) * chunk_rows * ow_count);
    for (int n = 0; n < in.n; ++n) {
        for (int oh0 = 0; oh0 < oh_count; oh0 += chunk_rows) {
            const int rows = std::min(chunk_rows, oh_count - oh0);
            const int pchunk = rows * ow_count;
            fill_im2col_chunk(in, n, oh0, rows, k, p.stride, p.padding, ow_count, cols.data());
#pragma omp parallel for schedule(static)
            for (int oc = 0; oc < p.out_ch(); ++oc) {
                T* acc = out.plane(n, oc) + static_cast<std::size_t>(oh0) * ow_count;
                std::fill(acc, acc + pchunk, p.bias[oc]);
                const T* wrow = p.weights.data.data() + static_cast<std::size_t>(oc) * kdim;
                auto row = [&](int kk) {
                    return cols.data() + static_cast<std::size_t>(kk) * pchunk;
                };
                int kk = 0;
                for (; kk + 4 <= kdim; kk += 4) {
                    axpy4_span(acc, wrow + kk, row(kk), row(kk + 1), row(kk + 2), row(kk + 3),
                               pchunk);
                }
                for (; kk < kdim; ++kk) axpy_span(acc, wrow[kk], row(kk), pchunk);
            }
        }
    }
    return out;
}

template <class T>
Tensor4<T> conv2d_forward_direct(const Tensor4<T>& in, const ConvParams<T>& p) {
    const int k = p.kernel();
    const auto [oh_count, ow_count] = conv_out_dims(in.h, in.w, k, p.stride, p.padding);
    if (p.stride != 1) return conv2d_forward_im2col(in, p);  // direct kernel is stride-1 only
    Tensor4<T> out(in.n, p.out_ch(), oh_count, ow_count);

    for (int n = 0; n < in.n; ++n) {
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < p.out_ch(); ++oc) {
            for (int oh = 0; oh < oh_count; ++oh) {
                T* acc = out.row(n, oc, oh);
                std::fill(acc, acc + ow_count, p.bias[oc]);
            }
            for (int ic = 0; ic < in.c; ++ic) {
                for (int kh = 0; kh < k; ++kh) {
                    for (int kw = 0; kw < k; ++kw) {
                        const T a = p.weights.at(oc, ic, kh, kw);
                        const int lo = std::max(0, p.padding - kw);
                        const int hi = std::min(ow_count, in.w + p.padding - kw);
                        if (hi <= lo) continue;
                        for (int oh = 0; oh < oh_count; ++oh) {
                            const int iy = oh + kh - p.padding;
                            if (iy < 0 || iy >= in.h) continue;
                            axpy_span(out.row(n, oc, oh) + lo, a,
                                      in.row(n, ic, iy) + lo + kw - p.padding, hi - lo);
                        }
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace detail

/// Cross-correlation plus bias. The im2col path is the reference; the direct
/// path exists behind the same contract for performance comparison.
template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& in, const ConvParams<T>& p,
                          ConvAlgo algo = ConvAlgo::kIm2col) {
    detail::check_conv_input(in, p, true);
    return algo == ConvAlgo::kIm2col ? detail::conv2d_forward_im2col(in, p)
                                     : detail::conv2d_forward_direct(in, p);
}

template <class T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                             const ConvParams<T>& p) {
    detail::check_conv_input(input, p, false);
    if (p.stride != 1) throw ShapeError("conv2d_backward: only stride 1 is supported");
    const int k = p.kernel();
    const auto [oh_count, ow_count] = detail::conv_out_dims(input.h, input.w, k, p.stride, p.padding);
    if (grad_out.n != input.n || grad_out.c != p.out_ch() || grad_out.h != oh_count ||
        grad_out.w != ow_count) {
        throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape() + " != expected " +
                         Tensor4<T>::shape_str(input.n, p.out_ch(), oh_count, ow_count));
    }

    ConvGrads<T> g;
    g.input = Tensor4<T>(input.n, input.c, input.h, input.w);
    g.weights = Tensor4<T>(p.out_ch(), p.in_ch(), k, k);
    g.bias.assign(p.out_ch(), T(0));

    const int plane = oh_count * ow_count;
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < p.out_ch(); ++oc) {
        T s = T(0);
        for (int n = 0; n < grad_out.n; ++n) {
            const T* go = grad_out.plane(n, oc);
            for (int i = 0; i < plane; ++i) s += go[i];
        }
        g.bias[oc] = s;
    }

    // Both remaining gradients run off the same K x P chunks the forward pass
    // uses: grad_weights is GO . cols^T (one long dot per weight cell) and
    // grad_input gathers from gcol = W^T . GO. Chunks are sequential and each
    // output cell is owned by one loop index, so the result does not depend
    // on the thread count.
    const int kdim = input.c * k * k;
    const int chunk_rows = detail::im2col_chunk_rows(kdim, ow_count, oh_count, sizeof(T));
    const bool trivial_cols = k == 1 && p.padding == 0;  // buffer would copy the input
    std::vector<T> cols(trivial_cols ? 0
                                     : static_cast<std::size_t>(kdim) * chunk_rows * ow_count);
    std::vector<T> gcol(static_cast<std::size_t>(kdim) * chunk_rows * ow_count);

    for (int n = 0; n < input.n; ++n) {
        for (int oh0 = 0; oh0 < oh_count; oh0 += chunk_rows) {
            const int rows = std::min(chunk_rows, oh_count - oh0);
            const int pchunk = rows * ow_count;
            if (!trivial_cols) {
                detail::fill_im2col_chunk(input, n, oh0, rows, k, p.stride, p.padding, ow_count,
                                          cols.data());
            }
            auto col_row = [&](int kk) {
                return trivial_cols
                           ? input.plane(n, kk) + static_cast<std::size_t>(oh0) * ow_count
                           : cols.data() + static_cast<std::size_t>(kk) * pchunk;
            };

#pragma omp parallel for schedule(static)
            for (int oc = 0; oc < p.out_ch(); ++oc) {
                const T* go = grad_out.plane(n, oc) + static_cast<std::size_t>(oh0) * ow_count;
                T* gw = g.weights.data.data() + static_cast<std::size_t>(oc) * kdim;
                T partial[4];
                int kk = 0;
                for (; kk + 4 <= kdim; kk += 4) {
                    detail::dot4_span(go, col_row(kk), col_row(kk + 1), col_row(kk + 2),
                                      col_row(kk + 3), pchunk, partial);
                    for (int j = 0; j < 4; ++j) gw[kk + j] += partial[j];
                }
                for (; kk < kdim; ++kk) gw[kk] += detail::dot_span(go, col_row(kk), pchunk);
            }

#pragma omp parallel for schedule(static)
            for (int kk = 0; kk < kdim; ++kk) {
                T* dst = gcol.data() + static_cast<std::size_t>(kk) * pchunk;
                std::fill(dst, dst + pchunk, T(0));
                auto go_row = [&](int oc) {
                    return grad_out.plane(n, oc) + static_cast<std::size_t>(oh0) * ow_count;
                };
                auto wat = [&](int oc) {
                    return p.weights.data[static_cast<std::size_t>(oc) * kdim + kk];
                };
                int oc = 0;
                for (; oc + 4 <= p.out_ch(); oc += 4) {
                    const T coef[4] = {wat(oc), wat(oc + 1), wat(oc + 2), wat(oc + 3)};
                    detail::axpy4_span(dst, coef, go_row(oc), go_row(oc + 1), go_row(oc + 2),
                                       go_row(oc + 3), pchunk);
                }
                for (; oc < p.out_ch(); ++oc) {
                    detail::axpy_span(dst, wat(oc), go_row(oc), pchunk);
                }
            }

            // col2im gather: add each gcol row back into the input plane it
            // was sampled from, shifted by its kernel tap
#pragma omp parallel for schedule(static)
            for (int ic = 0; ic < input.c; ++ic) {
                T* gplane = g.input.plane(n, ic);
                for (int kh = 0; kh < k; ++kh) {
                    for (int kw = 0; kw < k; ++kw) {
                        const int kk = (ic * k + kh) * k + kw;
                        const T* src = gcol.data() + static_cast<std::size_t>(kk) * pchunk;
                        const int lo = std::max(0, kw - p.padding);
                        const int hi = std::min(input.w, ow_count + kw - p.padding);
                        if (hi <= lo) continue;
                        for (int r = 0; r < rows; ++r) {
                            const int iy = oh0 + r + kh - p.padding;
                            if (iy < 0 || iy >= input.h) continue;
                            T* grow = gplane + static_cast<std::size_t>(iy) * input.w;
                            const T* srow = src + static_cast<std::size_t>(r) * ow_count;
#pragma omp simd
                            for (int ix = lo; ix < hi; ++ix) {
                                grow[ix] += srow[ix + p.padding - kw];
                            }
                        }
                    }
                }
            }
        }
    }
    return g;
}

/// Winner positions of a 2x2 max pool; offsets are flat indices into the
/// input (h, w) plane of the matching (batch, channel) slot.
struct ArgmaxMask {
    int n = 0, c = 0, h = 0, w = 0;  // output dims
    int in_h = 0, in_w = 0;
    std::vector<std::int32_t> winner;
};

template <class T>
struct PoolResult {
    Tensor4<T> output;
    ArgmaxMask mask;
};

template <class T>
PoolResult<T> maxpool2x2_forward(const Tensor4<T>& in) {
    if (in.h % 2 != 0 || in.w % 2 != 0) {
        throw ShapeError("maxpool2x2_forward: spatial dims must be even, got " +
                         std::to_string(in.h) + "x" + std::to_string(in.w) +
                         "; pad the input first");
    }
    const int oh_count = in.h / 2, ow_count = in.w / 2;
    PoolResult<T> r{Tensor4<T>(in.n, in.c, oh_count, ow_count),
                    ArgmaxMask{in.n, in.c, oh_count, ow_count, in.h, in.w,
                               std::vector<std::int32_t>(static_cast<std::size_t>(in.n) * in.c *
                                                         oh_count * ow_count)}};
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < in.n; ++n) {
        for (int ic = 0; ic < in.c; ++ic) {
            const T* src = in.plane(n, ic);
            T* dst = r.output.plane(n, ic);
            std::int32_t* win =
                r.mask.winner.data() +
                (static_cast<std::size_t>(n) * in.c + ic) * oh_count * ow_count;
            for (int oy = 0; oy < oh_count; ++oy) {
                for (int ox = 0; ox < ow_count; ++ox) {
                    // ties break to the first position in row-major order
                    int best = (2 * oy) * in.w + 2 * ox;
                    T best_v = src[best];
                    const int cand[3] = {best + 1, best + in.w, best + in.w + 1};
                    for (const int idx : cand) {
                        if (src[idx] > best_v) {
                            best_v = src[idx];
                            best = idx;
                        }
                    }
                    dst[oy * ow_count + ox] = best_v;
                    win[oy * ow_count + ox] = best;
                }
            }
        }
    }
    return r;
}

template <class T>
Tensor4<T> maxpool2x2_backward(const Tensor4<T>& grad_out, const ArgmaxMask& mask) {
    if (grad_out.n != mask.n || grad_out.c != mask.c || grad_out.h != mask.h ||
        grad_out.w != mask.w) {
        throw ShapeError("maxpool2x2_backward: grad_out shape " + grad_out.shape() +
                         " != mask shape " +
                         Tensor4<T>::shape_str(mask.n, mask.c, mask.h, mask.w));
    }
    Tensor4<T> gin(mask.n, mask.c, mask.in_h, mask.in_w);
    const int plane = mask.h * mask.w;
#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < mask.n; ++n) {
        for (int ic = 0; ic < mask.c; ++ic) {
            const T* go = grad_out.plane(n, ic);
            T* gi = gin.plane(n, ic);
            const std::int32_t* win =
                mask.winner.data() + (static_cast<std::size_t>(n) * mask.c + ic) * plane;
            for (int i = 0; i < plane; ++i) gi[win[i]] += go[i];
        }
    }
    return gin;
}

namespace detail {

template <class T>
inline void check_upconv_input(const Tensor4<T>& in, const ConvParams<T>& p) {
    p.validate_square();
    if (p.kernel() != 2 || p.stride != 2 || p.padding != 0) {
        throw ShapeError("upconv2x2: requires 2x2 kernel, stride 2, padding 0");
    }
    if (in.c % 2 != 0) {
        throw ShapeError("upconv2x2: input channel count " + std::to_string(in.c) +
                         " must be even");
    }
    if (in.c != p.in_ch()) {
        throw ShapeError("upconv2x2: input channels " + std::to_string(in.c) +
                         " != weight in_ch " + std::to_string(p.in_ch()));
    }
    if (p.out_ch() != in.c / 2) {
        throw ShapeError("upconv2x2: out_ch " + std::to_string(p.out_ch()) +
                         " must halve input channels " + std::to_string(in.c));
    }
}

}  // namespace detail

/// Transposed convolution, 2x2 kernel, stride 2: doubles spatial dims and
/// halves channels. Output element (oh, ow) receives exactly one kernel tap
/// from input element (oh/2, ow/2).
template <class T>
Tensor4<T> upconv2x2_forward(const Tensor4<T>& in, const ConvParams<T>& p) {
    detail::check_upconv_input(in, p);
    Tensor4<T> out(in.n, p.out_ch(), in.h * 2, in.w * 2);
    for (int n = 0; n < in.n; ++n) {
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < p.out_ch(); ++oc) {
            for (int oh = 0; oh < out.h; ++oh) {
                const int iy = oh >> 1;
                const int kh = oh & 1;
                T* acc = out.row(n, oc, oh);
                std::fill(acc, acc + out.w, p.bias[oc]);
                for (int ic = 0; ic < in.c; ++ic) {
                    const T w0 = p.weights.at(oc, ic, kh, 0);
                    const T w1 = p.weights.at(oc, ic, kh, 1);
                    const T* src = in.row(n, ic, iy);
#pragma omp simd
                    for (int iw = 0; iw < in.w; ++iw) {
                        acc[2 * iw] += w0 * src[iw];
                        acc[2 * iw + 1] += w1 * src[iw];
                    }
                }
            }
        }
    }
    return out;
}

template <class T>
ConvGrads<T> upconv2x2_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input,
                                const ConvParams<T>& p) {
    detail::check_upconv_input(input, p);
    if (grad_out.n != input.n || grad_out.c != p.out_ch() || grad_out.h != input.h * 2 ||
        grad_out.w != input.w * 2) {
        throw ShapeError("upconv2x2_backward: grad_out shape " + grad_out.shape() +
                         " != expected " +
                         Tensor4<T>::shape_str(input.n, p.out_ch(), input.h * 2, input.w * 2));
    }

    ConvGrads<T> g;
    g.input = Tensor4<T>(input.n, input.c, input.h, input.w);
    g.weights = Tensor4<T>(p.out_ch(), p.in_ch(), 2, 2);
    g.bias.assign(p.out_ch(), T(0));

    const int plane = grad_out.h * grad_out.w;
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < p.out_ch(); ++oc) {
        T s = T(0);
        for (int n = 0; n < grad_out.n; ++n) {
            const T* go = grad_out.plane(n, oc);
            for (int i = 0; i < plane; ++i) s += go[i];
        }
        g.bias[oc] = s;
    }

#pragma omp parallel for schedule(static)
    for (int flat = 0; flat < p.out_ch() * input.c; ++flat) {
        const int oc = flat / input.c;
        const int ic = flat % input.c;
        for (int kh = 0; kh < 2; ++kh) {
            for (int kw = 0; kw < 2; ++kw) {
                T s = T(0);
                for (int n = 0; n < input.n; ++n) {
                    for (int iy = 0; iy < input.h; ++iy) {
                        const T* go = grad_out.row(n, oc, 2 * iy + kh) + kw;
                        const T* src = input.row(n, ic, iy);
#pragma omp simd reduction(+ : s)
                        for (int iw = 0; iw < input.w; ++iw) s += go[2 * iw] * src[iw];
                    }
                }
                g.weights.at(oc, ic, kh, kw) = s;
            }
        }
    }

#pragma omp parallel for schedule(static) collapse(2)
    for (int n = 0; n < input.n; ++n) {
        for (int ic = 0; ic < input.c; ++ic) {
            for (int oc = 0; oc < p.out_ch(); ++oc) {
                for (int kh = 0; kh < 2; ++kh) {
                    const T w0 = p.weights.at(oc, ic, kh, 0);
                    const T w1 = p.weights.at(oc, ic, kh, 1);
                    for (int iy = 0; iy < input.h; ++iy) {
                        T* gi = g.input.row(n, ic, iy);
                        const T* go = grad_out.row(n, oc, 2 * iy + kh);
#pragma omp simd
                        for (int iw = 0; iw < input.w; ++iw) {
                            gi[iw] += w0 * go[2 * iw] + w1 * go[2 * iw + 1];
                        }
                    }
                }
            }
        }
    }
    return g;
}

template <class T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
        throw ShapeError("concat_channels: inputs " + a.shape() + " and " + b.shape() +
                         " must agree on batch and spatial dims");
    }
    Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
    const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    for (int n = 0; n < a.n; ++n) {
        std::memcpy(out.plane(n, 0), a.plane(n, 0), plane * a.c * sizeof(T));
        std::memcpy(out.plane(n, a.c), b.plane(n, 0), plane * b.c * sizeof(T));
    }
    return out;
}

template <class T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& x, int c_first) {
    if (c_first < 1 || c_first >= x.c) {
        throw ShapeError("split_channels: split point " + std::to_string(c_first) +
                         " outside channel range 1.." + std::to_string(x.c - 1));
    }
    Tensor4<T> a(x.n, c_first, x.h, x.w);
    Tensor4<T> b(x.n, x.c - c_first, x.h, x.w);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (int n = 0; n < x.n; ++n) {
        std::memcpy(a.plane(n, 0), x.plane(n, 0), plane * a.c * sizeof(T));
        std::memcpy(b.plane(n, 0), x.plane(n, c_first), plane * b.c * sizeof(T));
    }
    return {std::move(a), std::move(b)};
}

template <class T>
Tensor4<T> relu_forward(const Tensor4<T>& in) {
    Tensor4<T> out(in.n, in.c, in.h, in.w);
    const std::size_t total = in.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(total); ++i) {
        out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
    }
    return out;
}

/// Subgradient at exactly 0 is 0.
template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input) {
    if (!grad_out.same_shape(input)) {
        throw ShapeError("relu_backward: grad_out shape " + grad_out.shape() + " != input shape " +
                         input.shape());
    }
    Tensor4<T> gin(input.n, input.c, input.h, input.w);
    const std::size_t total = input.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(total); ++i) {
        gin.data[i] = input.data[i] > T(0) ? grad_out.data[i] : T(0);
    }
    return gin;
}

}  // namespace stainbench
