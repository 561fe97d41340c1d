#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bcos/common.hpp"
#include "bcos/tensor.hpp"

namespace bcos {

/// Six-channel image encoding [r, g, b, 1-r, 1-g, 1-b]. Every pixel carries
/// the same total signal (channel pairs sum to 1, all six to 3), and its
/// color is recoverable from the direction of the pixel vector alone.
template <typename T>
Tensor<T> encode_rgb6(const Tensor<T>& rgb) {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) {
        throw ShapeError("encode_rgb6 expects [3, H, W], got " + shape_str(rgb.shape()));
    }
    const std::size_t plane = rgb.dim(1) * rgb.dim(2);
    for (std::size_t i = 0; i < rgb.numel(); ++i) {
        if (!(rgb[i] >= T(0) && rgb[i] <= T(1))) {
            throw ValueError("encode_rgb6 input value " + std::to_string(double(rgb[i])) +
                             " at flat index " + std::to_string(i) + " outside [0, 1]");
        }
    }
    Tensor<T> out(Shape{6, rgb.dim(1), rgb.dim(2)});
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            const T v = rgb[c * plane + i];
            out[c * plane + i] = v;
            out[(c + 3) * plane + i] = T(1) - v;
        }
    }
    return out;
}

/// First three channels of an encoded image.
template <typename T>
Tensor<T> decode_rgb6(const Tensor<T>& enc) {
    if (enc.rank() != 3 || enc.dim(0) != 6) {
        throw ShapeError("decode_rgb6 expects [6, H, W], got " + shape_str(enc.shape()));
    }
    const std::size_t plane = enc.dim(1) * enc.dim(2);
    Tensor<T> out(Shape{3, enc.dim(1), enc.dim(2)});
    std::copy_n(enc.values().begin(), 3 * plane, out.values().begin());
    return out;
}

/// True when channel pairs sum to exactly 1 (hence all six to exactly 3).
template <typename T>
bool encoding_sums_exact(const Tensor<T>& enc) {
    if (enc.rank() != 3 || enc.dim(0) != 6) return false;
    const std::size_t plane = enc.dim(1) * enc.dim(2);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            if (enc[c * plane + i] + enc[(c + 3) * plane + i] != T(1)) return false;
        }
    }
    return true;
}

/// Color-and-opacity rendering of an effective weight row: color from the
/// direction of each channel pair, opacity from the pixel vector magnitude.
template <typename T>
struct ExplanationImage {
    Tensor<T> rgb;    // [3, H, W] in [0, 1]
    Tensor<T> alpha;  // [H, W] in [0, 1]
};

/// Decode a [6, H, W] row into colors: for each pair (w_c, w_{c+3}) the
/// channel value is pos(w_c) / (pos(w_c) + pos(w_{c+3}) + 1e-12); pairs with
/// no positive entry carry no angle information and decode to neutral 0.5.
/// Alpha is the pixel norm scaled by the given percentile of norms over the
/// image and clipped to [0, 1].
template <typename T>
ExplanationImage<T> decode_row_to_color(const Tensor<T>& row, double percentile = 99.9) {
    if (row.rank() != 3 || row.dim(0) != 6) {
        throw ShapeError("decode_row_to_color expects [6, H, W], got " +
                         shape_str(row.shape()));
    }
    const std::size_t h = row.dim(1), w = row.dim(2), plane = h * w;
    ExplanationImage<T> img;
    img.rgb = Tensor<T>::zeros(Shape{3, h, w});
    img.alpha = Tensor<T>::zeros(Shape{h, w});

    std::vector<T> norms(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        T acc = T(0);
        for (std::size_t c = 0; c < 6; ++c) {
            const T v = row[c * plane + i];
            acc += v * v;
        }
        norms[i] = std::sqrt(acc);
    }
    std::vector<T> sorted = norms;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t rank = std::min<std::size_t>(
        plane - 1,
        static_cast<std::size_t>(
            std::max(0.0, std::ceil(percentile / 100.0 * static_cast<double>(plane)) - 1.0)));
    const T norm_ref = sorted[rank];

    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            const T a = row[c * plane + i];
            const T b = row[(c + 3) * plane + i];
            T v;
            if (a <= T(0) && b <= T(0)) {
                v = T(0.5);
            } else {
                const T pa = std::max(a, T(0));
                const T pb = std::max(b, T(0));
                v = pa / (pa + pb + T(1e-12));
            }
            img.rgb[c * plane + i] = v;
        }
        img.alpha[i] = norm_ref > T(0)
                           ? std::min(T(1), std::max(T(0), norms[i] / norm_ref))
                           : T(0);
    }
    return img;
}

}  // namespace bcos
