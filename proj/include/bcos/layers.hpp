#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "bcos/common.hpp"
#include "bcos/tensor.hpp"

namespace bcos {

inline constexpr double kNormEps = 1e-6;   // patch/input norm stabilizer
inline constexpr double kPowEps = 1e-12;   // keeps |cos|^(p) differentiable at 0

/// Rescale every row of [rows, cols] to unit Euclidean norm, differentiably.
/// Rows with norm below 1e-12 indicate dead initialization and are rejected.
template <typename T>
Tensor<T> unit_normalize_rows(const Tensor<T>& w) {
    if (w.rank() != 2) {
        throw ShapeError("unit_normalize_rows expects [rows, cols], got " +
                         shape_str(w.shape()));
    }
    Tensor<T> norms = sqrt(reduce(mul(w, w), 1, Reduce::Sum, /*keepdim=*/true));
    for (std::size_t r = 0; r < norms.numel(); ++r) {
        if (norms[r] < T(1e-12)) {
            throw ValueError("weight row " + std::to_string(r) +
                             " has near-zero norm and cannot be normalized");
        }
    }
    return div(w, norms);
}

/// Kernel variant: each [C, k, k] slice of [O, C, k, k] is normalized as a
/// flattened vector.
template <typename T>
Tensor<T> unit_normalize_kernel(const Tensor<T>& kernel) {
    if (kernel.rank() != 4) {
        throw ShapeError("unit_normalize_kernel expects [O, C, k, k], got " +
                         shape_str(kernel.shape()));
    }
    const Shape s = kernel.shape();
    Tensor<T> flat = reshape(kernel, Shape{s[0], s[1] * s[2] * s[3]});
    return reshape(unit_normalize_rows(flat), s);
}

namespace detail {

/// out = |cos|^(p-1) * lin with exact fast paths at p = 1 and p = 2. With
/// `freeze` the scaling is detached, making the result linear in the input.
template <typename T>
Tensor<T> cos_rescale(const Tensor<T>& lin, const Tensor<T>& cosine, T cos_exponent,
                      bool freeze) {
    if (cos_exponent == T(1)) return lin;
    Tensor<T> scaling = cos_exponent == T(2)
                            ? abs(cosine)
                            : pow_const(add(abs(cosine), T(kPowEps)), cos_exponent - T(1));
    if (freeze) scaling = scaling.detached();
    return mul(lin, scaling);
}

}  // namespace detail

/// Fully connected layer of cosine-rescaled linear units with optional MaxOut
/// groups. Weights are kept raw; unit-norm rows are derived in forward.
template <typename T>
struct BcosDense {
    Tensor<T> weight;          // [units * maxout, in]
    T cos_exponent = T(2);
    T out_scale = T(1);
    std::size_t maxout = 1;
    T norm_eps = T(kNormEps);

    static BcosDense create(std::size_t in, std::size_t units, std::size_t maxout_units,
                            T cos_exponent, T out_scale, Rng& rng) {
        if (cos_exponent < T(1)) throw ValueError("cos exponent must be >= 1");
        if (maxout_units == 0) throw ValueError("maxout must be >= 1");
        const T u = T(1) / std::sqrt(static_cast<T>(in));
        BcosDense d;
        d.weight = Tensor<T>::uniform(Shape{units * maxout_units, in}, rng, -u, u);
        d.cos_exponent = cos_exponent;
        d.out_scale = out_scale;
        d.maxout = maxout_units;
        return d;
    }

    std::size_t in_features() const { return weight.dim(1); }
    std::size_t out_features() const { return weight.dim(0) / maxout; }

    Tensor<T> forward(const Tensor<T>& x, bool freeze_scaling = false) const {
        return forward_with(weight, x, freeze_scaling);
    }

    /// `w` is the weight tensor to differentiate through (possibly a
    /// tape-bound handle of `weight`).
    Tensor<T> forward_with(const Tensor<T>& w, const Tensor<T>& x,
                           bool freeze_scaling) const {
        if (x.rank() != 2 || x.dim(1) != w.dim(1)) {
            throw ShapeError("dense input " + shape_str(x.shape()) +
                             " does not match weight " + shape_str(w.shape()));
        }
        Tensor<T> unit = unit_normalize_rows(w);
        Tensor<T> lin = matmul(x, transpose(unit));                       // [batch, U]
        Tensor<T> norm = sqrt(reduce(mul(x, x), 1, Reduce::Sum, true));   // [batch, 1]
        Tensor<T> denom = max_pair(norm, Tensor<T>::scalar(norm_eps));
        Tensor<T> cosine = div(lin, denom);
        Tensor<T> out = scale(detail::cos_rescale(lin, cosine, cos_exponent, freeze_scaling),
                              out_scale);
        return maxout > 1 ? bcos::maxout(out, maxout, 1) : out;
    }
};

/// Convolutional counterpart: kernel slices act as units over sliding
/// patches. The patch norm is stabilized as sqrt(sumpool(x^2) + eps^2) so
/// all-zero patches produce exactly zero output.
template <typename T>
struct BcosConv {
    Tensor<T> kernel;          // [units * maxout, C, k, k]
    std::size_t stride = 1;
    std::size_t padding = 0;
    T cos_exponent = T(2);
    T out_scale = T(1);
    std::size_t maxout = 1;
    T norm_eps = T(kNormEps);

    static BcosConv create(std::size_t in_ch, std::size_t units, std::size_t k,
                           std::size_t stride, std::size_t padding,
                           std::size_t maxout_units, T cos_exponent, T out_scale,
                           Rng& rng) {
        if (cos_exponent < T(1)) throw ValueError("cos exponent must be >= 1");
        if (maxout_units == 0) throw ValueError("maxout must be >= 1");
        const T u = T(1) / std::sqrt(static_cast<T>(in_ch * k * k));
        BcosConv c;
        c.kernel = Tensor<T>::uniform(Shape{units * maxout_units, in_ch, k, k}, rng, -u, u);
        c.stride = stride;
        c.padding = padding;
        c.cos_exponent = cos_exponent;
        c.out_scale = out_scale;
        c.maxout = maxout_units;
        return c;
    }

    std::size_t in_channels() const { return kernel.dim(1); }
    std::size_t out_channels() const { return kernel.dim(0) / maxout; }
    std::size_t kernel_size() const { return kernel.dim(2); }

    Tensor<T> forward(const Tensor<T>& x, bool freeze_scaling = false) const {
        return forward_with(kernel, x, freeze_scaling);
    }

    Tensor<T> forward_with(const Tensor<T>& k, const Tensor<T>& x,
                           bool freeze_scaling) const {
        Tensor<T> unit = unit_normalize_kernel(k);
        Tensor<T> lin = conv2d(x, unit, stride, padding);                  // [N, U, H', W']
        Tensor<T> sq = reduce(mul(x, x), 1, Reduce::Sum, true);            // [N, 1, H, W]
        Tensor<T> patch_sq = sumpool2d(sq, kernel_size(), stride, padding);
        Tensor<T> patch_norm = sqrt(add(patch_sq, norm_eps * norm_eps));   // [N, 1, H', W']
        Tensor<T> cosine = div(lin, patch_norm);
        Tensor<T> out = scale(detail::cos_rescale(lin, cosine, cos_exponent, freeze_scaling),
                              out_scale);
        return maxout > 1 ? bcos::maxout(out, maxout, 1) : out;
    }
};

/// MaxOut over consecutive groups of the last dimension.
template <typename T>
Tensor<T> maxout_reduce(const Tensor<T>& units, std::size_t m) {
    return maxout(units, m, units.rank() - 1);
}

/// Per-layer output scale for the plain (shallow) architectures:
/// log10(scale) = 1.5 * exponent - 1.75.
inline double out_scale_for_plain_net(double cos_exponent) {
    return std::pow(10.0, 1.5 * cos_exponent - 1.75);
}

/// Per-layer output scale for deep nets: s / sqrt(fan_in).
inline double out_scale_for_deep_net(double signal_scale, double fan_in) {
    return signal_scale / std::sqrt(fan_in);
}

/// Output temperature for the plain architectures, tabulated per exponent and
/// linearly interpolated in log10 space; clamped outside the tabulated range.
inline double temperature_for_plain_net(double cos_exponent) {
    static constexpr double bs[] = {1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5};
    static constexpr double log10t[] = {-3.0, -3.0, -2.0, 1.0, 2.0, 2.0, 3.0};
    constexpr std::size_t n = 7;
    if (cos_exponent <= bs[0]) return std::pow(10.0, log10t[0]);
    if (cos_exponent >= bs[n - 1]) return std::pow(10.0, log10t[n - 1]);
    for (std::size_t i = 1; i < n; ++i) {
        if (cos_exponent <= bs[i]) {
            const double f = (cos_exponent - bs[i - 1]) / (bs[i] - bs[i - 1]);
            return std::pow(10.0, log10t[i - 1] + f * (log10t[i] - log10t[i - 1]));
        }
    }
    return std::pow(10.0, log10t[n - 1]);
}

}  // namespace bcos
