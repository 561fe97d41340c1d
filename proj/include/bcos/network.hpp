#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bcos/common.hpp"
#include "bcos/layers.hpp"
#include "bcos/tensor.hpp"

namespace bcos {

enum class InputEncoding { Rgb6, Raw };

inline std::string to_string(InputEncoding e) {
    return e == InputEncoding::Rgb6 ? "rgb6" : "raw";
}

inline InputEncoding input_encoding_from(const std::string& s) {
    if (s == "rgb6") return InputEncoding::Rgb6;
    if (s == "raw") return InputEncoding::Raw;
    throw ValueError("unknown input encoding '" + s + "'");
}

struct ConvLayerSpec {
    std::size_t in_channels = 0;
    std::size_t units = 0;     // output channels after MaxOut
    std::size_t maxout = 1;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
    double out_scale = 1.0;
};

/// Architecture description: an all-convolutional stack whose last layer
/// emits one channel per class; logits are the globally sum-pooled final map
/// divided by the temperature. The shared output bias enters only in the
/// loss/probability computation, keeping logits exactly zero for zero input.
struct NetworkSpec {
    std::vector<ConvLayerSpec> layers;
    double cos_exponent = 2.0;
    double temperature = 1.0;
    double output_bias = 0.0;
    std::size_t num_classes = 0;
    InputEncoding encoding = InputEncoding::Rgb6;

    void validate() const {
        if (layers.empty()) throw ValueError("network spec has no layers");
        if (cos_exponent < 1.0) throw ValueError("cos exponent must be >= 1");
        if (temperature <= 0.0) throw ValueError("temperature must be positive");
        if (num_classes < 2) throw ValueError("network needs at least 2 classes");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const ConvLayerSpec& l = layers[i];
            if (l.units == 0 || l.maxout == 0 || l.kernel == 0 || l.stride == 0) {
                throw ValueError("layer " + std::to_string(i) + " has a zero field");
            }
            if (i > 0 && l.in_channels != layers[i - 1].units) {
                throw ValueError("layer " + std::to_string(i) + " expects " +
                                 std::to_string(l.in_channels) + " input channels but layer " +
                                 std::to_string(i - 1) + " produces " +
                                 std::to_string(layers[i - 1].units));
            }
        }
        if (layers.front().in_channels != input_channels()) {
            throw ValueError("first layer channel count does not match encoding");
        }
        if (layers.back().units != num_classes) {
            throw ValueError("final layer produces " + std::to_string(layers.back().units) +
                             " channels but the network declares " +
                             std::to_string(num_classes) + " classes");
        }
    }

    std::size_t input_channels() const {
        return encoding == InputEncoding::Rgb6 ? 6 : layers.front().in_channels;
    }
};

/// Shared output bias that yields uniform class probabilities for zero input:
/// sigmoid(b) = 1/K.
inline double output_bias_for_classes(std::size_t num_classes) {
    const double p = 1.0 / static_cast<double>(num_classes);
    return std::log(p / (1.0 - p));
}

/// The 9-layer 32x32 architecture over 6-channel input.
inline NetworkSpec build_cifar9(double cos_exponent, std::size_t maxout) {
    constexpr std::size_t kKernel[9] = {3, 3, 3, 3, 3, 3, 3, 3, 1};
    constexpr std::size_t kStride[9] = {1, 1, 2, 1, 1, 2, 1, 1, 1};
    constexpr std::size_t kPad[9] = {1, 1, 1, 1, 1, 1, 1, 1, 0};
    constexpr std::size_t kOut[9] = {64, 64, 128, 128, 128, 256, 256, 256, 10};
    NetworkSpec spec;
    spec.cos_exponent = cos_exponent;
    spec.temperature = temperature_for_plain_net(cos_exponent);
    spec.num_classes = 10;
    spec.output_bias = output_bias_for_classes(10);
    spec.encoding = InputEncoding::Rgb6;
    const double gamma = out_scale_for_plain_net(cos_exponent);
    std::size_t in_ch = 6;
    for (std::size_t i = 0; i < 9; ++i) {
        spec.layers.push_back(
            {in_ch, kOut[i], maxout, kKernel[i], kStride[i], kPad[i], gamma});
        in_ch = kOut[i];
    }
    spec.validate();
    return spec;
}

/// Small 4-layer stack for fast experiments: k = 3,3,3,1 with strides
/// 1,2,2,1 (total downsampling 4), channel progression c, 2c, 2c, classes.
inline NetworkSpec build_tiny(double cos_exponent, std::size_t maxout, std::size_t channels,
                              std::size_t num_classes = 10,
                              InputEncoding encoding = InputEncoding::Rgb6,
                              std::size_t raw_in_channels = 6) {
    if (channels < 4) throw ValueError("tiny network needs at least 4 channels");
    NetworkSpec spec;
    spec.cos_exponent = cos_exponent;
    spec.temperature = temperature_for_plain_net(cos_exponent);
    spec.num_classes = num_classes;
    spec.output_bias = output_bias_for_classes(num_classes);
    spec.encoding = encoding;
    const double gamma = out_scale_for_plain_net(cos_exponent);
    const std::size_t in0 = encoding == InputEncoding::Rgb6 ? 6 : raw_in_channels;
    spec.layers.push_back({in0, channels, maxout, 3, 1, 1, gamma});
    spec.layers.push_back({channels, 2 * channels, maxout, 3, 2, 1, gamma});
    spec.layers.push_back({2 * channels, 2 * channels, maxout, 3, 2, 1, gamma});
    spec.layers.push_back({2 * channels, num_classes, maxout, 1, 1, 0, gamma});
    spec.validate();
    return spec;
}

template <typename T>
struct NetworkRun {
    Tensor<T> bound_input;                // tape handle of the input (if watched)
    std::vector<Tensor<T>> bound_weights; // tape handles of raw kernels (if watched)
    std::vector<Tensor<T>> layer_outputs; // post-MaxOut output of every layer
    Tensor<T> scores;                     // [N, classes] = sumpool(last)/temperature
};

struct RunOptions {
    bool watch_input = false;
    bool watch_weights = false;
    bool freeze_scaling = false;
};

/// Instantiated network: spec plus raw kernel tensors.
template <typename T>
class Network {
public:
    Network() = default;

    static Network create(NetworkSpec spec, std::uint64_t seed) {
        spec.validate();
        Network net;
        net.spec_ = std::move(spec);
        Rng rng(seed);
        for (const ConvLayerSpec& l : net.spec_.layers) {
            net.layers_.push_back(BcosConv<T>::create(
                l.in_channels, l.units, l.kernel, l.stride, l.padding, l.maxout,
                static_cast<T>(net.spec_.cos_exponent), static_cast<T>(l.out_scale), rng));
        }
        return net;
    }

    /// Build with externally supplied kernels (checkpoint load, precision
    /// conversion).
    static Network from_kernels(NetworkSpec spec, std::vector<Tensor<T>> kernels) {
        spec.validate();
        if (kernels.size() != spec.layers.size()) {
            throw ValueError("kernel count does not match layer count");
        }
        Network net;
        net.spec_ = std::move(spec);
        for (std::size_t i = 0; i < kernels.size(); ++i) {
            const ConvLayerSpec& l = net.spec_.layers[i];
            const Shape want{l.units * l.maxout, l.in_channels, l.kernel, l.kernel};
            if (kernels[i].shape() != want) {
                throw ShapeError("layer " + std::to_string(i) + " kernel shape " +
                                 shape_str(kernels[i].shape()) + " does not match spec " +
                                 shape_str(want));
            }
            BcosConv<T> c;
            c.kernel = std::move(kernels[i]);
            c.stride = l.stride;
            c.padding = l.padding;
            c.maxout = l.maxout;
            c.cos_exponent = static_cast<T>(net.spec_.cos_exponent);
            c.out_scale = static_cast<T>(l.out_scale);
            net.layers_.push_back(std::move(c));
        }
        return net;
    }

    const NetworkSpec& spec() const { return spec_; }
    std::size_t depth() const { return layers_.size(); }
    std::vector<BcosConv<T>>& layers() { return layers_; }
    const std::vector<BcosConv<T>>& layers() const { return layers_; }

    /// Forward over a batch [N, C, H, W]. With a tape, inputs and/or weights
    /// are watched per `opts`; freeze_scaling detaches all cosine rescalings
    /// so the recorded graph is linear in the input.
    NetworkRun<T> run(const Tensor<T>& x, Tape<T>* tape = nullptr,
                      RunOptions opts = {}) const {
        if (x.rank() != 4 || x.dim(1) != spec_.input_channels()) {
            throw ShapeError("network expects [N, " +
                             std::to_string(spec_.input_channels()) + ", H, W] (" +
                             to_string(spec_.encoding) + " encoding), got " +
                             shape_str(x.shape()));
        }
        NetworkRun<T> run;
        Tensor<T> h = x;
        if (tape && opts.watch_input) {
            h = tape->watch(x, "input");
            run.bound_input = h;
        }
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            Tensor<T> k = layers_[i].kernel;
            if (tape && opts.watch_weights) {
                k = tape->watch(k, "kernel" + std::to_string(i));
                run.bound_weights.push_back(k);
            }
            h = layers_[i].forward_with(k, h, opts.freeze_scaling);
            run.layer_outputs.push_back(h);
        }
        Tensor<T> pooled = reduce(reduce(h, 3, Reduce::Sum), 2, Reduce::Sum);  // [N, K]
        run.scores = scale(pooled, static_cast<T>(1.0 / spec_.temperature));
        return run;
    }

    /// Class scores [N, K] (pre-bias, zero for zero input).
    Tensor<T> logits(const Tensor<T>& x) const { return run(x).scores; }

private:
    NetworkSpec spec_;
    std::vector<BcosConv<T>> layers_;
};

}  // namespace bcos
