#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "bcos/common.hpp"
#include "bcos/network.hpp"
#include "bcos/tensor.hpp"

namespace bcos {

/// Target of a collapse: either one class score at the network output or one
/// scalar activation (flat index) in an intermediate layer's output.
struct CollapseTarget {
    enum class Kind { ClassScore, LayerNeuron };
    Kind kind = Kind::ClassScore;
    std::size_t layer = 0;   // for LayerNeuron: layer index in [0, depth)
    std::size_t index = 0;   // class index, or flat index into the layer output

    static CollapseTarget class_score(std::size_t c) {
        return {Kind::ClassScore, 0, c};
    }
    static CollapseTarget layer_neuron(std::size_t layer, std::size_t flat_index) {
        return {Kind::LayerNeuron, layer, flat_index};
    }
};

/// The effective input-dependent weight row for one target neuron, reshaped
/// to the input layout. Valid only at the input it was computed for; the dot
/// product with that input (plus bias) reproduces the target activation.
template <typename T>
struct DynamicLinearMap {
    Tensor<T> row;        // same shape as the input sample [C, H, W]
    T bias = T(0);        // shared output bias for class targets, else 0
    CollapseTarget target;
    Tensor<T> input;      // the input the map belongs to
    T activation = T(0);  // forward value of the target at `input`
};

/// Per-pixel channel-summed contributions of a dynamic linear map; the map
/// total plus bias equals the target activation.
template <typename T>
struct ContributionMap {
    Tensor<T> values;     // [H, W]
    T bias = T(0);
    CollapseTarget target;
    T activation = T(0);

    T total() const {
        T acc = T(0);
        for (const T v : values.values()) acc += v;
        return acc;
    }
};

/// Extract one row of the effective linear transform the network applies at
/// `x`: a forward pass with all cosine rescalings detached and MaxOut
/// selections fixed at their forward argmax, followed by one backward pass of
/// the chosen activation with respect to the input.
template <typename T>
DynamicLinearMap<T> collapse(const Network<T>& net, const Tensor<T>& x,
                             CollapseTarget target) {
    if (x.rank() != 3) {
        throw ShapeError("collapse expects a single sample [C, H, W], got " +
                         shape_str(x.shape()));
    }
    Tensor<T> batch = reshape(x, Shape{1, x.dim(0), x.dim(1), x.dim(2)});

    Tape<T> tape;
    RunOptions opts;
    opts.watch_input = true;
    opts.freeze_scaling = true;
    NetworkRun<T> run = net.run(batch, &tape, opts);

    Tensor<T> picked;
    if (target.kind == CollapseTarget::Kind::ClassScore) {
        if (target.index >= net.spec().num_classes) {
            throw ValueError("class index " + std::to_string(target.index) +
                             " out of range for " + std::to_string(net.spec().num_classes) +
                             " classes");
        }
        picked = pick(run.scores, target.index);
    } else {
        if (target.layer >= net.depth()) {
            throw ValueError("layer index " + std::to_string(target.layer) +
                             " out of range for depth " + std::to_string(net.depth()));
        }
        const Tensor<T>& out = run.layer_outputs[target.layer];
        if (target.index >= out.numel()) {
            throw ValueError("neuron index " + std::to_string(target.index) +
                             " out of range for layer output " + shape_str(out.shape()));
        }
        picked = pick(out, target.index);
    }
    tape.backward(picked);

    DynamicLinearMap<T> map;
    map.row = reshape(tape.gradient(run.bound_input), x.shape()).detached();
    map.bias = target.kind == CollapseTarget::Kind::ClassScore
                   ? static_cast<T>(net.spec().output_bias)
                   : T(0);
    map.target = target;
    map.input = x.clone();
    map.activation = picked[0];
    return map;
}

/// Channel-summed per-pixel products row * input.
template <typename T>
ContributionMap<T> contribution_map(const DynamicLinearMap<T>& map) {
    const Shape& s = map.row.shape();
    const std::size_t ch = s[0], h = s[1], w = s[2];
    ContributionMap<T> out;
    out.values = Tensor<T>::zeros(Shape{h, w});
    const std::vector<T>& r = map.row.values();
    const std::vector<T>& x = map.input.values();
    std::vector<T>& v = out.values.values();
    for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t i = 0; i < h * w; ++i) v[i] += r[c * h * w + i] * x[c * h * w + i];
    }
    out.bias = map.bias;
    out.target = map.target;
    out.activation = map.activation;
    return out;
}

/// Difference of two class contribution maps at the same input; the total
/// equals the score difference (the shared bias cancels).
template <typename T>
ContributionMap<T> delta_explanation(const DynamicLinearMap<T>& a,
                                     const DynamicLinearMap<T>& b) {
    if (a.input.shape() != b.input.shape() || a.input.values() != b.input.values()) {
        throw ValueError("delta explanation requires maps computed at the same input");
    }
    if (a.target.kind != b.target.kind || a.target.layer != b.target.layer) {
        throw ValueError("delta explanation requires maps for the same layer");
    }
    ContributionMap<T> ca = contribution_map(a);
    const ContributionMap<T> cb = contribution_map(b);
    for (std::size_t i = 0; i < ca.values.numel(); ++i) ca.values[i] -= cb.values[i];
    ca.bias = T(0);
    ca.activation = a.activation - b.activation;
    return ca;
}

/// One entry of an intermediate-neuron ranking: a channel, one of its most
/// activating inputs, and the collapse map at the activation's location.
template <typename T>
struct NeuronExplanation {
    std::size_t channel = 0;
    std::size_t sample_index = 0;
    T activation = T(0);
    DynamicLinearMap<T> map;
};

/// For every channel of layer `layer`, find the `top_k` most activating
/// inputs (activation = spatial maximum of the channel) and collapse each at
/// its argmax location. Returned entries are grouped by channel, strongest
/// first; ties resolve to the lower sample index.
template <typename T>
std::vector<NeuronExplanation<T>> intermediate_neuron_explanations(
    const Network<T>& net, const std::vector<Tensor<T>>& inputs, std::size_t layer,
    std::size_t top_k) {
    if (inputs.empty()) throw ValueError("neuron ranking needs a nonempty dataset");
    if (layer >= net.depth()) {
        throw ValueError("layer index " + std::to_string(layer) + " out of range");
    }

    struct Hit {
        T activation;
        std::size_t sample;
        std::size_t flat;  // argmax position within the layer output
    };
    std::vector<std::vector<Hit>> hits;  // per channel

    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const Tensor<T>& x = inputs[s];
        Tensor<T> batch = reshape(x, Shape{1, x.dim(0), x.dim(1), x.dim(2)});
        NetworkRun<T> run = net.run(batch);
        const Tensor<T>& out = run.layer_outputs[layer];
        const std::size_t channels = out.dim(1);
        const std::size_t plane = out.dim(2) * out.dim(3);
        if (hits.empty()) hits.resize(channels);
        for (std::size_t c = 0; c < channels; ++c) {
            T best = out[c * plane];
            std::size_t bi = 0;
            for (std::size_t i = 1; i < plane; ++i) {
                if (out[c * plane + i] > best) {
                    best = out[c * plane + i];
                    bi = i;
                }
            }
            hits[c].push_back({best, s, c * plane + bi});
        }
    }

    std::vector<NeuronExplanation<T>> result;
    for (std::size_t c = 0; c < hits.size(); ++c) {
        auto& hv = hits[c];
        std::stable_sort(hv.begin(), hv.end(),
                         [](const Hit& a, const Hit& b) { return a.activation > b.activation; });
        const std::size_t take = std::min(top_k, hv.size());
        for (std::size_t i = 0; i < take; ++i) {
            NeuronExplanation<T> e;
            e.channel = c;
            e.sample_index = hv[i].sample;
            e.activation = hv[i].activation;
            e.map = collapse(net, inputs[hv[i].sample],
                             CollapseTarget::layer_neuron(layer, hv[i].flat));
            result.push_back(std::move(e));
        }
    }
    return result;
}

}  // namespace bcos
