#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "bcos/checkpoint.hpp"
#include "bcos/common.hpp"
#include "bcos/datasets.hpp"
#include "bcos/network.hpp"
#include "bcos/tensor.hpp"

namespace bcos {

/// Raised when the loss turns non-finite; the message names the earliest
/// non-finite tensor on the step's tape.
class NanLossError : public Error {
public:
    using Error::Error;
};

namespace detail {

template <typename T>
T softplus(T u) {
    return std::max(u, T(0)) + std::log1p(std::exp(-std::fabs(u)));
}

template <typename T>
T stable_sigmoid(T u) {
    if (u >= T(0)) return T(1) / (T(1) + std::exp(-u));
    const T e = std::exp(u);
    return e / (T(1) + e);
}

}  // namespace detail

/// One-vs-all binary cross entropy over sigmoid(score + bias), averaged over
/// batch and classes. Stable for scores far beyond +-50.
template <typename T>
Tensor<T> bce_one_vs_all_loss(const Tensor<T>& scores, const std::vector<int>& labels,
                              T bias) {
    if (scores.rank() != 2) {
        throw ShapeError("loss expects scores [batch, classes], got " +
                         shape_str(scores.shape()));
    }
    const std::size_t batch = scores.dim(0), classes = scores.dim(1);
    if (labels.size() != batch) {
        throw ShapeError("label count " + std::to_string(labels.size()) +
                         " does not match batch " + std::to_string(batch));
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes) {
            throw ValueError("label " + std::to_string(l) + " out of range for " +
                             std::to_string(classes) + " classes");
        }
    }

    const std::vector<T>& z = scores.values();
    T acc = T(0);
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t k = 0; k < classes; ++k) {
            const T u = z[i * classes + k] + bias;
            const bool hit = static_cast<std::size_t>(labels[i]) == k;
            acc += hit ? detail::softplus(-u) : detail::softplus(u);
        }
    }
    const T n = static_cast<T>(batch * classes);
    Tensor<T> out = Tensor<T>::scalar(acc / n);

    if (!scores.on_tape()) return out;
    Tape<T>* tp = scores.tape();
    const int pz = scores.node();
    auto zp = scores.storage();
    auto lbl = std::make_shared<std::vector<int>>(labels);
    auto backward = [pz, zp, lbl, bias, batch, classes, n](const T* g, Tape<T>& t) {
        T* gz = t.accum(pz);
        const std::vector<T>& Z = *zp;
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t k = 0; k < classes; ++k) {
                const T u = Z[i * classes + k] + bias;
                const T tgt = static_cast<std::size_t>((*lbl)[i]) == k ? T(1) : T(0);
                gz[i * classes + k] += g[0] * (detail::stable_sigmoid(u) - tgt) / n;
            }
        }
    };
    int id = tp->add_node("bce_loss", {pz}, 1, out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

/// Adam with bias correction; per-parameter first/second moment state.
template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    std::size_t step = 0;
};

template <typename T>
void adam_step(std::vector<Tensor<T>*> params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
               T eps = T(1e-8)) {
    if (params.size() != grads.size()) {
        throw ShapeError("parameter/gradient count mismatch");
    }
    if (state.m.empty()) {
        for (const Tensor<T>* p : params) {
            state.m.emplace_back(p->numel(), T(0));
            state.v.emplace_back(p->numel(), T(0));
        }
    }
    if (state.m.size() != params.size()) {
        throw ShapeError("optimizer state does not match parameter count");
    }
    ++state.step;
    const T c1 = T(1) - std::pow(beta1, static_cast<T>(state.step));
    const T c2 = T(1) - std::pow(beta2, static_cast<T>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<T>& w = params[i]->values();
        const std::vector<T>& gr = grads[i].values();
        if (w.size() != gr.size() || w.size() != state.m[i].size()) {
            throw ShapeError("parameter " + std::to_string(i) + " shape mismatch in Adam");
        }
        std::vector<T>& m = state.m[i];
        std::vector<T>& v = state.v[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = beta1 * m[j] + (T(1) - beta1) * gr[j];
            v[j] = beta2 * v[j] + (T(1) - beta2) * gr[j] * gr[j];
            const T mhat = m[j] / c1;
            const T vhat = v[j] / c2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

/// lr_final + (lr_init - lr_final) * (1 + cos(pi * epoch / epochs)) / 2.
inline double cosine_lr(std::size_t epoch, std::size_t epochs, double lr_init,
                        double lr_final) {
    const double f = 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                           static_cast<double>(epochs)));
    return lr_final + (lr_init - lr_final) * f;
}

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double lr_init = 1e-3;
    double lr_final = 1e-5;
    std::uint64_t seed = 0;
    bool hflip = true;
    std::size_t pad_crop = 4;           // pixels of padding; 0 disables
    std::string checkpoint_path;        // written after the final epoch if set
    std::size_t checkpoint_every = 0;   // additionally every N epochs if > 0
    std::string metrics_path;           // CSV written if set

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
        if (!(lr_init >= lr_final && lr_final > 0.0)) {
            throw ConfigError("learning rates must satisfy lr_init >= lr_final > 0");
        }
    }
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

namespace detail {

template <typename T>
std::size_t argmax_row(const std::vector<T>& v, std::size_t row, std::size_t width) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < width; ++k) {
        if (v[row * width + k] > v[row * width + best]) best = k;
    }
    return best;
}

}  // namespace detail

/// Accuracy of argmax predictions over a dataset, evaluated in batches.
template <typename T>
double evaluate_accuracy(const Network<T>& net, const Dataset<T>& ds,
                         std::size_t batch_size = 128) {
    if (ds.samples.empty()) return 0.0;
    const std::size_t s = ds.image_size;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < ds.samples.size(); start += batch_size) {
        const std::size_t count = std::min(batch_size, ds.samples.size() - start);
        Tensor<T> batch(Shape{count, 6, s, s});
        for (std::size_t i = 0; i < count; ++i) {
            std::copy_n(ds.samples[start + i].image.values().begin(), 6 * s * s,
                        batch.values().begin() + static_cast<std::ptrdiff_t>(i * 6 * s * s));
        }
        Tensor<T> scores = net.logits(batch);
        for (std::size_t i = 0; i < count; ++i) {
            if (detail::argmax_row(scores.values(), i, net.spec().num_classes) ==
                static_cast<std::size_t>(ds.samples[start + i].label)) {
                ++correct;
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.samples.size());
}

inline void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "epoch,lr,loss,train_acc,test_acc\n";
    char buf[160];
    for (const EpochMetrics& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.lr, r.loss,
                      r.train_acc, r.test_acc);
        f << buf;
    }
}

/// Train in place: shuffle, augment, forward, one-vs-all BCE, Adam, cosine
/// schedule. Single-threaded and fully deterministic in the seed. Aborts with
/// NanLossError naming the first offending tensor if the loss leaves the
/// finite range.
template <typename T>
std::vector<EpochMetrics> train(Network<T>& net, const Dataset<T>& train_ds,
                                const Dataset<T>& test_ds, const TrainConfig& cfg,
                                std::uint64_t* steps_out = nullptr) {
    cfg.validate();
    if (train_ds.samples.empty()) throw ValueError("training dataset is empty");
    if (train_ds.num_classes != net.spec().num_classes) {
        throw ValueError("dataset has " + std::to_string(train_ds.num_classes) +
                         " classes but the network expects " +
                         std::to_string(net.spec().num_classes));
    }

    const std::size_t s = train_ds.image_size;
    const std::size_t n = train_ds.samples.size();
    const T bias = static_cast<T>(net.spec().output_bias);
    Rng rng(cfg.seed);
    AdamState<T> opt;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<EpochMetrics> metrics;
    std::uint64_t steps = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_init, cfg.lr_final);
        // Fisher-Yates with the run RNG
        for (std::size_t i = n - 1; i > 0; --i) {
            std::swap(order[i], order[rng.below(i + 1)]);
        }

        double loss_sum = 0.0;
        std::size_t seen = 0, correct = 0, batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - start);
            Tensor<T> batch(Shape{count, 6, s, s});
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) {
                const Sample<T>& sample = train_ds.samples[order[start + i]];
                Tensor<T> img = sample.image.clone();
                Box box = sample.box;
                if (cfg.hflip && rng.uniform() < 0.5) hflip_inplace(img, box);
                if (cfg.pad_crop > 0) {
                    const std::size_t ox = rng.below(2 * cfg.pad_crop + 1);
                    const std::size_t oy = rng.below(2 * cfg.pad_crop + 1);
                    img = pad_crop(img, cfg.pad_crop, ox, oy, box);
                }
                std::copy_n(img.values().begin(), 6 * s * s,
                            batch.values().begin() + static_cast<std::ptrdiff_t>(i * 6 * s * s));
                labels[i] = sample.label;
            }

            Tape<T> tape;
            RunOptions opts;
            opts.watch_weights = true;
            NetworkRun<T> run = net.run(batch, &tape, opts);
            Tensor<T> loss = bce_one_vs_all_loss(run.scores, labels, bias);
            if (!std::isfinite(static_cast<double>(loss[0]))) {
                const auto culprit = tape.first_non_finite();
                throw NanLossError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", first non-finite tensor: " +
                                   (culprit ? *culprit : std::string("loss")));
            }
            tape.backward(loss);

            std::vector<Tensor<T>*> params;
            std::vector<Tensor<T>> grads;
            auto& layers = net.layers();
            for (std::size_t li = 0; li < layers.size(); ++li) {
                params.push_back(&layers[li].kernel);
                grads.push_back(tape.gradient(run.bound_weights[li]));
            }
            adam_step(params, grads, opt, static_cast<T>(lr));
            ++steps;

            loss_sum += static_cast<double>(loss[0]);
            ++batches;
            for (std::size_t i = 0; i < count; ++i) {
                if (detail::argmax_row(run.scores.values(), i, net.spec().num_classes) ==
                    static_cast<std::size_t>(labels[i])) {
                    ++correct;
                }
            }
            seen += count;
        }

        EpochMetrics row;
        row.epoch = epoch;
        row.lr = lr;
        row.loss = loss_sum / static_cast<double>(batches);
        row.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        row.test_acc = test_ds.samples.empty() ? 0.0 : evaluate_accuracy(net, test_ds);
        metrics.push_back(row);

        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
            save_checkpoint(net, cfg.checkpoint_path, cfg.seed, epoch + 1);
        }
    }

    if (!cfg.checkpoint_path.empty()) {
        save_checkpoint(net, cfg.checkpoint_path, cfg.seed, cfg.epochs);
    }
    if (!cfg.metrics_path.empty()) {
        write_metrics_csv(cfg.metrics_path, metrics);
    }
    if (steps_out) *steps_out = steps;
    return metrics;
}

}  // namespace bcos
