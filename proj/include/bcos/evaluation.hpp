#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "bcos/common.hpp"
#include "bcos/datasets.hpp"
#include "bcos/dynamic_linear.hpp"
#include "bcos/network.hpp"
#include "bcos/tensor.hpp"
#include "bcos/training.hpp"

namespace bcos {

/// Mosaic of distinct-class images with the class and pixel extent of every
/// cell; the benchmark asks attribution methods to place their positive mass
/// in the right cell.
template <typename T>
struct GridGame {
    Tensor<T> image;              // [6, grid_n * S, grid_n * S]
    std::vector<int> cell_class;  // row-major, grid_n * grid_n entries
    std::size_t grid_n = 0;
    std::size_t cell_size = 0;

    Box cell_box(std::size_t cell) const {
        const long s = static_cast<long>(cell_size);
        const long row = static_cast<long>(cell / grid_n);
        const long col = static_cast<long>(cell % grid_n);
        return Box{col * s, row * s, (col + 1) * s, (row + 1) * s};
    }
};

/// Compose games from a dataset: images are ranked per class by the model's
/// confidence for their own class; each grid draws distinct classes and takes
/// each class's most confident not-yet-used image. Deterministic in the seed.
template <typename T>
std::vector<GridGame<T>> build_grids(const Dataset<T>& ds, const Network<T>& net,
                                     std::size_t n_grids, std::size_t grid_n,
                                     std::uint64_t seed) {
    if (grid_n == 0) throw ValueError("grid size must be >= 1");
    const std::size_t cells = grid_n * grid_n;
    if (ds.num_classes < cells) {
        throw ValueError("grid of " + std::to_string(cells) + " cells needs at least " +
                         std::to_string(cells) + " distinct classes, dataset has " +
                         std::to_string(ds.num_classes));
    }

    // model confidence of every sample for its own class
    std::vector<double> confidence(ds.samples.size());
    const std::size_t s = ds.image_size;
    constexpr std::size_t kEvalBatch = 128;
    for (std::size_t start = 0; start < ds.samples.size(); start += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, ds.samples.size() - start);
        Tensor<T> batch(Shape{count, 6, s, s});
        for (std::size_t i = 0; i < count; ++i) {
            std::copy_n(ds.samples[start + i].image.values().begin(), 6 * s * s,
                        batch.values().begin() + static_cast<std::ptrdiff_t>(i * 6 * s * s));
        }
        Tensor<T> scores = net.logits(batch);
        for (std::size_t i = 0; i < count; ++i) {
            confidence[start + i] = static_cast<double>(
                scores[i * net.spec().num_classes +
                       static_cast<std::size_t>(ds.samples[start + i].label)]);
        }
    }

    std::vector<std::vector<std::size_t>> ranked(ds.num_classes);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        ranked[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);
    }
    for (auto& lst : ranked) {
        std::stable_sort(lst.begin(), lst.end(), [&](std::size_t a, std::size_t b) {
            return confidence[a] > confidence[b];
        });
    }
    std::vector<std::size_t> cursor(ds.num_classes, 0);

    Rng rng(seed);
    std::vector<GridGame<T>> games;
    for (std::size_t g = 0; g < n_grids; ++g) {
        // sample distinct classes (partial Fisher-Yates)
        std::vector<std::size_t> classes(ds.num_classes);
        std::iota(classes.begin(), classes.end(), std::size_t{0});
        for (std::size_t i = 0; i < cells; ++i) {
            std::swap(classes[i], classes[i + rng.below(ds.num_classes - i)]);
        }
        classes.resize(cells);

        GridGame<T> game;
        game.grid_n = grid_n;
        game.cell_size = s;
        game.image = Tensor<T>::zeros(Shape{6, grid_n * s, grid_n * s});
        game.cell_class.resize(cells);
        const std::size_t gw = grid_n * s;
        for (std::size_t cell = 0; cell < cells; ++cell) {
            const std::size_t cls = classes[cell];
            if (cursor[cls] >= ranked[cls].size()) {
                throw ValueError("class " + std::to_string(cls) +
                                 " has no unused images left after " + std::to_string(g) +
                                 " grids");
            }
            const Sample<T>& sample = ds.samples[ranked[cls][cursor[cls]++]];
            game.cell_class[cell] = static_cast<int>(cls);
            const std::size_t row = cell / grid_n, col = cell % grid_n;
            for (std::size_t c = 0; c < 6; ++c) {
                for (std::size_t y = 0; y < s; ++y) {
                    std::copy_n(
                        sample.image.values().begin() + static_cast<std::ptrdiff_t>((c * s + y) * s),
                        s,
                        game.image.values().begin() +
                            static_cast<std::ptrdiff_t>((c * gw + row * s + y) * gw + col * s));
                }
            }
        }
        games.push_back(std::move(game));
    }
    return games;
}

struct CellScore {
    double fraction = 0.0;
    bool all_nonpositive = false;
};

/// Fraction of positive attribution mass falling in the given cell. Maps with
/// no positive mass score 0 and are flagged.
template <typename T>
CellScore score_attribution(const GridGame<T>& game, const Tensor<T>& attribution,
                            std::size_t cell) {
    const std::size_t gw = game.grid_n * game.cell_size;
    if (attribution.shape() != Shape{gw, gw}) {
        throw ShapeError("attribution shape " + shape_str(attribution.shape()) +
                         " does not match grid " + std::to_string(gw) + "x" +
                         std::to_string(gw));
    }
    if (cell >= game.cell_class.size()) throw ValueError("cell index out of range");
    // accumulate per cell so the uniform baseline hits 1/(n*n) to machine
    // precision regardless of grid size
    std::vector<double> cell_mass(game.cell_class.size(), 0.0);
    for (std::size_t c = 0; c < game.cell_class.size(); ++c) {
        const Box box = game.cell_box(c);
        double acc = 0.0;
        for (long y = box.y0; y < box.y1; ++y) {
            for (long x = box.x0; x < box.x1; ++x) {
                const double v = static_cast<double>(
                    attribution[static_cast<std::size_t>(y) * gw + static_cast<std::size_t>(x)]);
                if (v > 0.0) acc += v;
            }
        }
        cell_mass[c] = acc;
    }
    double total = 0.0;
    for (const double m : cell_mass) total += m;
    if (total == 0.0) return {0.0, true};
    return {cell_mass[cell] / total, false};
}

// ---------------------------------------------------------------------------
// Attribution methods (channel-summed spatial maps for one class score)
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
Tensor<T> channel_sum(const Tensor<T>& chw) {
    const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    Tensor<T> out(Shape{h, w});
    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t i = 0; i < h * w; ++i) out[i] += chw[ci * h * w + i];
    }
    return out;
}

/// d score_class / d input at x, as a [C, H, W] tensor.
template <typename T>
Tensor<T> input_gradient(const Network<T>& net, const Tensor<T>& x, std::size_t cls) {
    Tensor<T> batch = reshape(x, Shape{1, x.dim(0), x.dim(1), x.dim(2)});
    Tape<T> tape;
    RunOptions opts;
    opts.watch_input = true;
    NetworkRun<T> run = net.run(batch, &tape, opts);
    tape.backward(pick(run.scores, cls));
    return reshape(tape.gradient(run.bound_input), x.shape()).detached();
}

}  // namespace detail

/// Plain input gradient of the class score.
template <typename T>
Tensor<T> attribution_grad(const Network<T>& net, const Tensor<T>& x, std::size_t cls) {
    return detail::channel_sum(detail::input_gradient(net, x, cls));
}

/// Gradient times input.
template <typename T>
Tensor<T> attribution_ixg(const Network<T>& net, const Tensor<T>& x, std::size_t cls) {
    Tensor<T> g = detail::input_gradient(net, x, cls);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= x[i];
    return detail::channel_sum(g);
}

/// Integrated gradients from the zero baseline with midpoint sampling.
template <typename T>
Tensor<T> attribution_intgrad(const Network<T>& net, const Tensor<T>& x, std::size_t cls,
                              std::size_t steps = 50) {
    if (steps == 0) throw ValueError("integrated gradients needs steps >= 1");
    Tensor<T> mean_grad = Tensor<T>::zeros(x.shape());
    for (std::size_t i = 0; i < steps; ++i) {
        const T t = (static_cast<T>(i) + T(0.5)) / static_cast<T>(steps);
        Tensor<T> xi = x.clone();
        for (std::size_t j = 0; j < xi.numel(); ++j) xi[j] *= t;
        Tensor<T> g = detail::input_gradient(net, xi, cls);
        for (std::size_t j = 0; j < g.numel(); ++j) mean_grad[j] += g[j];
    }
    for (std::size_t j = 0; j < mean_grad.numel(); ++j) {
        mean_grad[j] = mean_grad[j] / static_cast<T>(steps) * x[j];
    }
    return detail::channel_sum(mean_grad);
}

/// The model-inherent contribution map of the effective linear row.
template <typename T>
Tensor<T> attribution_inherent(const Network<T>& net, const Tensor<T>& x, std::size_t cls) {
    return contribution_map(collapse(net, x, CollapseTarget::class_score(cls))).values;
}

/// Constant positive map; scores exactly 1/(grid_n^2) on any grid.
template <typename T>
Tensor<T> attribution_uniform(const Tensor<T>& x) {
    return Tensor<T>::ones(Shape{x.dim(1), x.dim(2)});
}

// ---------------------------------------------------------------------------
// Aggregation and the exponent ablation
// ---------------------------------------------------------------------------

struct ScoreAggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    std::size_t n = 0;
};

inline ScoreAggregate aggregate_scores(const std::vector<double>& scores) {
    ScoreAggregate a;
    a.n = scores.size();
    if (a.n == 0) return a;
    a.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(a.n);
    if (a.n > 1) {
        double acc = 0.0;
        for (double v : scores) acc += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(acc / static_cast<double>(a.n - 1));
    }
    return a;
}

/// Mean localization of the inherent maps over a set of games.
template <typename T>
std::vector<double> inherent_localization_scores(const Network<T>& net,
                                                 const std::vector<GridGame<T>>& games) {
    std::vector<double> scores;
    for (const GridGame<T>& game : games) {
        for (std::size_t cell = 0; cell < game.cell_class.size(); ++cell) {
            const auto cls = static_cast<std::size_t>(game.cell_class[cell]);
            Tensor<T> map = attribution_inherent(net, game.image, cls);
            scores.push_back(score_attribution(game, map, cell).fraction);
        }
    }
    return scores;
}

struct AblationRow {
    double cos_exponent = 0.0;
    double accuracy = 0.0;          // test accuracy in [0, 1]
    double mean_localization = 0.0; // mean inherent-map grid score
};

struct AblationConfig {
    std::size_t maxout = 2;
    std::size_t channels = 16;
    std::size_t n_grids = 40;
    std::size_t grid_n = 2;
    TrainConfig train;
    std::uint64_t net_seed = 1;
    std::uint64_t grid_seed = 99;
};

/// Train one network per exponent under identical seeds and report accuracy
/// plus inherent-map localization.
template <typename T>
std::vector<AblationRow> exponent_ablation(const std::vector<double>& exponents,
                                           const Dataset<T>& train_ds,
                                           const Dataset<T>& test_ds,
                                           const AblationConfig& cfg) {
    if (exponents.empty()) throw ValueError("ablation needs at least one exponent");
    std::vector<AblationRow> rows;
    for (double b : exponents) {
        NetworkSpec spec = build_tiny(b, cfg.maxout, cfg.channels, train_ds.num_classes);
        Network<T> net = Network<T>::create(spec, cfg.net_seed);
        train(net, train_ds, test_ds, cfg.train);
        AblationRow row;
        row.cos_exponent = b;
        row.accuracy = evaluate_accuracy(net, test_ds);
        const auto games = build_grids(test_ds, net, cfg.n_grids, cfg.grid_n, cfg.grid_seed);
        row.mean_localization = aggregate_scores(inherent_localization_scores(net, games)).mean;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace bcos
