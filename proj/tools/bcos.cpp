// Command line front end: train networks, render explanations, rank neurons,
// run the grid localization benchmark and the exponent ablation.

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bcos/checkpoint.hpp"
#include "bcos/cli_config.hpp"
#include "bcos/common.hpp"
#include "bcos/datasets.hpp"
#include "bcos/dynamic_linear.hpp"
#include "bcos/encoding.hpp"
#include "bcos/evaluation.hpp"
#include "bcos/image_io.hpp"
#include "bcos/network.hpp"
#include "bcos/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct DatasetArgs {
    std::string kind = "synth";
    std::string cifar_dir;
    std::size_t classes = 4;
    std::size_t count = 2000;
    std::size_t size = 16;
    std::uint64_t seed = 2024;

    void attach(CLI::App* cmd) {
        cmd->add_option("--dataset", kind, "Dataset kind: synth or cifar10")
            ->check(CLI::IsMember({"synth", "cifar10"}))
            ->capture_default_str();
        cmd->add_option("--data-dir", cifar_dir, "Directory with CIFAR-10 binary batches");
        cmd->add_option("--classes", classes, "Synthetic class count (2..10)")
            ->capture_default_str();
        cmd->add_option("--n", count, "Synthetic training sample count")
            ->capture_default_str();
        cmd->add_option("--size", size, "Synthetic image size (>= 16)")
            ->capture_default_str();
        cmd->add_option("--data-seed", seed, "Synthetic generator seed")
            ->capture_default_str();
    }

    struct Splits {
        bcos::Dataset<float> train;
        bcos::Dataset<float> test;
    };

    Splits load() const {
        if (kind == "cifar10") {
            if (cifar_dir.empty()) {
                throw bcos::ConfigError("cifar10 dataset requires --data-dir");
            }
            auto splits = bcos::load_cifar10<float>(cifar_dir);
            return {std::move(splits.train), std::move(splits.test)};
        }
        Splits s;
        s.train = bcos::synth_shapes<float>(seed, count, classes, size);
        s.test = bcos::synth_shapes<float>(seed + 1, std::max<std::size_t>(count / 5, 8),
                                           classes, size);
        return s;
    }
};

/// Overlay file values onto options the user did not pass explicitly, with
/// provenance recording. Returns the resolution table.
std::vector<bcos::ResolvedOption> apply_config_overlay(CLI::App* cmd,
                                                       const std::string& config_path) {
    std::map<std::string, std::string> file_values;
    if (!config_path.empty()) file_values = bcos::parse_config_file(config_path);
    bcos::ConfigResolver resolver(file_values);
    for (CLI::Option* opt : cmd->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string key = opt->get_lnames().front();
        if (key == "config" || key == "help") continue;
        const bool flag_set = opt->count() > 0;
        std::string current;
        if (!opt->results().empty()) current = opt->results().front();
        const std::string resolved = resolver.resolve(key, flag_set, current);
        if (!flag_set && file_values.count(key)) {
            opt->clear();
            opt->add_result(resolved);
            opt->run_callback();
        }
    }
    resolver.check_unknown_keys();
    return resolver.resolved();
}

void print_provenance(const std::vector<bcos::ResolvedOption>& table, bool verbose) {
    if (!verbose) return;
    for (const auto& r : table) {
        if (r.source == bcos::ConfigSource::Default) continue;
        std::printf("config\t%s\t%s\t%s\n", r.key.c_str(), r.value.c_str(),
                    bcos::to_string(r.source));
    }
}

int fail_config(const std::string& msg) {
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    return kExitConfig;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    DatasetArgs data;
    double cos_exponent = 2.0;
    std::size_t maxout = 2;
    std::size_t channels = 16;
    std::string arch = "tiny";
    bcos::TrainConfig train;
    std::uint64_t net_seed = 1;
    std::string out = "model.bcos";
    std::string metrics = "metrics.csv";
    std::string config_path;
    bool verbose = false;
};

int run_train(const TrainArgs& a) {
    auto splits = a.data.load();
    bcos::NetworkSpec spec =
        a.arch == "cifar9"
            ? bcos::build_cifar9(a.cos_exponent, a.maxout)
            : bcos::build_tiny(a.cos_exponent, a.maxout, a.channels, splits.train.num_classes);
    bcos::Network<float> net = bcos::Network<float>::create(spec, a.net_seed);

    bcos::TrainConfig cfg = a.train;
    cfg.checkpoint_path = a.out;
    cfg.metrics_path = a.metrics;
    auto metrics = bcos::train(net, splits.train, splits.test, cfg);
    const auto& last = metrics.back();
    std::printf("epochs\t%zu\nfinal_loss\t%.6g\ntrain_acc\t%.4f\ntest_acc\t%.4f\n",
                metrics.size(), last.loss, last.train_acc, last.test_acc);
    std::printf("checkpoint\t%s\nmetrics\t%s\n", a.out.c_str(), a.metrics.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainArgs {
    std::string checkpoint;
    std::string image_path;             // PPM input
    DatasetArgs data;                   // alternative: dataset sample
    std::optional<std::size_t> sample;
    std::optional<int> cls;
    std::optional<std::size_t> layer;
    std::optional<std::size_t> neuron;
    std::string out = "explanation.ppm";
    std::string format = "ppm";
    double alpha_percentile = 99.9;
    std::string config_path;
    bool verbose = false;
};

int run_explain(const ExplainArgs& a) {
    auto [net, info] = bcos::load_checkpoint<float>(a.checkpoint);

    bcos::Tensor<float> input;
    if (!a.image_path.empty()) {
        bcos::Tensor<float> rgb = bcos::read_ppm<float>(a.image_path);
        input = bcos::encode_rgb6(rgb);
    } else if (a.sample) {
        auto splits = a.data.load();
        if (*a.sample >= splits.test.size()) {
            throw bcos::ConfigError("--sample index " + std::to_string(*a.sample) +
                                    " out of range (test split has " +
                                    std::to_string(splits.test.size()) + " samples)");
        }
        input = splits.test.samples[*a.sample].image;
    } else {
        throw bcos::ConfigError("explain needs --image or --sample");
    }

    bcos::CollapseTarget target = bcos::CollapseTarget::class_score(0);
    if (a.layer) {
        if (!a.neuron) throw bcos::ConfigError("--layer requires --neuron");
        target = bcos::CollapseTarget::layer_neuron(*a.layer, *a.neuron);
    } else {
        std::size_t cls = 0;
        bcos::Tensor<float> scores = net.logits(
            bcos::reshape(input, bcos::Shape{1, input.dim(0), input.dim(1), input.dim(2)}));
        if (a.cls) {
            if (*a.cls < 0 || static_cast<std::size_t>(*a.cls) >= net.spec().num_classes) {
                throw bcos::ConfigError("--class " + std::to_string(*a.cls) +
                                        " out of range for " +
                                        std::to_string(net.spec().num_classes) + " classes");
            }
            cls = static_cast<std::size_t>(*a.cls);
        } else {
            for (std::size_t k = 1; k < net.spec().num_classes; ++k) {
                if (scores[k] > scores[cls]) cls = k;
            }
        }
        target = bcos::CollapseTarget::class_score(cls);
    }

    bcos::DynamicLinearMap<float> map = bcos::collapse(net, input, target);
    bcos::ContributionMap<float> contrib = bcos::contribution_map(map);
    const double sum = contrib.total();
    const double logit = double(map.activation) + double(map.bias);
    std::printf("target\t%s\t%zu\n",
                target.kind == bcos::CollapseTarget::Kind::ClassScore ? "class" : "neuron",
                target.index);
    std::printf("completeness\tsum=%.8g\tbias=%.8g\tlogit=%.8g\tresidual=%.3g\n", sum,
                double(map.bias), logit, std::fabs(sum + double(map.bias) - logit));

    bcos::ExplanationImage<float> img =
        bcos::decode_row_to_color(map.row, a.alpha_percentile);
    if (a.format == "png") {
        bcos::write_png(img.rgb, img.alpha, a.out);
    } else {
        bcos::write_ppm(bcos::composite_on_white(img), a.out);
    }
    std::printf("explanation\t%s\n", a.out.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// neurons
// ---------------------------------------------------------------------------

struct NeuronsArgs {
    std::string checkpoint;
    DatasetArgs data;
    std::size_t layer = 1;
    std::size_t top_k = 3;
    std::size_t limit = 8;   // channels to report
    std::string out_prefix;  // when set, writes one image per entry
    std::string config_path;
    bool verbose = false;
};

int run_neurons(const NeuronsArgs& a) {
    auto [net, info] = bcos::load_checkpoint<float>(a.checkpoint);
    auto splits = a.data.load();
    std::vector<bcos::Tensor<float>> inputs;
    for (const auto& s : splits.test.samples) inputs.push_back(s.image);

    auto ranking = bcos::intermediate_neuron_explanations(net, inputs, a.layer, a.top_k);
    // entries come grouped per channel, each group min(top_k, #inputs) wide
    const std::size_t per_channel = std::min(a.top_k, inputs.size());
    std::printf("layer\tchannel\trank\tsample\tactivation\n");
    std::size_t emitted = 0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const auto& e = ranking[i];
        if (e.channel >= a.limit) continue;
        const std::size_t rank = i % per_channel;
        std::printf("%zu\t%zu\t%zu\t%zu\t%.6g\n", a.layer, e.channel, rank, e.sample_index,
                    double(e.activation));
        if (!a.out_prefix.empty()) {
            bcos::ExplanationImage<float> img = bcos::decode_row_to_color(e.map.row);
            bcos::write_ppm(bcos::composite_on_white(img),
                            a.out_prefix + "_c" + std::to_string(e.channel) + "_r" +
                                std::to_string(rank) + ".ppm");
            ++emitted;
        }
    }
    if (!a.out_prefix.empty()) std::printf("images\t%zu\n", emitted);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gridgame
// ---------------------------------------------------------------------------

struct GridgameArgs {
    std::string checkpoint;
    DatasetArgs data;
    std::size_t grids = 40;
    std::size_t grid_n = 2;
    std::uint64_t grid_seed = 99;
    std::size_t intgrad_steps = 50;
    std::vector<std::string> methods = {"inherent", "grad", "ixg", "intgrad", "uniform"};
    std::string results_csv = "gridgame_results.csv";
    std::string aggregate_csv = "gridgame_aggregate.csv";
    std::string config_path;
    bool verbose = false;
};

int run_gridgame(const GridgameArgs& a) {
    auto [net, info] = bcos::load_checkpoint<float>(a.checkpoint);
    auto splits = a.data.load();
    auto games = bcos::build_grids(splits.test, net, a.grids, a.grid_n, a.grid_seed);

    std::ofstream results(a.results_csv, std::ios::trunc);
    if (!results) throw bcos::IoError("cannot open '" + a.results_csv + "'");
    results << "method,grid_id,cell,class,score\n";

    std::ofstream aggregate(a.aggregate_csv, std::ios::trunc);
    if (!aggregate) throw bcos::IoError("cannot open '" + a.aggregate_csv + "'");
    aggregate << "method,mean,std,n\n";

    std::printf("method\tmean\tstd\tn\tflagged\n");
    for (const std::string& method : a.methods) {
        std::vector<double> scores;
        std::size_t flagged = 0;
        for (std::size_t g = 0; g < games.size(); ++g) {
            const auto& game = games[g];
            for (std::size_t cell = 0; cell < game.cell_class.size(); ++cell) {
                const auto cls = static_cast<std::size_t>(game.cell_class[cell]);
                bcos::Tensor<float> map;
                if (method == "inherent") {
                    map = bcos::attribution_inherent(net, game.image, cls);
                } else if (method == "grad") {
                    map = bcos::attribution_grad(net, game.image, cls);
                } else if (method == "ixg") {
                    map = bcos::attribution_ixg(net, game.image, cls);
                } else if (method == "intgrad") {
                    map = bcos::attribution_intgrad(net, game.image, cls, a.intgrad_steps);
                } else if (method == "uniform") {
                    map = bcos::attribution_uniform(game.image);
                } else {
                    throw bcos::ConfigError("unknown method '" + method + "'");
                }
                const bcos::CellScore s = bcos::score_attribution(game, map, cell);
                if (s.all_nonpositive) ++flagged;
                scores.push_back(s.fraction);
                char buf[128];
                std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%zu,%.9g\n", method.c_str(), g,
                              cell, cls, s.fraction);
                results << buf;
            }
        }
        const bcos::ScoreAggregate agg = bcos::aggregate_scores(scores);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%zu\n", method.c_str(), agg.mean,
                      agg.stddev, agg.n);
        aggregate << buf;
        std::printf("%s\t%.4f\t%.4f\t%zu\t%zu\n", method.c_str(), agg.mean, agg.stddev,
                    agg.n, flagged);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// ablation
// ---------------------------------------------------------------------------

struct AblationArgs {
    DatasetArgs data;
    std::vector<double> exponents = {1.0, 1.5, 2.0, 2.5};
    std::size_t maxout = 2;
    std::size_t channels = 16;
    std::size_t grids = 40;
    std::size_t grid_n = 2;
    std::uint64_t grid_seed = 99;
    std::uint64_t net_seed = 1;
    bcos::TrainConfig train;
    std::string out_csv = "ablation.csv";
    std::string config_path;
    bool verbose = false;
};

int run_ablation(const AblationArgs& a) {
    auto splits = a.data.load();
    bcos::AblationConfig cfg;
    cfg.maxout = a.maxout;
    cfg.channels = a.channels;
    cfg.n_grids = a.grids;
    cfg.grid_n = a.grid_n;
    cfg.grid_seed = a.grid_seed;
    cfg.net_seed = a.net_seed;
    cfg.train = a.train;
    auto rows = bcos::exponent_ablation<float>(a.exponents, splits.train, splits.test, cfg);

    std::ofstream csv(a.out_csv, std::ios::trunc);
    if (!csv) throw bcos::IoError("cannot open '" + a.out_csv + "'");
    csv << "b,accuracy,mean_localization\n";
    std::printf("b\taccuracy\tmean_localization\n");
    for (const auto& r : rows) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", r.cos_exponent, r.accuracy,
                      r.mean_localization);
        csv << buf;
        std::printf("%.3g\t%.4f\t%.4f\n", r.cos_exponent, r.accuracy, r.mean_localization);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"B-cos networks: training, exact linear explanations, benchmarks"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a network and write a checkpoint");
    train_args.data.attach(train_cmd);
    train_cmd->add_option("--b", train_args.cos_exponent, "Cosine exponent B")
        ->capture_default_str();
    train_cmd->add_option("--maxout", train_args.maxout, "MaxOut units per neuron")
        ->capture_default_str();
    train_cmd->add_option("--channels", train_args.channels, "Tiny-net base channels")
        ->capture_default_str();
    train_cmd->add_option("--arch", train_args.arch, "Architecture: tiny or cifar9")
        ->check(CLI::IsMember({"tiny", "cifar9"}))
        ->capture_default_str();
    train_cmd->add_option("--epochs", train_args.train.epochs, "Training epochs")
        ->capture_default_str();
    train_cmd->add_option("--batch", train_args.train.batch_size, "Batch size")
        ->capture_default_str();
    train_cmd->add_option("--lr", train_args.train.lr_init, "Initial learning rate")
        ->capture_default_str();
    train_cmd->add_option("--lr-final", train_args.train.lr_final, "Final learning rate")
        ->capture_default_str();
    train_cmd->add_option("--seed", train_args.train.seed, "Run seed (shuffle, augment)")
        ->capture_default_str();
    train_cmd->add_option("--net-seed", train_args.net_seed, "Weight init seed")
        ->capture_default_str();
    train_cmd->add_flag("--hflip,!--no-hflip", train_args.train.hflip,
                        "Random horizontal flips")
        ->capture_default_str();
    train_cmd->add_option("--pad-crop", train_args.train.pad_crop,
                          "Padded random crop pixels (0 disables)")
        ->capture_default_str();
    train_cmd->add_option("--checkpoint-every", train_args.train.checkpoint_every,
                          "Also checkpoint every N epochs")
        ->capture_default_str();
    train_cmd->add_option("--out", train_args.out, "Checkpoint path")->capture_default_str();
    train_cmd->add_option("--metrics", train_args.metrics, "Metrics CSV path")
        ->capture_default_str();
    train_cmd->add_option("--config", train_args.config_path,
                          "key=value overlay file (flags win)");
    train_cmd->add_flag("--verbose", train_args.verbose, "Print resolved config provenance");

    ExplainArgs explain_args;
    CLI::App* explain_cmd =
        app.add_subcommand("explain", "Render the effective linear row for one input");
    explain_args.data.attach(explain_cmd);
    explain_cmd->add_option("--checkpoint", explain_args.checkpoint, "Trained checkpoint")
        ->required();
    explain_cmd->add_option("--image", explain_args.image_path, "Input image (PPM P6)");
    explain_cmd->add_option("--sample", explain_args.sample,
                            "Use the i-th test-split sample instead of --image");
    explain_cmd->add_option("--class", explain_args.cls,
                            "Class to explain (default: predicted class)");
    explain_cmd->add_option("--layer", explain_args.layer, "Intermediate layer index");
    explain_cmd->add_option("--neuron", explain_args.neuron,
                            "Flat neuron index within the layer output");
    explain_cmd->add_option("--out", explain_args.out, "Output image path")
        ->capture_default_str();
    explain_cmd->add_option("--format", explain_args.format, "Output format: ppm or png")
        ->check(CLI::IsMember({"ppm", "png"}))
        ->capture_default_str();
    explain_cmd
        ->add_option("--alpha-percentile", explain_args.alpha_percentile,
                     "Opacity normalization percentile")
        ->capture_default_str();
    explain_cmd->add_option("--config", explain_args.config_path,
                            "key=value overlay file (flags win)");
    explain_cmd->add_flag("--verbose", explain_args.verbose,
                          "Print resolved config provenance");

    NeuronsArgs neurons_args;
    CLI::App* neurons_cmd =
        app.add_subcommand("neurons", "Rank intermediate neurons by activation");
    neurons_args.data.attach(neurons_cmd);
    neurons_cmd->add_option("--checkpoint", neurons_args.checkpoint, "Trained checkpoint")
        ->required();
    neurons_cmd->add_option("--layer", neurons_args.layer, "Layer index")
        ->capture_default_str();
    neurons_cmd->add_option("--top-k", neurons_args.top_k, "Inputs per neuron")
        ->capture_default_str();
    neurons_cmd->add_option("--limit", neurons_args.limit, "Channels to report")
        ->capture_default_str();
    neurons_cmd->add_option("--out-prefix", neurons_args.out_prefix,
                            "Write explanation images with this prefix");
    neurons_cmd->add_option("--config", neurons_args.config_path,
                            "key=value overlay file (flags win)");
    neurons_cmd->add_flag("--verbose", neurons_args.verbose,
                          "Print resolved config provenance");

    GridgameArgs grid_args;
    CLI::App* grid_cmd =
        app.add_subcommand("gridgame", "Grid localization benchmark over attribution methods");
    grid_args.data.attach(grid_cmd);
    grid_cmd->add_option("--checkpoint", grid_args.checkpoint, "Trained checkpoint")
        ->required();
    grid_cmd->add_option("--grids", grid_args.grids, "Number of grids")->capture_default_str();
    grid_cmd->add_option("--grid-n", grid_args.grid_n, "Grid side length")
        ->capture_default_str();
    grid_cmd->add_option("--grid-seed", grid_args.grid_seed, "Class sampling seed")
        ->capture_default_str();
    grid_cmd->add_option("--intgrad-steps", grid_args.intgrad_steps,
                         "Integration steps for intgrad")
        ->capture_default_str();
    grid_cmd->add_option("--methods", grid_args.methods,
                         "Methods: inherent grad ixg intgrad uniform")
        ->capture_default_str();
    grid_cmd->add_option("--results-csv", grid_args.results_csv, "Per-cell scores CSV")
        ->capture_default_str();
    grid_cmd->add_option("--aggregate-csv", grid_args.aggregate_csv, "Aggregate CSV")
        ->capture_default_str();
    grid_cmd->add_option("--config", grid_args.config_path,
                         "key=value overlay file (flags win)");
    grid_cmd->add_flag("--verbose", grid_args.verbose, "Print resolved config provenance");

    AblationArgs abl_args;
    CLI::App* abl_cmd = app.add_subcommand(
        "ablation", "Train per exponent and tabulate accuracy and localization");
    abl_args.data.attach(abl_cmd);
    abl_cmd->add_option("--b-list", abl_args.exponents, "Cosine exponents to sweep")
        ->delimiter(',')
        ->capture_default_str();
    abl_cmd->add_option("--maxout", abl_args.maxout, "MaxOut units per neuron")
        ->capture_default_str();
    abl_cmd->add_option("--channels", abl_args.channels, "Tiny-net base channels")
        ->capture_default_str();
    abl_cmd->add_option("--grids", abl_args.grids, "Number of grids")->capture_default_str();
    abl_cmd->add_option("--grid-n", abl_args.grid_n, "Grid side length")->capture_default_str();
    abl_cmd->add_option("--grid-seed", abl_args.grid_seed, "Class sampling seed")
        ->capture_default_str();
    abl_cmd->add_option("--net-seed", abl_args.net_seed, "Weight init seed")
        ->capture_default_str();
    abl_cmd->add_option("--epochs", abl_args.train.epochs, "Training epochs")
        ->capture_default_str();
    abl_cmd->add_option("--batch", abl_args.train.batch_size, "Batch size")
        ->capture_default_str();
    abl_cmd->add_option("--lr", abl_args.train.lr_init, "Initial learning rate")
        ->capture_default_str();
    abl_cmd->add_option("--lr-final", abl_args.train.lr_final, "Final learning rate")
        ->capture_default_str();
    abl_cmd->add_option("--seed", abl_args.train.seed, "Run seed")->capture_default_str();
    abl_cmd->add_option("--out", abl_args.out_csv, "Result table CSV")->capture_default_str();
    abl_cmd->add_option("--config", abl_args.config_path,
                        "key=value overlay file (flags win)");
    abl_cmd->add_flag("--verbose", abl_args.verbose, "Print resolved config provenance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            print_provenance(apply_config_overlay(train_cmd, train_args.config_path),
                             train_args.verbose);
            train_args.train.validate();
            return run_train(train_args);
        }
        if (explain_cmd->parsed()) {
            print_provenance(apply_config_overlay(explain_cmd, explain_args.config_path),
                             explain_args.verbose);
            return run_explain(explain_args);
        }
        if (neurons_cmd->parsed()) {
            print_provenance(apply_config_overlay(neurons_cmd, neurons_args.config_path),
                             neurons_args.verbose);
            return run_neurons(neurons_args);
        }
        if (grid_cmd->parsed()) {
            print_provenance(apply_config_overlay(grid_cmd, grid_args.config_path),
                             grid_args.verbose);
            return run_gridgame(grid_args);
        }
        if (abl_cmd->parsed()) {
            print_provenance(apply_config_overlay(abl_cmd, abl_args.config_path),
                             abl_args.verbose);
            abl_args.train.validate();
            return run_ablation(abl_args);
        }
    } catch (const bcos::NanLossError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const bcos::ConfigError& e) {
        return fail_config(e.what());
    } catch (const bcos::Error& e) {
        return fail_config(e.what());
    } catch (const std::exception& e) {
        return fail_config(e.what());
    }
    return kExitConfig;
}
