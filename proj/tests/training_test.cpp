#include "bcos/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bcos/common.hpp"
#include "bcos/datasets.hpp"
#include "bcos/network.hpp"
#include "bcos/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace bcos;
using bcos::testing::check_gradients;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST(BceLoss, UniformProbabilityAtZeroScores) {
    const std::size_t k = 10;
    const double b = output_bias_for_classes(k);
    EXPECT_NEAR(1.0 / (1.0 + std::exp(-b)), 0.1, 1e-12);

    Tensor<double> scores(Shape{3, k}, 0.0);
    Tensor<double> loss = bce_one_vs_all_loss(scores, {0, 4, 9}, b);
    const double expected =
        -(std::log(0.1) + 9.0 * std::log(0.9)) / 10.0;  // mean over classes
    EXPECT_NEAR(loss[0], expected, 1e-12);
}

TEST(BceLoss, SaturatedLogitsGiveVanishingLoss) {
    const std::size_t k = 4;
    Tensor<double> scores(Shape{2, k}, -50.0);
    scores[0 * k + 1] = 50.0;
    scores[1 * k + 3] = 50.0;
    Tensor<double> loss = bce_one_vs_all_loss(scores, {1, 3}, 0.0);
    EXPECT_LE(loss[0], 1e-10);
    EXPECT_TRUE(std::isfinite(loss[0]));
}

TEST(BceLoss, GradientAgainstFiniteDifferences) {
    Rng rng(3);
    Tensor<double> scores = Tensor<double>::uniform(Shape{4, 5}, rng, -3.0, 3.0);
    const std::vector<int> labels = {0, 2, 4, 1};
    auto build = [&labels](Tape<double>&, std::vector<Tensor<double>>& in) {
        return bce_one_vs_all_loss(in[0], labels, -1.1);
    };
    auto report = check_gradients(build, {scores}, 1e-5, 1e-6);
    EXPECT_TRUE(report.ok) << report.worst_at;
}

TEST(Adam, FirstStepMovesBySignTimesLr) {
    Tensor<double> p(Shape{4}, {1.0, 2.0, 3.0, 4.0});
    Tensor<double> g(Shape{4}, {0.5, -0.25, 1e-3, -2.0});
    AdamState<double> state;
    adam_step<double>({&p}, {g}, state, 0.01);
    const double expect[4] = {1.0 - 0.01, 2.0 + 0.01, 3.0 - 0.01, 4.0 + 0.01};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(p[i], expect[i], 1e-5);
}

TEST(Adam, ZeroGradientsAreAFixedPoint) {
    Tensor<double> p(Shape{3}, {1.0, -2.0, 0.5});
    Tensor<double> g(Shape{3}, 0.0);
    AdamState<double> state;
    for (int i = 0; i < 5; ++i) adam_step<double>({&p}, {g}, state, 0.1);
    EXPECT_EQ(p.values(), (std::vector<double>{1.0, -2.0, 0.5}));
}

TEST(Adam, DeterministicAcrossRuns) {
    auto run = [] {
        Rng rng(7);
        Tensor<float> p = Tensor<float>::uniform(Shape{6}, rng, -1.0f, 1.0f);
        AdamState<float> state;
        for (int step = 0; step < 10; ++step) {
            Tensor<float> g = Tensor<float>::uniform(Shape{6}, rng, -1.0f, 1.0f);
            adam_step<float>({&p}, {g}, state, 0.01f);
        }
        return p.values();
    };
    EXPECT_EQ(run(), run());
}

TEST(Adam, ShapeMismatchIsRejected) {
    Tensor<double> p(Shape{3}, 0.0);
    Tensor<double> g(Shape{4}, 0.0);
    AdamState<double> state;
    EXPECT_THROW(adam_step<double>({&p}, {g}, state, 0.1), ShapeError);
}

TEST(CosineSchedule, EndpointsAndMidpoint) {
    EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 1e-3, 1e-5), 1e-3);
    EXPECT_DOUBLE_EQ(cosine_lr(100, 100, 1e-3, 1e-5), 1e-5);
    EXPECT_NEAR(cosine_lr(50, 100, 1e-3, 1e-5), (1e-3 + 1e-5) / 2.0, 1e-15);
}

TEST(SynthShapes, DeterministicBalancedAndBoxed) {
    Dataset<float> a = synth_shapes<float>(11, 40, 4, 16);
    Dataset<float> b = synth_shapes<float>(11, 40, 4, 16);
    ASSERT_EQ(a.size(), 40u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.samples[i].image.values(), b.samples[i].image.values());
        EXPECT_EQ(a.samples[i].label, b.samples[i].label);
    }

    std::vector<int> counts(4, 0);
    for (const auto& s : a.samples) {
        counts[static_cast<std::size_t>(s.label)]++;
        EXPECT_TRUE(encoding_sums_exact(s.image));
        EXPECT_FALSE(s.box.empty());
        EXPECT_GE(s.box.x0, 0);
        EXPECT_GE(s.box.y0, 0);
        EXPECT_LE(s.box.x1, 16);
        EXPECT_LE(s.box.y1, 16);
    }
    for (int c : counts) EXPECT_EQ(c, 10);

    Dataset<float> c = synth_shapes<float>(12, 40, 4, 16);
    EXPECT_NE(a.samples[0].image.values(), c.samples[0].image.values());

    EXPECT_THROW(synth_shapes<float>(1, 10, 1, 16), ValueError);
    EXPECT_THROW(synth_shapes<float>(1, 10, 4, 8), ValueError);
}

TEST(CifarLoader, FullSizeBatchArithmeticAndContent) {
    const std::string path = temp_path("bcos_fake_cifar.bin");
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        Rng rng(5);
        std::vector<char> record(kCifarRecordBytes);
        for (int rec = 0; rec < 10000; ++rec) {
            record[0] = static_cast<char>(rec % 10);
            for (std::size_t i = 1; i < kCifarRecordBytes; ++i) {
                record[i] = static_cast<char>(rng.below(256));
            }
            f.write(record.data(), static_cast<std::streamsize>(record.size()));
        }
    }
    ASSERT_EQ(std::filesystem::file_size(path), 30730000u);
    auto samples = load_cifar_batch<float>(path);
    EXPECT_EQ(samples.size(), 10000u);
    EXPECT_GE(samples[0].label, 0);
    EXPECT_LE(samples[0].label, 9);
    EXPECT_TRUE(encoding_sums_exact(samples[0].image));
    EXPECT_TRUE(encoding_sums_exact(samples[9999].image));
    std::filesystem::remove(path);
}

TEST(CifarLoader, RejectsWrongSizeAndBadLabels) {
    const std::string path = temp_path("bcos_bad_cifar.bin");
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        std::vector<char> bytes(kCifarRecordBytes + 7, 0);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    EXPECT_THROW(load_cifar_batch<float>(path), FormatError);

    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        std::vector<char> record(kCifarRecordBytes, 0);
        record[0] = 11;  // invalid label byte
        f.write(record.data(), static_cast<std::streamsize>(record.size()));
    }
    EXPECT_THROW(load_cifar_batch<float>(path), FormatError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_cifar_batch<float>(path), IoError);
    EXPECT_THROW(load_cifar10<float>("/nonexistent-dir"), IoError);
}

TEST(Augmentation, HflipMirrorsImageAndBox) {
    Tensor<float> img(Shape{6, 1, 4}, 0.0f);
    img[2] = 1.0f;  // channel 0, x = 2
    Box box{2, 0, 3, 1};
    hflip_inplace(img, box);
    EXPECT_EQ(img[1], 1.0f);
    EXPECT_EQ(box.x0, 1);
    EXPECT_EQ(box.x1, 2);
    // flipping twice restores
    hflip_inplace(img, box);
    EXPECT_EQ(img[2], 1.0f);
    EXPECT_EQ(box.x0, 2);
}

TEST(Augmentation, PadCropShiftsBoxAndFillsEncodedBlack) {
    Rng rng(9);
    Tensor<float> rgb = Tensor<float>::uniform(Shape{3, 8, 8}, rng, 0.0f, 1.0f);
    Tensor<float> img = encode_rgb6(rgb);
    Box box{3, 3, 5, 5};
    // shift fully toward the top-left pad: content moves down-right by 2
    Tensor<float> out = pad_crop(img, 2, 0, 0, box);
    EXPECT_EQ(box.x0, 5);
    EXPECT_EQ(box.y0, 5);
    EXPECT_EQ(box.x1, 7);
    EXPECT_EQ(box.y1, 7);
    EXPECT_TRUE(encoding_sums_exact(out));  // padding is encoded black
    // the first two rows are padding now
    EXPECT_EQ(out[0], 0.0f);
    EXPECT_EQ(out[3 * 64], 1.0f);
    // interior pixel moved by (2, 2)
    EXPECT_EQ(out.at({0, 4, 4}), img.at({0, 2, 2}));
}

TEST(Train, StartLossMatchesUniformClosedForm) {
    // the 9-layer recipe keeps initial scores near zero, so the loss starts
    // at the uniform-probability BCE value
    const std::size_t k = 10;
    Dataset<float> ds = synth_shapes<float>(31, 8, k, 32);
    Network<float> net = Network<float>::create(build_cifar9(2.0, 2), 1);
    const double uniform_loss = -(std::log(1.0 / k) + (k - 1) * std::log(1.0 - 1.0 / k)) / k;
    Tensor<float> first(Shape{8, 6, 32, 32});
    std::vector<int> labels;
    for (std::size_t i = 0; i < 8; ++i) {
        std::copy_n(ds.samples[i].image.values().begin(), 6 * 1024,
                    first.values().begin() + static_cast<std::ptrdiff_t>(i * 6 * 1024));
        labels.push_back(ds.samples[i].label);
    }
    Tensor<float> loss0 = bce_one_vs_all_loss(net.logits(first), labels,
                                              static_cast<float>(net.spec().output_bias));
    EXPECT_NEAR(loss0[0], uniform_loss, 0.10 * uniform_loss);
}

TEST(Train, LossDecreasesOverEpochs) {
    const std::size_t k = 4;
    Dataset<float> train_ds = synth_shapes<float>(31, 128, k, 16);
    Dataset<float> test_ds = synth_shapes<float>(32, 64, k, 16);
    Network<float> net = Network<float>::create(build_tiny(2.0, 2, 8, k), 1);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 32;
    cfg.seed = 5;
    auto metrics = train(net, train_ds, test_ds, cfg);
    ASSERT_EQ(metrics.size(), 3u);
    EXPECT_LT(metrics.back().loss, metrics.front().loss);
    EXPECT_DOUBLE_EQ(metrics.front().lr, cfg.lr_init);
}

TEST(Train, SeededRunsProduceIdenticalCsvAndWeights) {
    const std::string csv_a = temp_path("bcos_metrics_a.csv");
    const std::string csv_b = temp_path("bcos_metrics_b.csv");
    auto run = [](const std::string& csv) {
        Dataset<float> train_ds = synth_shapes<float>(41, 96, 4, 16);
        Dataset<float> test_ds = synth_shapes<float>(42, 32, 4, 16);
        Network<float> net = Network<float>::create(build_tiny(2.0, 2, 8, 4), 9);
        TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 32;
        cfg.seed = 77;
        cfg.metrics_path = csv;
        train(net, train_ds, test_ds, cfg);
        return net.layers()[0].kernel.values();
    };
    const auto wa = run(csv_a);
    const auto wb = run(csv_b);
    EXPECT_EQ(wa, wb);
    const std::string a = slurp(csv_a);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(csv_b));
    EXPECT_NE(a.find("epoch,lr,loss,train_acc,test_acc"), std::string::npos);
    std::filesystem::remove(csv_a);
    std::filesystem::remove(csv_b);
}

TEST(Train, ForwardInvariantToRawWeightRescaling) {
    Dataset<float> ds = synth_shapes<float>(51, 16, 4, 16);
    Network<float> net = Network<float>::create(build_tiny(2.0, 2, 8, 4), 13);
    Tensor<float> x(Shape{1, 6, 16, 16});
    std::copy_n(ds.samples[0].image.values().begin(), 6 * 256, x.values().begin());
    Tensor<float> before = net.logits(x);

    // power-of-two rescale: normalization cancels it exactly, bit for bit
    auto& kernel = net.layers()[1].kernel;
    const std::size_t slice = kernel.numel() / kernel.dim(0);
    for (std::size_t i = 0; i < slice; ++i) kernel[i] *= 4.0f;
    Tensor<float> after = net.logits(x);
    EXPECT_EQ(after.values(), before.values());

    // generic positive rescale: only rounding noise remains
    for (std::size_t i = 0; i < slice; ++i) kernel[i] *= 3.0f;
    Tensor<float> after3 = net.logits(x);
    for (std::size_t i = 0; i < before.numel(); ++i) {
        EXPECT_NEAR(after3[i], before[i], 1e-5f * std::max(1.0f, std::fabs(before[i])));
    }
}

TEST(Train, NanLossAbortsWithDiagnostic) {
    Dataset<float> ds = synth_shapes<float>(61, 32, 4, 16);
    Network<float> net = Network<float>::create(build_tiny(2.0, 1, 8, 4), 17);
    net.layers()[0].kernel[0] = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 16;
    try {
        train(net, ds, ds, cfg);
        FAIL() << "expected NanLossError";
    } catch (const NanLossError& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    }
}

TEST(Train, ConfigValidation) {
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.epochs = 1;
    cfg.lr_init = 1e-5;
    cfg.lr_final = 1e-3;
    EXPECT_THROW(cfg.validate(), ConfigError);
}
