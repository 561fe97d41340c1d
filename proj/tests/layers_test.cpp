#include "bcos/layers.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "bcos/common.hpp"
#include "bcos/tensor.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace bcos;
using bcos::testing::check_gradients;
using bcos::testing::extract_patch;

TEST(Normalize, HandValuesAndIdempotence) {
    Tensor<double> w(Shape{1, 2}, {3.0, 4.0});
    Tensor<double> n = unit_normalize_rows(w);
    EXPECT_DOUBLE_EQ(n[0], 0.6);
    EXPECT_DOUBLE_EQ(n[1], 0.8);

    Tensor<double> unit(Shape{1, 2}, {0.6, 0.8});
    Tensor<double> again = unit_normalize_rows(unit);
    EXPECT_NEAR(again[0], 0.6, 1e-15);
    EXPECT_NEAR(again[1], 0.8, 1e-15);
}

TEST(Normalize, AllRowNormsBecomeOne) {
    Rng rng(3);
    Tensor<float> w = Tensor<float>::uniform(Shape{8, 16}, rng, -1.0f, 1.0f);
    Tensor<float> n = unit_normalize_rows(w);
    for (std::size_t r = 0; r < 8; ++r) {
        float acc = 0.0f;
        for (std::size_t c = 0; c < 16; ++c) acc += n[r * 16 + c] * n[r * 16 + c];
        EXPECT_NEAR(std::sqrt(acc), 1.0f, 1e-6f);
    }
}

TEST(Normalize, RejectsNearZeroRowNamingIt) {
    Tensor<double> w(Shape{2, 2}, {1.0, 0.0, 0.0, 0.0});
    try {
        unit_normalize_rows(w);
        FAIL() << "expected ValueError";
    } catch (const ValueError& e) {
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
    }
}

TEST(Normalize, DifferentiableThroughNormalization) {
    Rng rng(5);
    Tensor<double> w = Tensor<double>::uniform(Shape{3, 4}, rng, -1.5, 1.5);
    auto build = [](Tape<double>&, std::vector<Tensor<double>>& in) {
        return sum_all(mul(unit_normalize_rows(in[0]), in[1]));
    };
    Tensor<double> c = Tensor<double>::uniform(Shape{3, 4}, rng, -1.0, 1.0);
    auto report = check_gradients(build, {w, c});
    EXPECT_TRUE(report.ok) << report.worst_at;
}

namespace {

BcosDense<double> dense_with_weight(Tensor<double> w, double b, double gamma,
                                    std::size_t maxout_units = 1) {
    BcosDense<double> d;
    d.weight = std::move(w);
    d.cos_exponent = b;
    d.out_scale = gamma;
    d.maxout = maxout_units;
    return d;
}

}  // namespace

TEST(DenseForward, AlignedOrthogonalAndOblique) {
    // perfectly aligned input: output equals the input norm
    BcosDense<double> aligned = dense_with_weight(Tensor<double>(Shape{1, 2}, {3.0, 4.0}), 2.0, 1.0);
    Tensor<double> x(Shape{1, 2}, {3.0, 4.0});
    EXPECT_NEAR(aligned.forward(x)[0], 5.0, 1e-12);

    // orthogonal input
    BcosDense<double> ortho = dense_with_weight(Tensor<double>(Shape{1, 2}, {1.0, 0.0}), 1.75, 1.0);
    Tensor<double> y(Shape{1, 2}, {0.0, 1.0});
    EXPECT_NEAR(ortho.forward(y)[0], 0.0, 1e-12);

    // oblique: 3 * |3/5|^1
    BcosDense<double> oblique = dense_with_weight(Tensor<double>(Shape{1, 2}, {1.0, 0.0}), 2.0, 1.0);
    EXPECT_NEAR(oblique.forward(x)[0], 1.8, 1e-12);
}

TEST(DenseForward, ExponentOneIsPlainNormalizedLinear) {
    Rng rng(7);
    BcosDense<float> layer = BcosDense<float>::create(8, 5, 1, 1.0f, 0.7f, rng);
    Tensor<float> x = Tensor<float>::uniform(Shape{4, 8}, rng, -2.0f, 2.0f);
    Tensor<float> out = layer.forward(x);
    Tensor<float> unit = unit_normalize_rows(layer.weight);
    Tensor<float> ref = scale(matmul(x, transpose(unit)), 0.7f);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        EXPECT_NEAR(out[i], ref[i], 1e-6f * std::max(1.0f, std::fabs(ref[i])));
    }
}

TEST(DenseForward, ZeroInputGivesExactZero) {
    Rng rng(9);
    for (double b : {1.0, 1.5, 2.0, 2.5}) {
        BcosDense<double> layer = BcosDense<double>::create(6, 3, 2, b, 2.0, rng);
        Tensor<double> x(Shape{2, 6}, 0.0);
        Tensor<double> out = layer.forward(x);
        for (const double v : out.values()) EXPECT_EQ(v, 0.0);
    }
}

TEST(DenseForward, MagnitudeBoundAndSignProperty) {
    Rng rng(11);
    const double gamma = 1.7;
    BcosDense<double> layer = BcosDense<double>::create(10, 6, 1, 2.0, gamma, rng);
    Tensor<double> unit = unit_normalize_rows(layer.weight).detached();
    for (int trial = 0; trial < 20; ++trial) {
        Tensor<double> x = Tensor<double>::uniform(Shape{1, 10}, rng, -2.0, 2.0);
        double norm = 0.0;
        for (std::size_t i = 0; i < 10; ++i) norm += x[i] * x[i];
        norm = std::sqrt(norm);
        Tensor<double> out = layer.forward(x);
        for (std::size_t u = 0; u < 6; ++u) {
            EXPECT_LE(std::fabs(out[u]), gamma * norm + 1e-12);
            double lin = 0.0;
            for (std::size_t i = 0; i < 10; ++i) lin += unit[u * 10 + i] * x[i];
            if (out[u] != 0.0) {
                EXPECT_EQ(out[u] > 0.0, lin > 0.0);
            }
        }
    }
}

TEST(DenseForward, PositivelyHomogeneousOfDegreeOne) {
    Rng rng(13);
    BcosDense<double> layer = BcosDense<double>::create(8, 4, 2, 2.25, 3.0, rng);
    Tensor<double> x = Tensor<double>::uniform(Shape{1, 8}, rng, -1.0, 1.0);
    Tensor<double> base = layer.forward(x);
    for (double alpha : {0.5, 2.0, 7.5}) {
        Tensor<double> xs = x.clone();
        for (auto& v : xs.values()) v *= alpha;
        Tensor<double> scaled = layer.forward(xs);
        for (std::size_t i = 0; i < base.numel(); ++i) {
            EXPECT_NEAR(scaled[i], alpha * base[i], 1e-9 * std::max(1.0, std::fabs(base[i])));
        }
    }
}

TEST(DenseForward, SingleLayerDynamicLinearity) {
    // out == gamma * diag(|cos|^(B-1)) * What * x, built explicitly
    Rng rng(17);
    const double gamma = 2.5, b = 2.5;
    BcosDense<double> layer = BcosDense<double>::create(7, 5, 1, b, gamma, rng);
    Tensor<double> x = Tensor<double>::uniform(Shape{1, 7}, rng, -2.0, 2.0);
    Tensor<double> out = layer.forward(x);

    Tensor<double> unit = unit_normalize_rows(layer.weight).detached();
    double norm = 0.0;
    for (std::size_t i = 0; i < 7; ++i) norm += x[i] * x[i];
    norm = std::max(std::sqrt(norm), 1e-6);
    for (std::size_t u = 0; u < 5; ++u) {
        double lin = 0.0;
        for (std::size_t i = 0; i < 7; ++i) lin += unit[u * 7 + i] * x[i];
        const double scaling = std::pow(std::fabs(lin / norm) + 1e-12, b - 1.0);
        EXPECT_NEAR(out[u], gamma * scaling * lin, 1e-10);
    }
}

TEST(DenseForward, GradientAgainstFiniteDifferences) {
    Rng rng(19);
    for (double b : {1.0, 1.5, 2.0}) {
        Tensor<double> w = Tensor<double>::uniform(Shape{6, 5}, rng, -1.0, 1.0);
        Tensor<double> x = Tensor<double>::uniform(Shape{2, 5}, rng, -2.0, 2.0);
        auto build = [b](Tape<double>&, std::vector<Tensor<double>>& in) {
            BcosDense<double> layer;
            layer.weight = in[1].detached();
            layer.cos_exponent = b;
            layer.out_scale = 1.3;
            layer.maxout = 2;
            return sum_all(layer.forward_with(in[1], in[0], false));
        };
        auto report = check_gradients(build, {x, w});
        EXPECT_TRUE(report.ok) << "b=" << b << " " << report.worst_at;
    }
}

TEST(MaxoutReduce, IdentityAndGroups) {
    Tensor<double> v(Shape{4}, {1.0, 5.0, 2.0, 2.0});
    EXPECT_EQ(maxout_reduce(v, 1).values(), v.values());
    EXPECT_EQ(maxout_reduce(v, 2).values(), (std::vector<double>{5.0, 2.0}));
}

TEST(ConvForward, OnePixelKernelMatchesDenseFormula) {
    Rng rng(23);
    BcosConv<double> conv = BcosConv<double>::create(3, 4, 1, 1, 0, 1, 2.0, 1.5, rng);
    Tensor<double> x = Tensor<double>::uniform(Shape{1, 3, 4, 4}, rng, -1.0, 1.0);
    Tensor<double> out = conv.forward(x);

    BcosDense<double> dense;
    dense.weight = reshape(conv.kernel, Shape{4, 3});
    dense.cos_exponent = 2.0;
    dense.out_scale = 1.5;
    dense.maxout = 1;
    for (std::size_t y = 0; y < 4; ++y) {
        for (std::size_t xx = 0; xx < 4; ++xx) {
            Tensor<double> pixel(Shape{1, 3});
            for (std::size_t c = 0; c < 3; ++c) pixel[c] = x[(c * 4 + y) * 4 + xx];
            Tensor<double> ref = dense.forward(pixel);
            for (std::size_t u = 0; u < 4; ++u) {
                EXPECT_NEAR(out[(u * 4 + y) * 4 + xx], ref[u], 1e-10);
            }
        }
    }
}

TEST(ConvForward, ExponentOneEqualsNormalizedConvolution) {
    Rng rng(29);
    BcosConv<float> conv = BcosConv<float>::create(3, 5, 3, 1, 1, 1, 1.0f, 0.8f, rng);
    Tensor<float> x = Tensor<float>::uniform(Shape{2, 3, 6, 6}, rng, -1.0f, 1.0f);
    Tensor<float> out = conv.forward(x);
    Tensor<float> ref = scale(conv2d(x, unit_normalize_kernel(conv.kernel), 1, 1), 0.8f);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        EXPECT_NEAR(out[i], ref[i], 1e-6f * std::max(1.0f, std::fabs(ref[i])));
    }
}

TEST(ConvForward, AgreesWithDenseOnExtractedPatches) {
    Rng rng(31);
    for (std::size_t maxout_units : {std::size_t{1}, std::size_t{2}}) {
        BcosConv<double> conv =
            BcosConv<double>::create(3, 4, 3, 1, 1, maxout_units, 2.5, 1.2, rng);
        Tensor<double> x = Tensor<double>::uniform(Shape{1, 3, 8, 8}, rng, -1.0, 1.0);
        Tensor<double> out = conv.forward(x);

        BcosDense<double> dense;
        dense.weight = reshape(conv.kernel, Shape{4 * maxout_units, 27});
        dense.cos_exponent = 2.5;
        dense.out_scale = 1.2;
        dense.maxout = maxout_units;
        const std::size_t oh = out.dim(2), ow = out.dim(3);
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xx = 0; xx < ow; ++xx) {
                Tensor<double> patch(Shape{1, 27}, extract_patch(x, 0, 3, 1, 1, y, xx));
                Tensor<double> ref = dense.forward(patch);
                for (std::size_t u = 0; u < 4; ++u) {
                    EXPECT_NEAR(out[(u * oh + y) * ow + xx], ref[u], 1e-10)
                        << "maxout=" << maxout_units << " unit " << u;
                }
            }
        }
    }
}

TEST(ConvForward, ZeroPatchesYieldExactZero) {
    Rng rng(37);
    BcosConv<double> conv = BcosConv<double>::create(2, 3, 3, 1, 1, 2, 1.5, 17.0, rng);
    Tensor<double> x(Shape{1, 2, 5, 5}, 0.0);
    Tensor<double> out = conv.forward(x);
    for (const double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvForward, GradientAgainstFiniteDifferences) {
    Rng rng(41);
    Tensor<double> x = Tensor<double>::uniform(Shape{1, 2, 5, 5}, rng, -1.5, 1.5);
    Tensor<double> k = Tensor<double>::uniform(Shape{4, 2, 3, 3}, rng, -1.0, 1.0);
    for (double b : {1.0, 2.0, 2.5}) {
        auto build = [b](Tape<double>&, std::vector<Tensor<double>>& in) {
            BcosConv<double> conv;
            conv.kernel = in[1].detached();
            conv.stride = 2;
            conv.padding = 1;
            conv.maxout = 2;
            conv.cos_exponent = b;
            conv.out_scale = 1.4;
            return sum_all(conv.forward_with(in[1], in[0], false));
        };
        auto report = check_gradients(build, {x, k});
        EXPECT_TRUE(report.ok) << "b=" << b << " " << report.worst_at;
    }
}

TEST(ScalePolicy, PlainNetValues) {
    EXPECT_NEAR(out_scale_for_plain_net(2.0), std::pow(10.0, 1.25), 1e-9);
    EXPECT_NEAR(out_scale_for_plain_net(2.0), 17.7828, 1e-4);
    EXPECT_NEAR(out_scale_for_plain_net(1.0), 0.5623, 1e-4);
    EXPECT_NEAR(out_scale_for_plain_net(1.25), 1.3335, 1e-4);
}

TEST(ScalePolicy, DeepNetValues) {
    EXPECT_DOUBLE_EQ(out_scale_for_deep_net(100.0, 10000.0), 1.0);
    EXPECT_NEAR(out_scale_for_deep_net(100.0, 3.0 * 3.0 * 64.0), 4.1667, 1e-4);
    EXPECT_DOUBLE_EQ(out_scale_for_deep_net(1000.0, 1.0), 1000.0);
}

TEST(ScalePolicy, TemperatureTableAndInterpolation) {
    EXPECT_DOUBLE_EQ(temperature_for_plain_net(1.0), 1e-3);
    EXPECT_DOUBLE_EQ(temperature_for_plain_net(1.25), 1e-3);
    EXPECT_DOUBLE_EQ(temperature_for_plain_net(1.5), 1e-2);
    EXPECT_DOUBLE_EQ(temperature_for_plain_net(2.0), 1e2);
    EXPECT_DOUBLE_EQ(temperature_for_plain_net(2.5), 1e3);
    // halfway between tabulated 1.5 and 1.75 in log10 space
    EXPECT_NEAR(temperature_for_plain_net(1.625), std::pow(10.0, -0.5), 1e-9);
    // clamped outside the table
    EXPECT_DOUBLE_EQ(temperature_for_plain_net(0.5), 1e-3);
    EXPECT_DOUBLE_EQ(temperature_for_plain_net(3.0), 1e3);
}
