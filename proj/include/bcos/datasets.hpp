#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bcos/common.hpp"
#include "bcos/encoding.hpp"
#include "bcos/tensor.hpp"

namespace bcos {

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Box {
    long x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool contains(long x, long y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
};

template <typename T>
struct Sample {
    Tensor<T> image;  // [6, S, S] encoded
    int label = 0;
    Box box;          // ground-truth extent of the class object
};

template <typename T>
struct Dataset {
    std::vector<Sample<T>> samples;
    std::size_t num_classes = 0;
    std::size_t image_size = 0;

    std::size_t size() const { return samples.size(); }
};

namespace detail {

enum class ShapeKind { Circle, Square, Triangle, Cross };

struct ClassStyle {
    ShapeKind kind;
    double r, g, b;
};

/// shape x color palette; class k uses entry k.
inline const ClassStyle& class_style(std::size_t k) {
    static const ClassStyle styles[10] = {
        {ShapeKind::Circle, 0.90, 0.10, 0.10},   // red circle
        {ShapeKind::Square, 0.10, 0.90, 0.10},   // green square
        {ShapeKind::Triangle, 0.15, 0.25, 0.95}, // blue triangle
        {ShapeKind::Cross, 0.95, 0.85, 0.10},    // yellow cross
        {ShapeKind::Circle, 0.10, 0.85, 0.90},   // cyan circle
        {ShapeKind::Square, 0.90, 0.10, 0.85},   // magenta square
        {ShapeKind::Triangle, 0.95, 0.55, 0.10}, // orange triangle
        {ShapeKind::Cross, 0.55, 0.15, 0.90},    // violet cross
        {ShapeKind::Circle, 0.95, 0.95, 0.95},   // white circle
        {ShapeKind::Square, 0.20, 0.90, 0.65},   // teal square
    };
    return styles[k];
}

inline bool inside_shape(ShapeKind kind, double dx, double dy, double r) {
    switch (kind) {
        case ShapeKind::Circle:
            return dx * dx + dy * dy <= r * r;
        case ShapeKind::Square:
            return std::fabs(dx) <= r * 0.85 && std::fabs(dy) <= r * 0.85;
        case ShapeKind::Triangle:
            return dy >= -r && dy <= r && std::fabs(dx) <= (dy + r) * 0.55;
        case ShapeKind::Cross:
            return (std::fabs(dx) <= r / 3.0 && std::fabs(dy) <= r) ||
                   (std::fabs(dy) <= r / 3.0 && std::fabs(dx) <= r);
    }
    return false;
}

}  // namespace detail

/// Procedural dataset: one colored shape per image on a noisy background,
/// class = shape/color pair, labels assigned round-robin. The recorded box
/// is the tight extent of the drawn mask. Deterministic in the seed.
template <typename T>
Dataset<T> synth_shapes(std::uint64_t seed, std::size_t n, std::size_t num_classes,
                        std::size_t size) {
    if (num_classes < 2 || num_classes > 10) {
        throw ValueError("synthetic dataset supports 2..10 classes, got " +
                         std::to_string(num_classes));
    }
    if (size < 16) throw ValueError("synthetic images must be at least 16x16");

    Dataset<T> ds;
    ds.num_classes = num_classes;
    ds.image_size = size;
    Rng rng(seed);
    const double s = static_cast<double>(size);

    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % num_classes);
        const detail::ClassStyle& style = detail::class_style(static_cast<std::size_t>(label));

        Tensor<T> rgb(Shape{3, size, size});
        const std::size_t plane = size * size;
        for (std::size_t p = 0; p < plane; ++p) {
            rgb[p] = static_cast<T>(rng.uniform(0.05, 0.45));
            rgb[plane + p] = static_cast<T>(rng.uniform(0.05, 0.45));
            rgb[2 * plane + p] = static_cast<T>(rng.uniform(0.05, 0.45));
        }

        const double r = rng.uniform(s / 5.0, s / 3.0);
        const double cx = rng.uniform(r, s - 1.0 - r);
        const double cy = rng.uniform(r, s - 1.0 - r);
        const double brightness = rng.uniform(0.85, 1.0);

        Box box{static_cast<long>(size), static_cast<long>(size), 0, 0};
        for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
                if (!detail::inside_shape(style.kind, static_cast<double>(x) - cx,
                                          static_cast<double>(y) - cy, r)) {
                    continue;
                }
                const std::size_t p = y * size + x;
                rgb[p] = static_cast<T>(style.r * brightness);
                rgb[plane + p] = static_cast<T>(style.g * brightness);
                rgb[2 * plane + p] = static_cast<T>(style.b * brightness);
                box.x0 = std::min(box.x0, static_cast<long>(x));
                box.y0 = std::min(box.y0, static_cast<long>(y));
                box.x1 = std::max(box.x1, static_cast<long>(x) + 1);
                box.y1 = std::max(box.y1, static_cast<long>(y) + 1);
            }
        }

        ds.samples.push_back({encode_rgb6(rgb), label, box});
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary format
// ---------------------------------------------------------------------------

inline constexpr std::size_t kCifarRecordBytes = 3073;  // label + 3 * 1024
inline constexpr std::size_t kCifarImageSize = 32;

/// Parse one batch file of 3073-byte records: a label byte followed by
/// channel-major R, G, B planes of a row-major 32x32 image.
template <typename T>
std::vector<Sample<T>> load_cifar_batch(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open CIFAR batch '" + path + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                            std::istreambuf_iterator<char>());
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
        throw FormatError("CIFAR batch '" + path + "' has size " +
                          std::to_string(bytes.size()) + ", not a multiple of " +
                          std::to_string(kCifarRecordBytes));
    }
    const std::size_t count = bytes.size() / kCifarRecordBytes;
    constexpr std::size_t plane = kCifarImageSize * kCifarImageSize;

    std::vector<Sample<T>> samples;
    samples.reserve(count);
    for (std::size_t rec = 0; rec < count; ++rec) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data()) +
                        rec * kCifarRecordBytes;
        const int label = p[0];
        if (label > 9) {
            throw FormatError("CIFAR batch '" + path + "' record " + std::to_string(rec) +
                              " has label byte " + std::to_string(label));
        }
        Tensor<T> rgb(Shape{3, kCifarImageSize, kCifarImageSize});
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < plane; ++i) {
                rgb[c * plane + i] = static_cast<T>(p[1 + c * plane + i]) / T(255);
            }
        }
        samples.push_back({encode_rgb6(rgb), label,
                           Box{0, 0, kCifarImageSize, kCifarImageSize}});
    }
    return samples;
}

template <typename T>
struct CifarSplits {
    Dataset<T> train;
    Dataset<T> test;
};

/// Load the standard binary batches from a directory: data_batch_1..5.bin
/// for training and test_batch.bin for testing.
template <typename T>
CifarSplits<T> load_cifar10(const std::string& dir) {
    namespace fs = std::filesystem;
    CifarSplits<T> out;
    out.train.num_classes = out.test.num_classes = 10;
    out.train.image_size = out.test.image_size = kCifarImageSize;
    for (int i = 1; i <= 5; ++i) {
        const std::string path = (fs::path(dir) / ("data_batch_" + std::to_string(i) + ".bin")).string();
        if (!fs::exists(path)) throw IoError("missing CIFAR batch file '" + path + "'");
        auto batch = load_cifar_batch<T>(path);
        std::move(batch.begin(), batch.end(), std::back_inserter(out.train.samples));
    }
    const std::string test_path = (fs::path(dir) / "test_batch.bin").string();
    if (!fs::exists(test_path)) throw IoError("missing CIFAR batch file '" + test_path + "'");
    out.test.samples = load_cifar_batch<T>(test_path);
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation (label-preserving, box-adjusting)
// ---------------------------------------------------------------------------

/// Mirror an encoded image horizontally.
template <typename T>
void hflip_inplace(Tensor<T>& img, Box& box) {
    const std::size_t ch = img.dim(0), h = img.dim(1), w = img.dim(2);
    for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            T* row = img.values().data() + (c * h + y) * w;
            std::reverse(row, row + w);
        }
    }
    const long width = static_cast<long>(w);
    const long nx0 = width - box.x1;
    const long nx1 = width - box.x0;
    box.x0 = nx0;
    box.x1 = nx1;
}

/// Pad with encoded black ([0,0,0,1,1,1]) and crop back to the original size
/// at offset (ox, oy) in [0, 2*pad]. The box shifts by (pad - offset), then
/// clamps to the image.
template <typename T>
Tensor<T> pad_crop(const Tensor<T>& img, std::size_t pad, std::size_t ox, std::size_t oy,
                   Box& box) {
    const std::size_t ch = img.dim(0), h = img.dim(1), w = img.dim(2);
    if (ox > 2 * pad || oy > 2 * pad) throw ValueError("crop offset exceeds padding");
    Tensor<T> out(img.shape());
    for (std::size_t c = 0; c < ch; ++c) {
        const T fill = c < 3 ? T(0) : T(1);  // encoded black
        for (std::size_t y = 0; y < h; ++y) {
            const long sy = static_cast<long>(y + oy) - static_cast<long>(pad);
            for (std::size_t x = 0; x < w; ++x) {
                const long sx = static_cast<long>(x + ox) - static_cast<long>(pad);
                const bool in = sy >= 0 && sy < static_cast<long>(h) && sx >= 0 &&
                                sx < static_cast<long>(w);
                out[(c * h + y) * w + x] =
                    in ? img[(c * h + static_cast<std::size_t>(sy)) * w +
                             static_cast<std::size_t>(sx)]
                       : fill;
            }
        }
    }
    const long dx = static_cast<long>(pad) - static_cast<long>(ox);
    const long dy = static_cast<long>(pad) - static_cast<long>(oy);
    box.x0 = std::clamp(box.x0 + dx, 0L, static_cast<long>(w));
    box.x1 = std::clamp(box.x1 + dx, 0L, static_cast<long>(w));
    box.y0 = std::clamp(box.y0 + dy, 0L, static_cast<long>(h));
    box.y1 = std::clamp(box.y1 + dy, 0L, static_cast<long>(h));
    return out;
}

}  // namespace bcos
