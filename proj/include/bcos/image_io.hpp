#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "bcos/common.hpp"
#include "bcos/encoding.hpp"
#include "bcos/tensor.hpp"

namespace bcos {

/// Round-half-to-even quantization of a [0, 1] value to one byte.
template <typename T>
std::uint8_t quantize_u8(T v) {
    const double scaled = static_cast<double>(v) * 255.0;
    const double clamped = scaled < 0.0 ? 0.0 : (scaled > 255.0 ? 255.0 : scaled);
    return static_cast<std::uint8_t>(std::nearbyint(clamped));
}

// ---------------------------------------------------------------------------
// PPM (P6, 8-bit)
// ---------------------------------------------------------------------------

template <typename T>
std::vector<std::uint8_t> ppm_bytes(const Tensor<T>& rgb) {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) {
        throw ShapeError("ppm writer expects [3, H, W], got " + shape_str(rgb.shape()));
    }
    const std::size_t h = rgb.dim(1), w = rgb.dim(2), plane = h * w;
    std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + plane * 3);
    for (std::size_t i = 0; i < plane; ++i) {
        out.push_back(quantize_u8(rgb[i]));
        out.push_back(quantize_u8(rgb[plane + i]));
        out.push_back(quantize_u8(rgb[2 * plane + i]));
    }
    return out;
}

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to '" + path + "'");
}

template <typename T>
void write_ppm(const Tensor<T>& rgb, const std::string& path) {
    write_bytes(path, ppm_bytes(rgb));
}

/// Parse a P6 PPM with maxval 255 into [3, H, W] floats in [0, 1].
template <typename T>
Tensor<T> read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    std::string magic;
    f >> magic;
    if (magic != "P6") throw FormatError("'" + path + "' is not a P6 PPM");
    auto next_token = [&f, &path]() {
        std::string tok;
        while (f >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(f, rest);
                continue;
            }
            return tok;
        }
        throw TruncatedError("'" + path + "' ends inside the PPM header");
    };
    const std::size_t w = std::stoul(next_token());
    const std::size_t h = std::stoul(next_token());
    const std::size_t maxval = std::stoul(next_token());
    if (maxval != 255) throw FormatError("PPM maxval " + std::to_string(maxval) + " unsupported");
    f.get();  // single whitespace after maxval
    std::vector<char> raw(w * h * 3);
    f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(f.gcount()) != raw.size()) {
        throw TruncatedError("'" + path + "' PPM payload truncated");
    }
    Tensor<T> out(Shape{3, h, w});
    const std::size_t plane = h * w;
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            out[c * plane + i] =
                static_cast<T>(static_cast<std::uint8_t>(raw[i * 3 + c])) / T(255);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PNG (8-bit RGBA, no interlacing)
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void png_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(out.data() + crc_start),
              static_cast<uInt>(out.size() - crc_start)));
    put_u32_be(out, crc);
}

}  // namespace detail

/// RGBA PNG from color planes and an alpha plane.
template <typename T>
std::vector<std::uint8_t> png_bytes(const Tensor<T>& rgb, const Tensor<T>& alpha) {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) {
        throw ShapeError("png writer expects rgb [3, H, W], got " + shape_str(rgb.shape()));
    }
    const std::size_t h = rgb.dim(1), w = rgb.dim(2), plane = h * w;
    if (alpha.shape() != Shape{h, w}) {
        throw ShapeError("png alpha shape " + shape_str(alpha.shape()) +
                         " does not match image " + shape_str(rgb.shape()));
    }

    // raw scanlines: filter byte 0 + RGBA per pixel
    std::vector<std::uint8_t> raw;
    raw.reserve(h * (1 + w * 4));
    for (std::size_t y = 0; y < h; ++y) {
        raw.push_back(0);
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            raw.push_back(quantize_u8(rgb[i]));
            raw.push_back(quantize_u8(rgb[plane + i]));
            raw.push_back(quantize_u8(rgb[2 * plane + i]));
            raw.push_back(quantize_u8(alpha[i]));
        }
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK) {
        throw IoError("png deflate failed");
    }
    compressed.resize(bound);

    std::vector<std::uint8_t> out = {137, 'P', 'N', 'G', 13, 10, 26, 10};
    std::vector<std::uint8_t> ihdr;
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(w));
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(6);   // RGBA
    ihdr.push_back(0);   // deflate
    ihdr.push_back(0);   // adaptive filtering
    ihdr.push_back(0);   // no interlace
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", compressed);
    detail::png_chunk(out, "IEND", {});
    return out;
}

template <typename T>
void write_png(const Tensor<T>& rgb, const Tensor<T>& alpha, const std::string& path) {
    write_bytes(path, png_bytes(rgb, alpha));
}

/// Flatten an RGBA explanation onto a white background.
template <typename T>
Tensor<T> composite_on_white(const ExplanationImage<T>& img) {
    const std::size_t plane = img.alpha.numel();
    Tensor<T> out(img.rgb.shape());
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            const T a = img.alpha[i];
            out[c * plane + i] = a * img.rgb[c * plane + i] + (T(1) - a);
        }
    }
    return out;
}

/// Red/blue diverging rendering of a signed map, normalized by max |value|.
/// Used for figures of the gradient-based methods; not a stable contract.
template <typename T>
Tensor<T> render_diverging(const Tensor<T>& values) {
    if (values.rank() != 2) {
        throw ShapeError("diverging renderer expects [H, W], got " + shape_str(values.shape()));
    }
    T peak = T(0);
    for (const T v : values.values()) peak = std::max(peak, std::fabs(v));
    const std::size_t plane = values.numel();
    Tensor<T> rgb(Shape{3, values.dim(0), values.dim(1)}, T(1));
    if (peak == T(0)) return rgb;
    for (std::size_t i = 0; i < plane; ++i) {
        const T t = values[i] / peak;  // [-1, 1]
        if (t >= T(0)) {
            rgb[i] = T(1);
            rgb[plane + i] = T(1) - t;
            rgb[2 * plane + i] = T(1) - t;
        } else {
            rgb[i] = T(1) + t;
            rgb[plane + i] = T(1) + t;
            rgb[2 * plane + i] = T(1);
        }
    }
    return rgb;
}

}  // namespace bcos
