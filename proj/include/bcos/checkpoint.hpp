#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "bcos/common.hpp"
#include "bcos/network.hpp"

namespace bcos {

/// Checkpoint container: magic "BCOS", u16 version, length-prefixed UTF-8
/// JSON metadata, raw kernels as little-endian float32 in layer order, CRC32
/// footer over everything preceding it. Round trips are bit-exact for
/// float-precision networks.
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline float get_f32(const std::uint8_t* p) {
    const std::uint32_t bits = get_u32(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline nlohmann::json spec_to_json(const NetworkSpec& spec) {
    nlohmann::json layers = nlohmann::json::array();
    for (const ConvLayerSpec& l : spec.layers) {
        layers.push_back({{"in", l.in_channels},
                          {"units", l.units},
                          {"maxout", l.maxout},
                          {"kernel", l.kernel},
                          {"stride", l.stride},
                          {"padding", l.padding},
                          {"out_scale", l.out_scale}});
    }
    return {{"layers", layers},
            {"cos_exponent", spec.cos_exponent},
            {"temperature", spec.temperature},
            {"output_bias", spec.output_bias},
            {"num_classes", spec.num_classes},
            {"encoding", to_string(spec.encoding)}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec spec;
    spec.cos_exponent = j.at("cos_exponent").get<double>();
    spec.temperature = j.at("temperature").get<double>();
    spec.output_bias = j.at("output_bias").get<double>();
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    spec.encoding = input_encoding_from(j.at("encoding").get<std::string>());
    for (const auto& l : j.at("layers")) {
        spec.layers.push_back({l.at("in").get<std::size_t>(), l.at("units").get<std::size_t>(),
                               l.at("maxout").get<std::size_t>(), l.at("kernel").get<std::size_t>(),
                               l.at("stride").get<std::size_t>(),
                               l.at("padding").get<std::size_t>(),
                               l.at("out_scale").get<double>()});
    }
    return spec;
}

}  // namespace detail

struct CheckpointInfo {
    NetworkSpec spec;
    std::uint64_t seed = 0;
    std::size_t trained_epochs = 0;
};

template <typename T>
std::vector<std::uint8_t> checkpoint_bytes(const Network<T>& net, std::uint64_t seed,
                                           std::size_t trained_epochs) {
    nlohmann::json meta = detail::spec_to_json(net.spec());
    meta["seed"] = seed;
    meta["trained_epochs"] = trained_epochs;
    const std::string meta_str = meta.dump();

    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'B', 'C', 'O', 'S'});
    detail::put_u16(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(meta_str.size()));
    out.insert(out.end(), meta_str.begin(), meta_str.end());
    for (const BcosConv<T>& layer : net.layers()) {
        for (const T v : layer.kernel.values()) {
            detail::put_f32(out, static_cast<float>(v));
        }
    }
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size())));
    detail::put_u32(out, crc);
    return out;
}

template <typename T>
void save_checkpoint(const Network<T>& net, const std::string& path, std::uint64_t seed = 0,
                     std::size_t trained_epochs = 0) {
    const std::vector<std::uint8_t> bytes = checkpoint_bytes(net, seed, trained_epochs);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to '" + path + "'");
}

template <typename T>
std::pair<Network<T>, CheckpointInfo> load_checkpoint_bytes(
    const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 14) throw TruncatedError("checkpoint shorter than fixed header");
    if (std::memcmp(bytes.data(), "BCOS", 4) != 0) {
        throw FormatError("bad checkpoint magic bytes");
    }
    const std::uint16_t version = detail::get_u16(bytes.data() + 4);
    if (version != kCheckpointVersion) {
        throw VersionError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t stored_crc = detail::get_u32(bytes.data() + bytes.size() - 4);
    const auto computed_crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size() - 4)));
    if (stored_crc != computed_crc) {
        throw ChecksumError("checkpoint CRC32 mismatch");
    }

    const std::uint32_t meta_len = detail::get_u32(bytes.data() + 6);
    std::size_t off = 10;
    if (off + meta_len + 4 > bytes.size()) throw TruncatedError("checkpoint metadata truncated");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(off + meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }
    off += meta_len;

    CheckpointInfo info;
    try {
        info.spec = detail::spec_from_json(meta);
        info.seed = meta.value("seed", std::uint64_t{0});
        info.trained_epochs = meta.value("trained_epochs", std::size_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint metadata incomplete: ") + e.what());
    }
    try {
        info.spec.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint metadata inconsistent: ") + e.what());
    }

    std::vector<Tensor<T>> kernels;
    for (const ConvLayerSpec& l : info.spec.layers) {
        const Shape shape{l.units * l.maxout, l.in_channels, l.kernel, l.kernel};
        const std::size_t count = shape_numel(shape);
        if (off + count * 4 > bytes.size() - 4) {
            throw TruncatedError("checkpoint payload truncated");
        }
        std::vector<T> vals(count);
        for (std::size_t i = 0; i < count; ++i) {
            vals[i] = static_cast<T>(detail::get_f32(bytes.data() + off + i * 4));
        }
        off += count * 4;
        kernels.emplace_back(shape, std::move(vals));
    }
    if (off != bytes.size() - 4) {
        throw FormatError("checkpoint payload has trailing bytes");
    }
    return {Network<T>::from_kernels(info.spec, std::move(kernels)), info};
}

template <typename T>
std::pair<Network<T>, CheckpointInfo> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return load_checkpoint_bytes<T>(bytes);
}

}  // namespace bcos
