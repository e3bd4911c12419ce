#pragma once

// Single-file tensor container:
//   [u64 little-endian header length N][N bytes JSON index][raw tensor bytes]
// The index maps tensor name -> {"dtype", "shape", "data_offsets": [begin, end]}
// with offsets relative to the start of the raw data region. An optional
// "__metadata__" entry holds string -> string pairs.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "glassgpt/error.hpp"
#include "glassgpt/tensor.hpp"

namespace glassgpt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

enum class DType { f32, f16, bf16 };

inline const char* dtype_name(DType t) {
    switch (t) {
        case DType::f32: return "F32";
        case DType::f16: return "F16";
        case DType::bf16: return "BF16";
    }
    return "?";
}

inline std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 2; }

struct TensorEntry {
    /// Storage type in the file; tensors are always float32 once loaded.
    DType dtype = DType::f32;
    Shape shape;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
};

struct CheckpointIndex {
    std::map<std::string, TensorEntry> entries;
    std::map<std::string, std::string> metadata;
    std::uint64_t header_length = 0;
};

using TensorMap = std::map<std::string, Tensor>;

struct Checkpoint {
    CheckpointIndex index;
    TensorMap tensors;
};

/// IEEE binary16 bits -> float.
inline float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000) << 16;
    std::uint32_t exp = (h >> 10) & 0x1F;
    std::uint32_t mant = h & 0x3FF;
    std::uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            // Subnormal: renormalize into a float32 normal.
            exp = 127 - 15 + 1;
            while ((mant & 0x400) == 0) {
                mant <<= 1;
                --exp;
            }
            mant &= 0x3FF;
            bits = sign | (exp << 23) | (mant << 13);
        }
    } else if (exp == 0x1F) {
        bits = sign | 0x7F800000u | (mant << 13);
    } else {
        bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(bits);
}

inline float bfloat16_to_float(std::uint16_t b) { return std::bit_cast<float>(static_cast<std::uint32_t>(b) << 16); }

namespace detail {

inline DType parse_dtype(const std::string& s, const std::string& name) {
    if (s == "F32") return DType::f32;
    if (s == "F16") return DType::f16;
    if (s == "BF16") return DType::bf16;
    throw checkpoint_error("tensor '" + name + "': unsupported dtype '" + s + "'", name);
}

inline TensorEntry parse_entry(const std::string& name, const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("dtype") || !j.contains("shape") || !j.contains("data_offsets")) {
        throw checkpoint_error("tensor '" + name + "': index entry needs dtype, shape and data_offsets", name);
    }
    TensorEntry e;
    try {
        e.dtype = parse_dtype(j.at("dtype").get<std::string>(), name);
        for (const auto& d : j.at("shape")) {
            const auto extent = d.get<std::int64_t>();
            if (extent <= 0) throw checkpoint_error("tensor '" + name + "': non-positive extent", name);
            e.shape.push_back(static_cast<std::size_t>(extent));
        }
        const auto& off = j.at("data_offsets");
        if (!off.is_array() || off.size() != 2) {
            throw checkpoint_error("tensor '" + name + "': data_offsets must be [begin, end]", name);
        }
        e.begin = off[0].get<std::uint64_t>();
        e.end = off[1].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& ex) {
        throw checkpoint_error("tensor '" + name + "': malformed index entry: " + ex.what(), name);
    }
    if (e.end < e.begin) throw checkpoint_error("tensor '" + name + "': data_offsets end precedes begin", name);
    const std::uint64_t expected = element_count(e.shape) * dtype_size(e.dtype);
    if (e.end - e.begin != expected) {
        throw checkpoint_error("tensor '" + name + "': byte length " + std::to_string(e.end - e.begin) +
                                   " does not match shape " + to_string(e.shape) + " of " + dtype_name(e.dtype) +
                                   " (" + std::to_string(expected) + " bytes)",
                               name);
    }
    return e;
}

}  // namespace detail

/// Parses the index and checks that entries tile [0, data_size) exactly.
inline CheckpointIndex parse_checkpoint_index(std::string_view header_json, std::uint64_t data_size) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(header_json);
    } catch (const nlohmann::json::parse_error& e) {
        throw checkpoint_error(std::string("malformed header JSON: ") + e.what());
    }
    if (!doc.is_object()) throw checkpoint_error("header JSON must be an object");

    CheckpointIndex index;
    index.header_length = header_json.size();
    for (const auto& [name, value] : doc.items()) {
        if (name == "__metadata__") {
            if (!value.is_object()) throw checkpoint_error("__metadata__ must be an object of strings");
            for (const auto& [k, v] : value.items()) {
                if (!v.is_string()) throw checkpoint_error("__metadata__ value for '" + k + "' is not a string");
                index.metadata.emplace(k, v.get<std::string>());
            }
            continue;
        }
        TensorEntry e = detail::parse_entry(name, value);
        if (e.end > data_size) {
            throw checkpoint_error("tensor '" + name + "': offsets out of bounds: [" + std::to_string(e.begin) + ", " +
                                       std::to_string(e.end) + ") exceeds data region of " +
                                       std::to_string(data_size) + " bytes",
                                   name);
        }
        index.entries.emplace(name, std::move(e));
    }

    std::vector<std::pair<const std::string*, const TensorEntry*>> order;
    for (const auto& [name, e] : index.entries) order.emplace_back(&name, &e);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        return a.second->begin != b.second->begin ? a.second->begin < b.second->begin
                                                  : a.second->end < b.second->end;
    });
    std::uint64_t cursor = 0;
    const std::string* previous = nullptr;
    for (const auto& [name, e] : order) {
        if (e->begin < cursor) {
            throw checkpoint_error("tensor '" + *name + "': overlapping regions with tensor '" + *previous + "'",
                                   *name);
        }
        if (e->begin > cursor) {
            throw checkpoint_error("tensor '" + *name + "': gap of " + std::to_string(e->begin - cursor) +
                                       " bytes before its data",
                                   *name);
        }
        cursor = e->end;
        previous = name;
    }
    if (cursor != data_size) {
        throw checkpoint_error("data region has " + std::to_string(data_size - cursor) + " unused trailing bytes");
    }
    return index;
}

inline Checkpoint read_checkpoint(std::istream& in) {
    in.seekg(0, std::ios::end);
    const auto total = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (!in || total < 8) throw checkpoint_error("truncated header: file shorter than the 8-byte length prefix");

    std::uint64_t header_length = 0;
    in.read(reinterpret_cast<char*>(&header_length), sizeof header_length);
    if (header_length > total - 8) {
        throw checkpoint_error("truncated header: declared length " + std::to_string(header_length) + " exceeds the " +
                               std::to_string(total - 8) + " bytes that follow");
    }
    std::string header(header_length, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_length));
    const std::uint64_t data_start = 8 + header_length;

    Checkpoint ckpt;
    ckpt.index = parse_checkpoint_index(header, total - data_start);

    std::vector<char> staging;
    for (const auto& [name, e] : ckpt.index.entries) {
        in.seekg(static_cast<std::streamoff>(data_start + e.begin));
        const std::size_t count = element_count(e.shape);
        std::vector<float> values(count);
        if (e.dtype == DType::f32) {
            in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * 4));
        } else {
            staging.resize(count * 2);
            in.read(staging.data(), static_cast<std::streamsize>(staging.size()));
            for (std::size_t i = 0; i < count; ++i) {
                std::uint16_t bits;
                std::memcpy(&bits, staging.data() + 2 * i, 2);
                values[i] = e.dtype == DType::f16 ? half_to_float(bits) : bfloat16_to_float(bits);
            }
        }
        if (!in) throw checkpoint_error("tensor '" + name + "': read failed (truncated data)", name);
        ckpt.tensors.emplace(name, Tensor(e.shape, std::move(values)));
    }
    return ckpt;
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw checkpoint_error("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

/// Writes tensors as F32 in name order; the header is space-padded to 8 bytes.
inline void write_checkpoint(std::ostream& out, const TensorMap& tensors,
                             const std::map<std::string, std::string>& metadata = {}) {
    nlohmann::json header = nlohmann::json::object();
    if (!metadata.empty()) header["__metadata__"] = metadata;
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        const std::uint64_t bytes = t.size() * 4;
        header[name] = {{"dtype", "F32"}, {"shape", t.shape()}, {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    std::string text = header.dump();
    text.append((8 - text.size() % 8) % 8, ' ');
    const std::uint64_t length = text.size();
    out.write(reinterpret_cast<const char*>(&length), sizeof length);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : tensors) {
        const auto d = t.data();
        out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size_bytes()));
    }
    if (!out) throw checkpoint_error("write failed");
}

inline void write_checkpoint(const std::filesystem::path& path, const TensorMap& tensors,
                             const std::map<std::string, std::string>& metadata = {}) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw checkpoint_error("cannot create checkpoint " + path.string());
    write_checkpoint(out, tensors, metadata);
}

/// Lowercase hex SHA-256 of a file's bytes.
inline std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw checkpoint_error("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
    return os.str();
}

}  // namespace glassgpt
