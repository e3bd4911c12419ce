#pragma once

// Deterministic stand-in weights with GPT-2's layout. Every value is a
// function of (seed, tensor name, element index) built from integer mixing
// and exactly rounded IEEE operations, so the same file comes out on any
// platform.

#include <cmath>
#include <cstdint>
#include <string>

#include "glassgpt/checkpoint.hpp"
#include "glassgpt/model.hpp"
#include "glassgpt/sampler.hpp"

namespace glassgpt::testing {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Approximately normal values: sum of four 24-bit uniforms, centred and scaled.
inline Tensor synthetic_tensor(const std::string& name, const Shape& shape, double mean, double stddev,
                               std::uint64_t seed) {
    Tensor t(shape);
    std::uint64_t state = fnv1a64(name) ^ seed;
    const double scale = stddev * std::sqrt(3.0);
    for (float& v : t.data()) {
        double sum = 0.0;
        for (int r = 0; r < 4; ++r) sum += static_cast<double>(splitmix64(state) >> 40) * 0x1.0p-24;
        v = static_cast<float>(mean + (sum - 2.0) * scale);
    }
    return t;
}

struct SyntheticOptions {
    std::uint64_t seed = 0x5EED;
    /// Adds the lower-triangular h.<i>.attn.bias buffers found in published GPT-2 files.
    bool include_mask_buffers = false;
};

inline TensorMap synthetic_gpt2_tensors(const ModelConfig& cfg, const SyntheticOptions& opt = {}) {
    TensorMap m;
    const auto add = [&](const std::string& name, Shape shape, double mean, double stddev) {
        m.emplace(name, synthetic_tensor(name, shape, mean, stddev, opt.seed));
    };
    const std::size_t d = cfg.d_model;
    add("wte.weight", {cfg.vocab_size, d}, 0.0, 0.02);
    add("wpe.weight", {cfg.max_context, d}, 0.0, 0.01);
    for (std::size_t i = 0; i < cfg.n_layer; ++i) {
        const std::string p = "h." + std::to_string(i) + ".";
        add(p + "ln_1.weight", {d}, 1.0, 0.1);
        add(p + "ln_1.bias", {d}, 0.0, 0.05);
        add(p + "attn.c_attn.weight", {d, 3 * d}, 0.0, 0.02);
        add(p + "attn.c_attn.bias", {3 * d}, 0.0, 0.02);
        add(p + "attn.c_proj.weight", {d, d}, 0.0, 0.02);
        add(p + "attn.c_proj.bias", {d}, 0.0, 0.02);
        add(p + "ln_2.weight", {d}, 1.0, 0.1);
        add(p + "ln_2.bias", {d}, 0.0, 0.05);
        add(p + "mlp.c_fc.weight", {d, cfg.d_mlp}, 0.0, 0.02);
        add(p + "mlp.c_fc.bias", {cfg.d_mlp}, 0.0, 0.02);
        add(p + "mlp.c_proj.weight", {cfg.d_mlp, d}, 0.0, 0.02);
        add(p + "mlp.c_proj.bias", {d}, 0.0, 0.02);
        if (opt.include_mask_buffers) {
            Tensor mask({1, 1, cfg.max_context, cfg.max_context});
            for (std::size_t r = 0; r < cfg.max_context; ++r) {
                for (std::size_t c = 0; c <= r; ++c) mask[r * cfg.max_context + c] = 1.0f;
            }
            m.emplace(p + "attn.bias", std::move(mask));
        }
    }
    add("ln_f.weight", {d}, 1.0, 0.1);
    add("ln_f.bias", {d}, 0.0, 0.05);
    return m;
}

inline ModelConfig tiny_config(std::size_t n_layer = 2, std::size_t n_head = 2, std::size_t d_model = 16,
                               std::size_t vocab = 64, std::size_t context = 32) {
    ModelConfig c;
    c.n_layer = n_layer;
    c.n_head = n_head;
    c.d_model = d_model;
    c.d_head = d_model / n_head;
    c.d_mlp = 4 * d_model;
    c.vocab_size = vocab;
    c.max_context = context;
    return c;
}

inline Gpt2Model synthetic_model(const ModelConfig& cfg, std::uint64_t seed = 0x5EED) {
    return load_model(synthetic_gpt2_tensors(cfg, {seed, false}), cfg);
}

}  // namespace glassgpt::testing
