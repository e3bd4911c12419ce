#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glassgpt/checkpoint.hpp"
#include "glassgpt/error.hpp"
#include "glassgpt/tensor.hpp"

namespace glassgpt {

struct ModelConfig {
    std::size_t n_layer = 12;
    std::size_t n_head = 12;
    std::size_t d_model = 768;
    std::size_t d_head = 64;
    std::size_t d_mlp = 3072;
    std::size_t vocab_size = 50257;
    std::size_t max_context = 1024;
    float ln_eps = 1e-5f;

    static ModelConfig gpt2_small() { return {}; }

    void validate() const {
        if (n_layer == 0 || n_head == 0 || d_model == 0 || d_head == 0 || d_mlp == 0 || vocab_size == 0 ||
            max_context == 0) {
            throw model_error("model config: all extents must be positive");
        }
        if (d_model != n_head * d_head) {
            throw model_error("model config: d_model " + std::to_string(d_model) + " != n_head " +
                              std::to_string(n_head) + " x d_head " + std::to_string(d_head));
        }
        if (!(ln_eps > 0.0f)) throw model_error("model config: ln_eps must be positive");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct BlockWeights {
    Tensor ln1_gamma, ln1_beta;
    Tensor w_qkv, b_qkv;
    Tensor w_proj, b_proj;
    Tensor ln2_gamma, ln2_beta;
    Tensor w_fc, b_fc;
    Tensor w_out, b_out;
};

/// Weight set of a GPT-2 model. The output projection is tied to `wte`.
struct Gpt2Model {
    ModelConfig config;
    Tensor wte;
    Tensor wpe;
    std::vector<BlockWeights> blocks;
    Tensor ln_f_gamma, ln_f_beta;

    std::size_t parameter_count() const {
        std::size_t n = wte.size() + wpe.size() + ln_f_gamma.size() + ln_f_beta.size();
        for (const auto& b : blocks) {
            for (const Tensor* t : {&b.ln1_gamma, &b.ln1_beta, &b.w_qkv, &b.b_qkv, &b.w_proj, &b.b_proj,
                                    &b.ln2_gamma, &b.ln2_beta, &b.w_fc, &b.b_fc, &b.w_out, &b.b_out}) {
                n += t->size();
            }
        }
        return n;
    }
};

namespace detail {

inline std::string canonical_name(const std::string& name) {
    constexpr std::string_view prefix = "transformer.";
    return name.starts_with(prefix) ? name.substr(prefix.size()) : name;
}

inline std::optional<std::size_t> block_index(const std::string& name) {
    if (!name.starts_with("h.")) return std::nullopt;
    const auto dot = name.find('.', 2);
    if (dot == std::string::npos || dot == 2) return std::nullopt;
    std::size_t idx = 0;
    for (std::size_t i = 2; i < dot; ++i) {
        if (name[i] < '0' || name[i] > '9') return std::nullopt;
        idx = idx * 10 + static_cast<std::size_t>(name[i] - '0');
    }
    return idx;
}

}  // namespace detail

/// Reads extents from the tensor shapes; the head count (not recoverable from
/// shapes) comes from metadata key "n_head" and defaults to GPT-2's 12.
inline ModelConfig infer_config(const TensorMap& raw, const std::map<std::string, std::string>& metadata = {}) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : raw) by_name.emplace(detail::canonical_name(name), &t);

    const auto find = [&](const std::string& name) -> const Tensor& {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw model_error("missing tensor '" + name + "'");
        if (it->second->rank() != 2) {
            throw model_error("tensor '" + name + "' must be rank 2, found " + to_string(it->second->shape()));
        }
        return *it->second;
    };

    ModelConfig cfg;
    const Tensor& wte = find("wte.weight");
    const Tensor& wpe = find("wpe.weight");
    cfg.vocab_size = wte.dim(0);
    cfg.d_model = wte.dim(1);
    cfg.max_context = wpe.dim(0);

    std::size_t layers = 0;
    for (const auto& [name, t] : by_name) {
        if (const auto idx = detail::block_index(name)) layers = std::max(layers, *idx + 1);
    }
    cfg.n_layer = layers;

    if (const auto it = metadata.find("n_head"); it != metadata.end()) {
        try {
            cfg.n_head = static_cast<std::size_t>(std::stoul(it->second));
        } catch (const std::exception&) {
            throw model_error("metadata n_head '" + it->second + "' is not an integer");
        }
    }
    if (cfg.n_head == 0 || cfg.d_model % cfg.n_head != 0) {
        throw model_error("d_model " + std::to_string(cfg.d_model) + " is not divisible by n_head " +
                          std::to_string(cfg.n_head));
    }
    cfg.d_head = cfg.d_model / cfg.n_head;

    const auto fc = by_name.find("h.0.mlp.c_fc.weight");
    cfg.d_mlp = (fc != by_name.end() && fc->second->rank() == 2) ? fc->second->dim(1) : 4 * cfg.d_model;
    cfg.validate();
    return cfg;
}

/// Assembles a model from a checkpoint tensor map, checking every tensor's
/// presence and shape. GPT-2 stores linear weights as [d_in x d_out], the
/// orientation x·W uses, so nothing is transposed. Unused tensors are
/// reported through `warnings`.
inline Gpt2Model load_model(TensorMap tensors, const ModelConfig& config = ModelConfig::gpt2_small(),
                            std::vector<std::string>* warnings = nullptr) {
    config.validate();
    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : tensors) by_name.emplace(detail::canonical_name(name), std::move(t));
    tensors.clear();

    if (by_name.contains("lm_head.weight")) {
        throw model_error("separate output projection 'lm_head.weight' is not accepted; logits use the tied wte");
    }

    const auto take = [&](const std::string& name, const Shape& expected) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw model_error("missing tensor '" + name + "'");
        if (it->second.shape() != expected) {
            throw model_error("shape mismatch for '" + name + "': expected " + to_string(expected) + ", found " +
                              to_string(it->second.shape()));
        }
        Tensor t = std::move(it->second);
        by_name.erase(it);
        return t;
    };

    const std::size_t d = config.d_model;
    Gpt2Model m;
    m.config = config;
    m.wte = take("wte.weight", {config.vocab_size, d});
    m.wpe = take("wpe.weight", {config.max_context, d});
    m.blocks.resize(config.n_layer);
    for (std::size_t i = 0; i < config.n_layer; ++i) {
        const std::string p = "h." + std::to_string(i) + ".";
        BlockWeights& b = m.blocks[i];
        b.ln1_gamma = take(p + "ln_1.weight", {d});
        b.ln1_beta = take(p + "ln_1.bias", {d});
        b.w_qkv = take(p + "attn.c_attn.weight", {d, 3 * d});
        b.b_qkv = take(p + "attn.c_attn.bias", {3 * d});
        b.w_proj = take(p + "attn.c_proj.weight", {d, d});
        b.b_proj = take(p + "attn.c_proj.bias", {d});
        b.ln2_gamma = take(p + "ln_2.weight", {d});
        b.ln2_beta = take(p + "ln_2.bias", {d});
        b.w_fc = take(p + "mlp.c_fc.weight", {d, config.d_mlp});
        b.b_fc = take(p + "mlp.c_fc.bias", {config.d_mlp});
        b.w_out = take(p + "mlp.c_proj.weight", {config.d_mlp, d});
        b.b_out = take(p + "mlp.c_proj.bias", {d});
    }
    m.ln_f_gamma = take("ln_f.weight", {d});
    m.ln_f_beta = take("ln_f.bias", {d});

    if (warnings) {
        for (const auto& [name, t] : by_name) warnings->push_back("ignored extra tensor '" + name + "'");
    }
    return m;
}

/// read_checkpoint + infer_config + load_model.
inline Gpt2Model load_model_file(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
    Checkpoint ckpt = read_checkpoint(path);
    const ModelConfig cfg = infer_config(ckpt.tensors, ckpt.index.metadata);
    return load_model(std::move(ckpt.tensors), cfg, warnings);
}

}  // namespace glassgpt
