#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glassgpt/error.hpp"
#include "glassgpt/model.hpp"
#include "glassgpt/tensor.hpp"
#include "glassgpt/trace.hpp"

namespace glassgpt {

/// Additive mask value for scores above the diagonal.
inline constexpr float attention_mask_value = -1e10f;

/// Row i = wte[ids[i]] + wpe[i].
inline Tensor embed(const Gpt2Model& model, std::span<const token_id> ids, EmbeddingTrace* trace = nullptr,
                    bool keep_full = false) {
    const auto& cfg = model.config;
    if (ids.empty()) throw precondition_error("embed: empty token sequence");
    if (ids.size() > cfg.max_context) {
        throw context_overflow("sequence of " + std::to_string(ids.size()) + " tokens exceeds the context limit of " +
                                   std::to_string(cfg.max_context),
                               cfg.max_context);
    }
    const std::size_t s = ids.size(), d = cfg.d_model;
    Tensor tok({s, d}), pos({s, d});
    for (std::size_t i = 0; i < s; ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= cfg.vocab_size) {
            throw precondition_error("embed: token id " + std::to_string(ids[i]) + " outside [0, " +
                                     std::to_string(cfg.vocab_size) + ")");
        }
        const auto te = model.wte.row(static_cast<std::size_t>(ids[i]));
        const auto pe = model.wpe.row(i);
        std::copy(te.begin(), te.end(), tok.row(i).begin());
        std::copy(pe.begin(), pe.end(), pos.row(i).begin());
    }
    Tensor x = add(tok, pos);
    if (trace) {
        trace->token_emb = CapturedTensor::of(tok, keep_full);
        trace->pos_emb = CapturedTensor::of(pos, keep_full);
        trace->sum = CapturedTensor::of(x, keep_full);
    }
    return x;
}

struct AttentionResult {
    /// x + attention projection.
    Tensor output;
    /// ln1_out, heads, attn_proj_out and resid1; empty at capture level none.
    BlockTrace trace;
};

namespace detail {

inline Tensor leading_square(const Tensor& m, std::size_t limit) {
    const std::size_t n = std::min(limit, m.dim(0));
    if (n == m.dim(0)) return m;
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = m.row(i).subspan(0, n);
        std::copy(r.begin(), r.end(), out.row(i).begin());
    }
    return out;
}

inline CapturedTensor capture_matrix(const Tensor& m, bool keep_full, std::size_t limit) {
    CapturedTensor c{summarize(m), std::nullopt};
    if (keep_full) c.full = leading_square(m, limit);
    return c;
}

}  // namespace detail

/// Pre-LayerNorm masked multi-head self-attention sublayer with its residual add.
inline AttentionResult attention_block(const Tensor& x, const BlockWeights& w, const ModelConfig& cfg,
                                       const TraceCaptureSpec& capture = {}, std::size_t layer = 0) {
    if (x.rank() != 2 || x.dim(1) != cfg.d_model) {
        throw shape_error("attention_block: input must be [s x " + std::to_string(cfg.d_model) + "], got " +
                          to_string(x.shape()));
    }
    const std::size_t s = x.dim(0), d = cfg.d_model, dh = cfg.d_head;
    const bool tracing = capture.level != CaptureLevel::none;
    const bool block_full = capture.level == CaptureLevel::full && capture.layer_selected(layer);

    AttentionResult result;
    result.trace.layer = layer;

    const Tensor h = layer_norm(x, w.ln1_gamma, w.ln1_beta, cfg.ln_eps);
    const Tensor qkv = linear(h, w.w_qkv, w.b_qkv);
    const float scale = std::sqrt(static_cast<float>(dh));

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(cfg.n_head);
    for (std::size_t head = 0; head < cfg.n_head; ++head) {
        const Tensor q = slice_columns(qkv, head * dh, dh);
        const Tensor k = slice_columns(qkv, d + head * dh, dh);
        const Tensor v = slice_columns(qkv, 2 * d + head * dh, dh);

        Tensor scores = matmul_transposed(q, k);
        for (std::size_t i = 0; i < s; ++i) {
            auto r = scores.row(i);
            for (std::size_t j = 0; j < s; ++j) {
                r[j] /= scale;
                if (j > i) r[j] += attention_mask_value;
            }
        }
        Tensor weights = softmax(scores);
        for (std::size_t i = 0; i < s; ++i) {
            auto r = weights.row(i);
            for (std::size_t j = i + 1; j < s; ++j) r[j] = 0.0f;
        }
        Tensor out = matmul(weights, v);

        if (tracing) {
            const bool head_full =
                capture.level == CaptureLevel::full ? block_full && capture.head_selected(head)
                                                    : capture.layer_selected(layer) && capture.head_selected(head);
            const bool tensors_full = capture.level == CaptureLevel::full && head_full;
            HeadTrace ht;
            ht.head = head;
            ht.q = CapturedTensor::of(q, tensors_full);
            ht.k = CapturedTensor::of(k, tensors_full);
            ht.v = CapturedTensor::of(v, tensors_full);
            ht.scores = detail::capture_matrix(scores, tensors_full, capture.positions_limit);
            ht.weights = detail::capture_matrix(weights, head_full, capture.positions_limit);
            ht.output = CapturedTensor::of(out, tensors_full);
            result.trace.heads.push_back(std::move(ht));
        }
        head_outputs.push_back(std::move(out));
    }

    const Tensor proj = linear(concat_columns(head_outputs), w.w_proj, w.b_proj);
    result.output = add(x, proj);
    if (tracing) {
        result.trace.ln1_out = CapturedTensor::of(h, block_full);
        result.trace.attn_proj_out = CapturedTensor::of(proj, block_full);
        result.trace.resid1 = CapturedTensor::of(result.output, block_full);
    }
    return result;
}

/// Pre-LayerNorm GELU MLP sublayer with its residual add. When `trace` is
/// given, ln2_out, mlp_hidden, mlp_out and resid2 are recorded into it.
inline Tensor mlp_block(const Tensor& x, const BlockWeights& w, float ln_eps = 1e-5f, BlockTrace* trace = nullptr,
                        bool keep_full = false) {
    const Tensor h = layer_norm(x, w.ln2_gamma, w.ln2_beta, ln_eps);
    const Tensor hidden = gelu(linear(h, w.w_fc, w.b_fc));
    const Tensor out = linear(hidden, w.w_out, w.b_out);
    Tensor y = add(x, out);
    if (trace) {
        trace->ln2_out = CapturedTensor::of(h, keep_full);
        trace->mlp_hidden = CapturedTensor::of(hidden, keep_full);
        trace->mlp_out = CapturedTensor::of(out, keep_full);
        trace->resid2 = CapturedTensor::of(y, keep_full);
    }
    return y;
}

struct ForwardResult {
    Tensor logits;
    ForwardTrace trace;
};

/// Full forward pass. Logits are computed at the last position only, against
/// the tied token embedding. The arithmetic does not depend on `capture`.
inline ForwardResult forward(const Gpt2Model& model, std::span<const token_id> ids,
                             const TraceCaptureSpec& capture = {}) {
    using clock = std::chrono::steady_clock;
    const auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };
    const auto& cfg = model.config;
    capture.validate(cfg);
    const bool tracing = capture.level != CaptureLevel::none;
    const bool full = capture.level == CaptureLevel::full;

    ForwardResult result;
    ForwardTrace& trace = result.trace;
    trace.level = capture.level;
    trace.ids.assign(ids.begin(), ids.end());

    auto t0 = clock::now();
    EmbeddingTrace emb;
    Tensor x = embed(model, ids, tracing ? &emb : nullptr, full);
    if (tracing) trace.embedding = std::move(emb);
    trace.timing_ms["embed"] = ms_since(t0);

    t0 = clock::now();
    for (std::size_t layer = 0; layer < cfg.n_layer; ++layer) {
        const BlockWeights& w = model.blocks[layer];
        AttentionResult attn = attention_block(x, w, cfg, capture, layer);
        const bool block_full = full && capture.layer_selected(layer);
        x = mlp_block(attn.output, w, cfg.ln_eps, tracing ? &attn.trace : nullptr, block_full);
        if (tracing) trace.blocks.push_back(std::move(attn.trace));
    }
    trace.timing_ms["blocks"] = ms_since(t0);

    t0 = clock::now();
    const Tensor final_norm = layer_norm(x, model.ln_f_gamma, model.ln_f_beta, cfg.ln_eps);
    if (tracing) trace.ln_f_out = CapturedTensor::of(final_norm, full);
    const auto last_row = final_norm.row(final_norm.dim(0) - 1);
    const Tensor last({1, cfg.d_model}, std::vector<float>(last_row.begin(), last_row.end()));
    Tensor logits = matmul_transposed(last, model.wte).reshaped({cfg.vocab_size});
    trace.timing_ms["logits"] = ms_since(t0);

    trace.logits = logits;
    result.logits = std::move(logits);
    return result;
}

}  // namespace glassgpt
