#pragma once

// Data captured from a forward pass. What is kept is controlled by a
// TraceCaptureSpec:
//   none     logits only
//   summary  a TensorSummary for every intermediate, plus the full attention
//            weight matrix of the selected (layer, head) pairs, default (0, 0)
//   full     full tensors for the selected layers (default all) and per-head
//            tensors for the selected heads (default all); everything else
//            is summarized
// Attention score/weight matrices are cut to their first `positions_limit`
// rows and columns. Rows of a causal matrix never reference later columns,
// so the cut keeps complete rows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glassgpt/error.hpp"
#include "glassgpt/model.hpp"
#include "glassgpt/tensor.hpp"
#include "glassgpt/tokenizer.hpp"

namespace glassgpt {

enum class CaptureLevel { none, summary, full };

inline const char* capture_level_name(CaptureLevel level) {
    switch (level) {
        case CaptureLevel::none: return "none";
        case CaptureLevel::summary: return "summary";
        case CaptureLevel::full: return "full";
    }
    return "?";
}

inline std::optional<CaptureLevel> parse_capture_level(std::string_view s) {
    if (s == "none") return CaptureLevel::none;
    if (s == "summary") return CaptureLevel::summary;
    if (s == "full") return CaptureLevel::full;
    return std::nullopt;
}

struct TraceCaptureSpec {
    CaptureLevel level = CaptureLevel::none;
    std::optional<std::vector<std::size_t>> layers;
    std::optional<std::vector<std::size_t>> heads;
    std::size_t positions_limit = 64;

    static TraceCaptureSpec none() { return {}; }
    static TraceCaptureSpec summary() { return {CaptureLevel::summary, std::nullopt, std::nullopt, 64}; }
    static TraceCaptureSpec full() { return {CaptureLevel::full, std::nullopt, std::nullopt, 64}; }

    void validate(const ModelConfig& cfg) const {
        if (positions_limit < 1) throw precondition_error("capture: positions_limit must be at least 1");
        if (layers) {
            for (std::size_t l : *layers) {
                if (l >= cfg.n_layer) {
                    throw precondition_error("capture: layer " + std::to_string(l) + " outside [0, " +
                                             std::to_string(cfg.n_layer) + ")");
                }
            }
        }
        if (heads) {
            for (std::size_t h : *heads) {
                if (h >= cfg.n_head) {
                    throw precondition_error("capture: head " + std::to_string(h) + " outside [0, " +
                                             std::to_string(cfg.n_head) + ")");
                }
            }
        }
    }

    bool layer_selected(std::size_t layer) const {
        if (layers) return std::find(layers->begin(), layers->end(), layer) != layers->end();
        return level == CaptureLevel::full || layer == 0;
    }

    bool head_selected(std::size_t head) const {
        if (heads) return std::find(heads->begin(), heads->end(), head) != heads->end();
        return level == CaptureLevel::full || head == 0;
    }
};

/// Statistics over a whole tensor plus its first few values.
struct TensorSummary {
    Shape shape;
    double l2_norm = 0.0;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    std::vector<float> sample;

    friend bool operator==(const TensorSummary&, const TensorSummary&) = default;
};

inline TensorSummary summarize(const Tensor& t) {
    TensorSummary s;
    s.shape = t.shape();
    const auto d = t.data();
    double sq = 0.0, sum = 0.0;
    s.min = d[0];
    s.max = d[0];
    for (float v : d) {
        sq += static_cast<double>(v) * v;
        sum += v;
        s.min = std::min(s.min, static_cast<double>(v));
        s.max = std::max(s.max, static_cast<double>(v));
    }
    s.l2_norm = std::sqrt(sq);
    s.mean = sum / static_cast<double>(d.size());
    s.sample.assign(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(8, d.size())));
    return s;
}

struct CapturedTensor {
    TensorSummary summary;
    /// Present only when the tensor was captured in full.
    std::optional<Tensor> full;

    static CapturedTensor of(const Tensor& t, bool keep_full) {
        CapturedTensor c{summarize(t), std::nullopt};
        if (keep_full) c.full = t;
        return c;
    }
};

struct HeadTrace {
    std::size_t head = 0;
    CapturedTensor q, k, v;
    /// Scaled Q·Kᵀ with the additive causal mask applied, before softmax.
    CapturedTensor scores;
    /// Row-stochastic attention weights; exact zeros above the diagonal.
    CapturedTensor weights;
    CapturedTensor output;
};

struct BlockTrace {
    std::size_t layer = 0;
    CapturedTensor ln1_out;
    std::vector<HeadTrace> heads;
    CapturedTensor attn_proj_out;
    CapturedTensor resid1;
    CapturedTensor ln2_out;
    /// GELU activations of the MLP's expansion layer.
    CapturedTensor mlp_hidden;
    CapturedTensor mlp_out;
    CapturedTensor resid2;
};

struct EmbeddingTrace {
    CapturedTensor token_emb;
    CapturedTensor pos_emb;
    CapturedTensor sum;
};

struct ForwardTrace {
    CaptureLevel level = CaptureLevel::none;
    std::vector<token_id> ids;
    /// Filled by callers that hold the vocabulary.
    std::vector<TokenSpan> tokens;
    std::optional<EmbeddingTrace> embedding;
    std::vector<BlockTrace> blocks;
    std::optional<CapturedTensor> ln_f_out;
    /// Next-token logits at the last position.
    Tensor logits;
    /// Wall-clock milliseconds per stage.
    std::map<std::string, double> timing_ms;
};

}  // namespace glassgpt
