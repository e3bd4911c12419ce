#pragma once

// JSON rendering of traces and predictions (TraceDocument, trace_version 1).
// Objects use sorted keys; float32 values are written as the shortest decimal
// that reads back to the same float, so dumps are byte-stable and lossless.

#include <charconv>
#include <cstdlib>
#include <string>
#include <system_error>

#include <nlohmann/json.hpp>

#include "glassgpt/model.hpp"
#include "glassgpt/sampler.hpp"
#include "glassgpt/trace.hpp"

namespace glassgpt {

inline constexpr int trace_version = 1;

using json = nlohmann::json;

/// JSON number whose serialized text is the shortest round-trip form of `f`.
inline json float_json(float f) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, f);
    *end = '\0';
    // The double nearest to the shortest float literal prints back as that literal.
    return json(std::strtod(buf, nullptr));
}

inline json floats_json(std::span<const float> values) {
    json arr = json::array();
    arr.get_ref<json::array_t&>().reserve(values.size());
    for (float v : values) arr.push_back(float_json(v));
    return arr;
}

/// JSON string that survives invalid UTF-8 by substituting U+FFFD.
inline json text_json(std::string_view s) { return json(unicode::to_valid_utf8(s)); }

inline json to_json(const ModelConfig& c) {
    return {{"n_layer", c.n_layer},         {"n_head", c.n_head},          {"d_model", c.d_model},
            {"d_head", c.d_head},           {"d_mlp", c.d_mlp},            {"vocab_size", c.vocab_size},
            {"max_context", c.max_context}, {"ln_eps", float_json(c.ln_eps)}};
}

inline json to_json(const TensorSummary& s) {
    return {{"shape", s.shape}, {"l2_norm", s.l2_norm}, {"min", s.min},
            {"max", s.max},     {"mean", s.mean},       {"sample", floats_json(s.sample)}};
}

inline json to_json(const Tensor& t) { return {{"shape", t.shape()}, {"data", floats_json(t.data())}}; }

inline json to_json(const CapturedTensor& c) {
    json j = {{"summary", to_json(c.summary)}};
    if (c.full) j["full"] = to_json(*c.full);
    return j;
}

inline json to_json(const HeadTrace& h) {
    return {{"head", h.head},         {"q", to_json(h.q)},
            {"k", to_json(h.k)},      {"v", to_json(h.v)},
            {"scores", to_json(h.scores)}, {"weights", to_json(h.weights)},
            {"output", to_json(h.output)}};
}

inline json to_json(const BlockTrace& b) {
    json heads = json::array();
    for (const auto& h : b.heads) heads.push_back(to_json(h));
    return {{"layer", b.layer},
            {"ln1_out", to_json(b.ln1_out)},
            {"heads", std::move(heads)},
            {"attn_proj_out", to_json(b.attn_proj_out)},
            {"resid1", to_json(b.resid1)},
            {"ln2_out", to_json(b.ln2_out)},
            {"mlp_hidden", to_json(b.mlp_hidden)},
            {"mlp_out", to_json(b.mlp_out)},
            {"resid2", to_json(b.resid2)}};
}

inline json to_json(const TokenSpan& t) {
    return {{"id", t.id}, {"text", text_json(t.text)}, {"display", t.display}};
}

inline json to_json(const PredictionEntry& e) {
    return {{"token_id", e.token},
            {"display", e.display},
            {"logit", float_json(e.logit)},
            {"scaled_logit", e.scaled_logit},
            {"probability", e.probability}};
}

inline json to_json(const SamplingParams& p) {
    return {{"temperature", p.temperature},
            {"top_k", p.top_k ? json(*p.top_k) : json(nullptr)},
            {"seed", p.seed}};
}

inline json predictions_json(const PredictionResult& r, std::size_t count = default_display_count) {
    json arr = json::array();
    for (std::size_t i = 0; i < std::min(count, r.entries.size()); ++i) arr.push_back(to_json(r.entries[i]));
    return arr;
}

/// Trace body without timing; identical traces give identical JSON.
inline json to_json(const ForwardTrace& t) {
    json tokens = json::array();
    for (const auto& tok : t.tokens) tokens.push_back(to_json(tok));
    json blocks = json::array();
    for (const auto& b : t.blocks) blocks.push_back(to_json(b));
    json j = {{"capture", capture_level_name(t.level)},
              {"ids", t.ids},
              {"tokens", std::move(tokens)},
              {"blocks", std::move(blocks)}};
    j["embedding"] = t.embedding ? json{{"token_emb", to_json(t.embedding->token_emb)},
                                        {"pos_emb", to_json(t.embedding->pos_emb)},
                                        {"sum", to_json(t.embedding->sum)}}
                                 : json(nullptr);
    json final_stage = {{"logits", t.level == CaptureLevel::full ? to_json(CapturedTensor::of(t.logits, true))
                                                                 : to_json(CapturedTensor::of(t.logits, false))}};
    final_stage["ln_f_out"] = t.ln_f_out ? to_json(*t.ln_f_out) : json(nullptr);
    j["final"] = std::move(final_stage);
    return j;
}

/// Complete document served by /api/forward and written by `glassgpt trace`.
inline json trace_document(const ForwardTrace& trace, const PredictionResult& prediction, const ModelConfig& config,
                           const json& request, const std::map<std::string, double>& timing_ms) {
    json timing = json::object();
    for (const auto& [stage, ms] : timing_ms) timing[stage] = ms;
    return {{"trace_version", trace_version},
            {"config", to_json(config)},
            {"request", request},
            {"trace", to_json(trace)},
            {"predictions", predictions_json(prediction)},
            {"entropy", prediction.entropy},
            {"sampling", to_json(prediction.params)},
            {"timing_ms", std::move(timing)}};
}

}  // namespace glassgpt
