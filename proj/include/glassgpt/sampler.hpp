#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassgpt/error.hpp"
#include "glassgpt/forward.hpp"
#include "glassgpt/model.hpp"
#include "glassgpt/tensor.hpp"
#include "glassgpt/tokenizer.hpp"

namespace glassgpt {

/// GPT-2's end-of-text id.
inline constexpr token_id gpt2_end_of_text_id = 50256;

/// Rows shown in prediction tables and per-step generation records.
inline constexpr std::size_t default_display_count = 10;

/// splitmix64 step; used to expand a 64-bit seed into generator state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// xoshiro256** (Blackman & Vigna), seeded through splitmix64.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
};

struct SamplingParams {
    /// 0 selects greedy argmax.
    double temperature = 1.0;
    std::optional<std::size_t> top_k;
    std::uint64_t seed = 0;

    void validate() const {
        if (!std::isfinite(temperature) || temperature < 0.0) {
            throw precondition_error("temperature must be a finite value >= 0");
        }
        if (top_k && *top_k < 1) throw precondition_error("top_k must be at least 1");
    }

    friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

struct PredictionEntry {
    token_id token = 0;
    std::string display;
    float logit = 0.0f;
    double scaled_logit = 0.0;
    double probability = 0.0;
};

/// Ranked next-token distribution. `entries` holds every token that can be
/// sampled (the top_k set when truncated), in descending probability.
struct PredictionResult {
    std::vector<PredictionEntry> entries;
    /// Shannon entropy in nats of the renormalized distribution over `entries`.
    double entropy = 0.0;
    SamplingParams params;

    PredictionResult top(std::size_t n) const {
        PredictionResult r = *this;
        if (r.entries.size() > n) r.entries.resize(n);
        return r;
    }
};

/// Elementwise logits / temperature.
inline Tensor apply_temperature(const Tensor& logits, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw precondition_error("apply_temperature: temperature must be positive");
    }
    Tensor out = logits;
    for (float& v : out.data()) v = static_cast<float>(v / temperature);
    require_finite(out, "apply_temperature");
    return out;
}

/// Token ids ordered by descending logit, ties by ascending id. Positive
/// temperature scaling cannot change this order.
inline std::vector<token_id> rank_tokens(std::span<const float> logits, std::size_t keep) {
    std::vector<token_id> order(logits.size());
    std::iota(order.begin(), order.end(), 0);
    const auto by_rank = [&](token_id a, token_id b) {
        return logits[a] != logits[b] ? logits[a] > logits[b] : a < b;
    };
    keep = std::min(keep, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), by_rank);
    order.resize(keep);
    return order;
}

/// Temperature-scaled softmax, optionally cut to the top_k tokens and
/// renormalized. Temperature 0 yields the argmax with probability 1.
/// Tokens whose probability underflows to exactly 0 are omitted.
inline PredictionResult probabilities(std::span<const float> logits, const SamplingParams& params) {
    params.validate();
    if (logits.empty()) throw precondition_error("probabilities: empty logit vector");
    for (float v : logits) {
        if (!std::isfinite(v)) throw precondition_error("probabilities: logits must be finite");
    }

    PredictionResult result;
    result.params = params;
    if (params.temperature == 0.0) {
        const token_id best = rank_tokens(logits, 1).front();
        result.entries.push_back({best, {}, logits[best], static_cast<double>(logits[best]), 1.0});
        result.entropy = 0.0;
        return result;
    }

    const std::vector<token_id> order = rank_tokens(logits, params.top_k.value_or(logits.size()));
    const double t = params.temperature;
    const double max_scaled = static_cast<double>(logits[order.front()]) / t;
    double z = 0.0;
    for (token_id id : order) z += std::exp(static_cast<double>(logits[id]) / t - max_scaled);
    const double log_z = std::log(z);

    result.entries.reserve(order.size());
    double entropy = 0.0;
    for (token_id id : order) {
        const double scaled = static_cast<double>(logits[id]) / t;
        const double log_p = scaled - max_scaled - log_z;
        const double p = std::exp(log_p);
        if (p == 0.0) break;
        entropy -= p * log_p;
        result.entries.push_back({id, {}, logits[id], scaled, p});
    }
    result.entropy = entropy;
    return result;
}

inline PredictionResult probabilities(const Tensor& logits, const SamplingParams& params) {
    return probabilities(logits.data(), params);
}

/// Fills `display` for the first `count` entries.
inline void label_entries(PredictionResult& result, const BpeVocab& vocab,
                          std::size_t count = default_display_count) {
    for (std::size_t i = 0; i < std::min(count, result.entries.size()); ++i) {
        auto& e = result.entries[i];
        e.display = token_display(vocab, e.token);
    }
}

/// Inverse-CDF draw over the ranked entries using one uniform variate.
inline token_id sample_next(const PredictionResult& result, Xoshiro256& rng) {
    if (result.entries.empty()) throw precondition_error("sample_next: empty distribution");
    const double u = rng.uniform();
    double cumulative = 0.0;
    for (const auto& e : result.entries) {
        cumulative += e.probability;
        if (u < cumulative) return e.token;
    }
    return result.entries.back().token;
}

struct GenerationStep {
    std::size_t step = 0;
    token_id token = 0;
    /// Leading `display_count` entries of the step's distribution.
    PredictionResult prediction;
};

struct GenerationResult {
    std::vector<token_id> tokens;
    std::vector<GenerationStep> steps;
    bool stopped_on_end_of_text = false;
    bool aborted = false;
};

struct GenerateOptions {
    std::optional<token_id> stop_token = gpt2_end_of_text_id;
    std::size_t display_count = default_display_count;
    /// Called after each step; returning false aborts generation.
    std::function<bool(const GenerationStep&)> on_step;
};

/// Autoregressive loop: forward (no capture), rank, sample, append. Every step
/// re-runs the whole sequence.
inline GenerationResult generate(const Gpt2Model& model, std::span<const token_id> prompt,
                                 std::size_t max_new_tokens, const SamplingParams& params,
                                 const GenerateOptions& options = {}) {
    params.validate();
    if (prompt.empty()) throw precondition_error("generate: prompt must not be empty");
    if (max_new_tokens == 0) throw precondition_error("generate: max_new_tokens must be positive");
    const std::size_t limit = model.config.max_context;
    if (prompt.size() + max_new_tokens > limit) {
        const std::size_t step = prompt.size() >= limit ? 1 : limit - prompt.size() + 1;
        throw context_overflow("generation would exceed the context limit of " + std::to_string(limit) +
                                   " tokens at step " + std::to_string(step),
                               limit, step);
    }

    Xoshiro256 rng(params.seed);
    std::vector<token_id> sequence(prompt.begin(), prompt.end());
    GenerationResult result;
    for (std::size_t step = 1; step <= max_new_tokens; ++step) {
        const ForwardResult fwd = forward(model, sequence);
        const PredictionResult prediction = probabilities(fwd.logits, params);
        const token_id next = sample_next(prediction, rng);
        sequence.push_back(next);
        result.tokens.push_back(next);
        result.steps.push_back({step, next, prediction.top(options.display_count)});
        if (options.on_step && !options.on_step(result.steps.back())) {
            result.aborted = true;
            break;
        }
        if (options.stop_token && next == *options.stop_token) {
            result.stopped_on_end_of_text = true;
            break;
        }
    }
    return result;
}

}  // namespace glassgpt
