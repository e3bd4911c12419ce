#pragma once

// Local HTTP/JSON service:
//   GET  /api/model     model config, parameter count, checkpoint hash
//   POST /api/forward   TraceDocument for a prompt
//   POST /api/generate  newline-delimited JSON, one event per sampled token
// Request handling lives in Service so it can be driven without sockets;
// HttpServer binds it to cpp-httplib.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "glassgpt/checkpoint.hpp"
#include "glassgpt/forward.hpp"
#include "glassgpt/model.hpp"
#include "glassgpt/sampler.hpp"
#include "glassgpt/tokenizer.hpp"
#include "glassgpt/trace_json.hpp"

namespace glassgpt {

inline constexpr double max_request_temperature = 4.0;
inline constexpr double default_temperature = 1.0;

/// Rejected request; rendered as {"error", "field"} with `status`.
class request_error : public error {
public:
    request_error(int status, std::string field, const std::string& what)
        : error(what), status_(status), field_(std::move(field)) {}

    int status() const noexcept { return status_; }
    const std::string& field() const noexcept { return field_; }

private:
    int status_;
    std::string field_;
};

struct ServiceResponse {
    int status = 200;
    json body;
};

struct ForwardRequest {
    std::string prompt;
    double temperature = default_temperature;
    std::optional<std::size_t> top_k;
    CaptureLevel capture = CaptureLevel::summary;
    std::optional<std::size_t> capture_layer;
    std::optional<std::size_t> capture_head;

    json echo() const {
        return {{"prompt", prompt},
                {"temperature", temperature},
                {"top_k", top_k ? json(*top_k) : json(nullptr)},
                {"capture", capture_level_name(capture)},
                {"capture_layer", capture_layer ? json(*capture_layer) : json(nullptr)},
                {"capture_head", capture_head ? json(*capture_head) : json(nullptr)}};
    }

    SamplingParams sampling() const { return {temperature, top_k, 0}; }

    /// none -> logits only; summary -> summaries plus the selected (default
    /// 0/0) attention matrix; full -> full tensors for the selected layer (or
    /// all layers) with attention detail only for the selected head (default 0).
    TraceCaptureSpec capture_spec(const ModelConfig& cfg) const {
        TraceCaptureSpec spec;
        spec.level = capture;
        if (capture_layer) spec.layers = std::vector<std::size_t>{*capture_layer};
        spec.heads = std::vector<std::size_t>{capture_head.value_or(0)};
        if (capture == CaptureLevel::full) spec.positions_limit = cfg.max_context;
        return spec;
    }
};

struct GenerateRequest {
    std::string prompt;
    std::size_t max_new_tokens = 0;
    SamplingParams params;
};

namespace detail {

inline json parse_body(const std::string& body) {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw request_error(400, "body", "request body must be a JSON object");
    return doc;
}

inline std::string require_prompt(const json& doc) {
    if (!doc.contains("prompt") || !doc["prompt"].is_string() || doc["prompt"].get_ref<const std::string&>().empty()) {
        throw request_error(400, "prompt", "prompt must be a non-empty string");
    }
    return doc["prompt"].get<std::string>();
}

inline double read_temperature(const json& doc) {
    if (!doc.contains("temperature") || doc["temperature"].is_null()) return default_temperature;
    const auto& t = doc["temperature"];
    if (!t.is_number()) throw request_error(400, "temperature", "temperature must be a number");
    const double v = t.get<double>();
    if (!(v >= 0.0 && v <= max_request_temperature)) {
        throw request_error(400, "temperature", "temperature must lie in [0, 4]");
    }
    return v;
}

inline std::optional<std::size_t> read_index(const json& doc, const char* field, std::size_t min,
                                             std::size_t limit) {
    if (!doc.contains(field) || doc[field].is_null()) return std::nullopt;
    const auto& v = doc[field];
    if (!v.is_number_integer()) throw request_error(400, field, std::string(field) + " must be an integer");
    const auto n = v.get<std::int64_t>();
    if (n < static_cast<std::int64_t>(min) || static_cast<std::uint64_t>(n) >= limit) {
        throw request_error(400, field,
                            std::string(field) + " must lie in [" + std::to_string(min) + ", " + std::to_string(limit) +
                                ")");
    }
    return static_cast<std::size_t>(n);
}

inline std::uint64_t read_seed(const json& doc) {
    if (!doc.contains("seed") || doc["seed"].is_null()) return 0;
    const auto& v = doc["seed"];
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw request_error(400, "seed", "seed must be a non-negative integer");
}

}  // namespace detail

inline ForwardRequest parse_forward_request(const std::string& body, const ModelConfig& cfg) {
    const json doc = detail::parse_body(body);
    ForwardRequest r;
    r.prompt = detail::require_prompt(doc);
    r.temperature = detail::read_temperature(doc);
    r.top_k = detail::read_index(doc, "top_k", 1, std::numeric_limits<std::size_t>::max());
    if (doc.contains("capture") && !doc["capture"].is_null()) {
        const auto level = doc["capture"].is_string() ? parse_capture_level(doc["capture"].get<std::string>())
                                                      : std::nullopt;
        if (!level) throw request_error(400, "capture", "capture must be one of none, summary, full");
        r.capture = *level;
    }
    r.capture_layer = detail::read_index(doc, "capture_layer", 0, cfg.n_layer);
    r.capture_head = detail::read_index(doc, "capture_head", 0, cfg.n_head);
    return r;
}

inline GenerateRequest parse_generate_request(const std::string& body) {
    const json doc = detail::parse_body(body);
    GenerateRequest r;
    r.prompt = detail::require_prompt(doc);
    if (!doc.contains("max_new_tokens") || !doc["max_new_tokens"].is_number_integer() ||
        doc["max_new_tokens"].get<std::int64_t>() < 1) {
        throw request_error(400, "max_new_tokens", "max_new_tokens must be a positive integer");
    }
    r.max_new_tokens = static_cast<std::size_t>(doc["max_new_tokens"].get<std::int64_t>());
    r.params.temperature = detail::read_temperature(doc);
    r.params.top_k = detail::read_index(doc, "top_k", 1, std::numeric_limits<std::size_t>::max());
    r.params.seed = detail::read_seed(doc);
    return r;
}

/// A model ready to serve, with the identity of the checkpoint it came from.
struct LoadedModel {
    Gpt2Model model;
    std::string checkpoint_hash;
};

/// Validated generation request, ready to stream.
struct GenerateJob {
    std::shared_ptr<const LoadedModel> model;
    std::vector<token_id> prompt_ids;
    GenerateRequest request;
};

class Service {
public:
    explicit Service(std::shared_ptr<const BpeVocab> vocab) : vocab_(std::move(vocab)) {}

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    ~Service() {
        if (loader_.joinable()) loader_.join();
    }

    void set_model(std::shared_ptr<const LoadedModel> model) {
        std::lock_guard lock(mutex_);
        model_ = std::move(model);
    }

    /// Loads the checkpoint on a background thread; /api/model answers 503 until it finishes.
    void load_model_async(std::filesystem::path path) {
        loader_ = std::thread([this, path = std::move(path)] {
            try {
                auto loaded = std::make_shared<LoadedModel>();
                loaded->model = load_model_file(path);
                loaded->checkpoint_hash = file_sha256(path);
                set_model(std::move(loaded));
            } catch (const std::exception& e) {
                std::lock_guard lock(mutex_);
                load_error_ = e.what();
            }
        });
    }

    void wait_for_load() {
        if (loader_.joinable()) loader_.join();
    }

    std::shared_ptr<const LoadedModel> model() const {
        std::lock_guard lock(mutex_);
        return model_;
    }

    std::optional<std::string> load_error() const {
        std::lock_guard lock(mutex_);
        return load_error_;
    }

    const BpeVocab& vocab() const { return *vocab_; }

    ServiceResponse model_info() const {
        const auto m = model();
        if (!m) return unavailable();
        const auto& cfg = m->model.config;
        return {200,
                {{"config", to_json(cfg)},
                 {"parameter_count", m->model.parameter_count()},
                 {"checkpoint_hash", m->checkpoint_hash},
                 {"trace_version", trace_version}}};
    }

    ServiceResponse forward(const std::string& body) const {
        return guarded([&]() -> ServiceResponse {
            using clock = std::chrono::steady_clock;
            const auto t_start = clock::now();
            const auto m = model();
            if (!m) return unavailable();
            const ModelConfig& cfg = m->model.config;
            const ForwardRequest req = parse_forward_request(body, cfg);

            auto t0 = clock::now();
            const std::vector<token_id> ids = encode_prompt(req.prompt, cfg);
            std::map<std::string, double> timing{{"tokenize", ms_between(t0, clock::now())}};

            ForwardResult fwd = glassgpt::forward(m->model, ids, req.capture_spec(cfg));
            fwd.trace.tokens = token_spans(*vocab_, ids);
            for (const auto& [stage, ms] : fwd.trace.timing_ms) timing["forward." + stage] = ms;

            t0 = clock::now();
            PredictionResult pred = probabilities(fwd.logits, req.sampling());
            label_entries(pred, *vocab_);
            timing["sampling"] = ms_between(t0, clock::now());
            timing["total"] = ms_between(t_start, clock::now());
            return {200, trace_document(fwd.trace, pred, cfg, req.echo(), timing)};
        });
    }

    /// Validates a generation request. Returns the job, or the error response to send instead.
    std::variant<GenerateJob, ServiceResponse> prepare_generate(const std::string& body) const {
        std::variant<GenerateJob, ServiceResponse> out;
        const ServiceResponse r = guarded([&]() -> ServiceResponse {
            const auto m = model();
            if (!m) return unavailable();
            GenerateJob job;
            job.request = parse_generate_request(body);
            job.prompt_ids = encode_prompt(job.request.prompt, m->model.config);
            if (job.prompt_ids.size() + job.request.max_new_tokens > m->model.config.max_context) {
                throw request_error(413, "max_new_tokens",
                                    "prompt of " + std::to_string(job.prompt_ids.size()) + " tokens plus " +
                                        std::to_string(job.request.max_new_tokens) +
                                        " new tokens exceeds the context limit of " +
                                        std::to_string(m->model.config.max_context));
            }
            job.model = m;
            out = std::move(job);
            return {200, nullptr};
        });
        if (r.status != 200) out = r;
        return out;
    }

    /// Streams one JSON line per token to `emit`, then {"done": true}. A false
    /// return from `emit` (client gone) aborts the generation.
    void run_generate(const GenerateJob& job, const std::function<bool(const std::string&)>& emit) {
        ++active_streams_;
        bool aborted = false;
        try {
            GenerateOptions options;
            options.on_step = [&](const GenerationStep& step) {
                PredictionResult top = step.prediction;
                label_entries(top, *vocab_);
                const json event = {{"step", step.step},
                                    {"token_id", step.token},
                                    {"display", token_display(*vocab_, step.token)},
                                    {"text", text_json(vocab_->bytes(step.token))},
                                    {"top10", predictions_json(top)}};
                return emit(event.dump() + "\n");
            };
            const GenerationResult result =
                generate(job.model->model, job.prompt_ids, job.request.max_new_tokens, job.request.params, options);
            aborted = result.aborted;
            if (!aborted) {
                const json done = {{"done", true}, {"stopped_on_end_of_text", result.stopped_on_end_of_text}};
                aborted = !emit(done.dump() + "\n");
            }
        } catch (const std::exception& e) {
            const std::string id = log_internal_error(e);
            aborted = !emit(json{{"error", "internal error"}, {"id", id}}.dump() + "\n");
        }
        --active_streams_;
        ++(aborted ? aborted_streams_ : completed_streams_);
    }

    std::size_t active_streams() const noexcept { return active_streams_; }
    std::size_t aborted_streams() const noexcept { return aborted_streams_; }
    std::size_t completed_streams() const noexcept { return completed_streams_; }

private:
    static double ms_between(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
        return std::chrono::duration<double, std::milli>(b - a).count();
    }

    ServiceResponse unavailable() const {
        const auto err = load_error();
        return {503, {{"error", err ? "model failed to load: " + *err : std::string("model not loaded yet")}}};
    }

    std::vector<token_id> encode_prompt(const std::string& prompt, const ModelConfig& cfg) const {
        std::vector<token_id> ids = encode(*vocab_, prompt);
        if (ids.empty()) throw request_error(400, "prompt", "prompt produced no tokens");
        if (ids.size() > cfg.max_context) {
            throw request_error(413, "prompt",
                                "prompt is " + std::to_string(ids.size()) + " tokens; the limit is " +
                                    std::to_string(cfg.max_context));
        }
        return ids;
    }

    static std::string log_internal_error(const std::exception& e) {
        static std::atomic<std::uint64_t> counter{0};
        static const std::uint64_t salt = std::random_device{}();
        std::ostringstream id;
        id << std::hex << (salt ^ (++counter * 0x9E3779B97F4A7C15ull));
        std::cerr << "glassgpt: internal error " << id.str() << ": " << e.what() << '\n';
        return id.str();
    }

    template <class Fn>
    ServiceResponse guarded(Fn&& fn) const {
        try {
            return fn();
        } catch (const request_error& e) {
            return {e.status(), {{"error", e.what()}, {"field", e.field()}}};
        } catch (const std::exception& e) {
            return {500, {{"error", "internal error"}, {"id", log_internal_error(e)}}};
        }
    }

    std::shared_ptr<const BpeVocab> vocab_;
    mutable std::mutex mutex_;
    std::shared_ptr<const LoadedModel> model_;
    std::optional<std::string> load_error_;
    std::thread loader_;
    std::atomic<std::size_t> active_streams_{0};
    std::atomic<std::size_t> aborted_streams_{0};
    std::atomic<std::size_t> completed_streams_{0};
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string cors_origin = "*";
};

/// Binds a Service to HTTP. Listening blocks; call stop() from another thread.
class HttpServer {
public:
    HttpServer(Service& service, ServerOptions options) : service_(service), options_(std::move(options)) {
        server_.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                                     {"Access-Control-Allow-Headers", "Content-Type"},
                                     {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server_.Get("/api/model", [this](const httplib::Request&, httplib::Response& res) {
            send(res, service_.model_info());
        });
        server_.Post("/api/forward", [this](const httplib::Request& req, httplib::Response& res) {
            send(res, service_.forward(req.body));
        });
        server_.Post("/api/generate", [this](const httplib::Request& req, httplib::Response& res) {
            auto prepared = service_.prepare_generate(req.body);
            if (auto* err = std::get_if<ServiceResponse>(&prepared)) {
                send(res, *err);
                return;
            }
            auto job = std::make_shared<GenerateJob>(std::move(std::get<GenerateJob>(prepared)));
            res.set_chunked_content_provider("application/x-ndjson",
                                             [this, job](std::size_t, httplib::DataSink& sink) {
                                                 service_.run_generate(*job, [&](const std::string& line) {
                                                     return sink.is_writable() && sink.write(line.data(), line.size());
                                                 });
                                                 sink.done();
                                                 return true;
                                             });
        });
    }

    /// Binds the configured port (0 picks a free one) and returns the bound port, or -1.
    int bind() {
        if (options_.port == 0) {
            port_ = server_.bind_to_any_port(options_.host);
        } else {
            port_ = server_.bind_to_port(options_.host, options_.port) ? options_.port : -1;
        }
        return port_;
    }

    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() const { server_.wait_until_ready(); }
    int port() const noexcept { return port_; }

private:
    static void send(httplib::Response& res, const ServiceResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    }

    Service& service_;
    ServerOptions options_;
    httplib::Server server_;
    int port_ = -1;
};

}  // namespace glassgpt
