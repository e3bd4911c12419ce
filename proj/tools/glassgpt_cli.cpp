// glassgpt: command-line front end for the engine.
//
//   glassgpt encode   "text"
//   glassgpt forward  [--temperature T] [--top-k K] [--capture none|summary|full] "text"
//   glassgpt generate [--max-new-tokens N] [--temperature T] [--top-k K] [--seed S] "text"
//   glassgpt trace    --out trace.json [--capture summary|full] "text"
//   glassgpt serve    [--port P]
//
// Weights and vocabulary default to $GLASSGPT_MODEL_DIR/{model.safetensors,vocab.json,merges.txt}.
// Exit codes: 1 usage, 2 model/vocabulary load failure, 3 inference failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "glassgpt/glassgpt.hpp"
#include "glassgpt/service.hpp"

namespace fs = std::filesystem;

namespace {

enum exit_code { ok = 0, usage_error = 1, load_error = 2, inference_error = 3 };

struct load_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string model;
    std::string vocab;
    std::string merges;
    double temperature = glassgpt::default_temperature;
    std::optional<std::size_t> top_k;
    std::uint64_t seed = 0;
    std::size_t max_new_tokens = 20;
    std::string capture;
    int port = 8080;
    std::string out;
    std::string prompt;
};

fs::path default_path(const std::string& explicit_path, const char* file) {
    if (!explicit_path.empty()) return explicit_path;
    if (const char* dir = std::getenv("GLASSGPT_MODEL_DIR"); dir && *dir) return fs::path(dir) / file;
    throw load_failure(std::string("no path given for ") + file + " and GLASSGPT_MODEL_DIR is not set");
}

std::shared_ptr<const glassgpt::BpeVocab> open_vocab(const Options& o) {
    try {
        return std::make_shared<const glassgpt::BpeVocab>(
            glassgpt::load_tokenizer(default_path(o.vocab, "vocab.json"), default_path(o.merges, "merges.txt")));
    } catch (const glassgpt::error& e) {
        throw load_failure(e.what());
    }
}

glassgpt::Gpt2Model open_model(const Options& o) {
    try {
        std::vector<std::string> warnings;
        auto model = glassgpt::load_model_file(default_path(o.model, "model.safetensors"), &warnings);
        for (const auto& w : warnings) std::cerr << "glassgpt: " << w << '\n';
        return model;
    } catch (const glassgpt::error& e) {
        throw load_failure(e.what());
    }
}

glassgpt::SamplingParams sampling(const Options& o) { return {o.temperature, o.top_k, o.seed}; }

int run_encode(const Options& o) {
    const auto vocab = open_vocab(o);
    const auto spans = glassgpt::tokenize(*vocab, o.prompt);
    for (std::size_t i = 0; i < spans.size(); ++i) std::cout << (i ? " " : "") << spans[i].id;
    std::cout << '\n';
    for (std::size_t i = 0; i < spans.size(); ++i) std::cout << (i ? " | " : "") << spans[i].display;
    std::cout << '\n';
    return ok;
}

int run_forward(const Options& o) {
    const auto vocab = open_vocab(o);
    const auto model = open_model(o);
    glassgpt::TraceCaptureSpec capture;
    capture.level = glassgpt::parse_capture_level(o.capture.empty() ? "none" : o.capture).value();
    const auto ids = glassgpt::encode(*vocab, o.prompt);
    const auto result = glassgpt::forward(model, ids, capture);
    auto pred = glassgpt::probabilities(result.logits, sampling(o));
    glassgpt::label_entries(pred, *vocab);

    std::cout << std::left << std::setw(6) << "rank" << std::setw(10) << "token_id" << std::setw(20) << "token"
              << std::right << std::setw(12) << "logit" << std::setw(14) << "probability" << '\n';
    for (std::size_t i = 0; i < std::min(glassgpt::default_display_count, pred.entries.size()); ++i) {
        const auto& e = pred.entries[i];
        std::cout << std::left << std::setw(6) << i + 1 << std::setw(10) << e.token << std::setw(20) << e.display
                  << std::right << std::fixed << std::setprecision(4) << std::setw(12) << e.logit
                  << std::setprecision(6) << std::setw(14) << e.probability << '\n';
    }
    std::cout << "entropy " << std::setprecision(6) << pred.entropy << " nats over " << pred.entries.size()
              << " tokens\n";
    return ok;
}

int run_generate(const Options& o) {
    const auto vocab = open_vocab(o);
    const auto model = open_model(o);
    const auto ids = glassgpt::encode(*vocab, o.prompt);
    std::cout << o.prompt << std::flush;
    glassgpt::GenerateOptions options;
    options.on_step = [&](const glassgpt::GenerationStep& step) {
        std::cout << vocab->bytes(step.token) << std::flush;
        return true;
    };
    glassgpt::generate(model, ids, o.max_new_tokens, sampling(o), options);
    std::cout << '\n';
    return ok;
}

int run_trace(const Options& o) {
    const auto vocab = open_vocab(o);
    auto loaded = std::make_shared<glassgpt::LoadedModel>();
    loaded->model = open_model(o);
    loaded->checkpoint_hash = glassgpt::file_sha256(default_path(o.model, "model.safetensors"));
    glassgpt::Service service(vocab);
    service.set_model(loaded);

    glassgpt::json request = {{"prompt", o.prompt}, {"temperature", o.temperature},
                              {"capture", o.capture.empty() ? "summary" : o.capture}};
    if (o.top_k) request["top_k"] = *o.top_k;
    const auto response = service.forward(request.dump());
    if (response.status != 200) {
        std::cerr << "glassgpt: " << response.body.value("error", "trace failed") << '\n';
        return response.status == 400 ? usage_error : inference_error;
    }
    std::ofstream out(o.out, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::cerr << "glassgpt: cannot write " << o.out << '\n';
        return inference_error;
    }
    const std::string text = response.body.dump();
    out << text;
    std::cout << "wrote " << o.out << " (" << text.size() << " bytes)\n";
    return ok;
}

int run_serve(const Options& o) {
    const auto vocab = open_vocab(o);
    glassgpt::Service service(vocab);
    service.load_model_async(default_path(o.model, "model.safetensors"));
    glassgpt::HttpServer server(service, {"127.0.0.1", o.port, "*"});
    if (server.bind() < 0) {
        std::cerr << "glassgpt: cannot bind 127.0.0.1:" << o.port << '\n';
        return usage_error;
    }
    std::cout << "listening on http://127.0.0.1:" << server.port() << std::endl;
    server.listen_after_bind();
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Introspectable GPT-2 inference engine"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--model", o.model, "Checkpoint path (default $GLASSGPT_MODEL_DIR/model.safetensors)");
        sub->add_option("--vocab", o.vocab, "vocab.json path");
        sub->add_option("--merges", o.merges, "merges.txt path");
    };
    const auto sampling_flags = [&](CLI::App* sub) {
        sub->add_option("--temperature", o.temperature, "Softmax temperature; 0 is greedy")
            ->check(CLI::Range(0.0, glassgpt::max_request_temperature));
        sub->add_option("--top-k", o.top_k, "Keep only the k most likely tokens")->check(CLI::PositiveNumber);
        sub->add_option("--seed", o.seed, "Sampling seed");
    };
    const auto prompt = [&](CLI::App* sub) { sub->add_option("prompt", o.prompt, "Input text")->required(); };
    const auto capture = [&](CLI::App* sub) {
        sub->add_option("--capture", o.capture, "Trace capture level")
            ->check(CLI::IsMember({"none", "summary", "full"}));
    };

    auto* encode = app.add_subcommand("encode", "Print token ids and display tokens");
    common(encode);
    prompt(encode);

    auto* forward = app.add_subcommand("forward", "Print the next-token prediction table");
    common(forward);
    sampling_flags(forward);
    capture(forward);
    prompt(forward);

    auto* generate = app.add_subcommand("generate", "Sample tokens one at a time");
    common(generate);
    sampling_flags(generate);
    generate->add_option("--max-new-tokens", o.max_new_tokens, "Tokens to generate")->check(CLI::PositiveNumber);
    prompt(generate);

    auto* trace = app.add_subcommand("trace", "Write a trace document");
    common(trace);
    sampling_flags(trace);
    capture(trace);
    trace->add_option("--out", o.out, "Output JSON path")->required();
    prompt(trace);

    auto* serve = app.add_subcommand("serve", "Run the local HTTP service");
    common(serve);
    serve->add_option("--port", o.port, "Port on 127.0.0.1")->check(CLI::Range(0, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "glassgpt: " << e.what() << "\n\n" << app.help();
        return usage_error;
    }

    try {
        if (*encode) return run_encode(o);
        if (*forward) return run_forward(o);
        if (*generate) return run_generate(o);
        if (*trace) return run_trace(o);
        if (*serve) return run_serve(o);
    } catch (const load_failure& e) {
        std::cerr << "glassgpt: load failed: " << e.what() << '\n';
        return load_error;
    } catch (const std::exception& e) {
        std::cerr << "glassgpt: inference failed: " << e.what() << '\n';
        return inference_error;
    }
    return usage_error;
}
