#pragma once

// Paths and loaders for the committed reference fixtures.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glassgpt/error.hpp"
#include "glassgpt/tokenizer.hpp"
#include "glassgpt/unicode.hpp"

namespace glassgpt::testing {

inline const std::filesystem::path fixtures_dir{GLASSGPT_FIXTURES_DIR};
inline const std::filesystem::path assets_dir{GLASSGPT_ASSETS_DIR};
inline const std::filesystem::path model_dir{GLASSGPT_MODEL_DIR};

inline nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw error("cannot open " + p.string());
    return nlohmann::json::parse(in);
}

inline std::vector<float> read_f32(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw error("cannot open " + p.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<float> out(bytes.size() / sizeof(float));
    std::memcpy(out.data(), bytes.data(), out.size() * sizeof(float));
    return out;
}

struct CorpusLine {
    std::string text;
    std::vector<token_id> ids;
};

inline std::vector<CorpusLine> read_corpus(const std::filesystem::path& p = fixtures_dir / "tokenizer_corpus.jsonl") {
    std::ifstream in(p);
    if (!in) throw error("cannot open " + p.string());
    std::vector<CorpusLine> lines;
    for (std::string line; std::getline(in, line);) {
        const auto j = nlohmann::json::parse(line);
        lines.push_back({j.at("text").get<std::string>(), j.at("ids").get<std::vector<token_id>>()});
    }
    return lines;
}

inline const BpeVocab& gpt2_vocab() {
    static const BpeVocab vocab = load_tokenizer(assets_dir / "vocab.json", assets_dir / "merges.txt");
    return vocab;
}

/// Random valid UTF-8: code points drawn from ASCII, Latin, CJK, emoji and
/// the control ranges, surrogates excluded.
template <class Rng>
std::string random_utf8(Rng& rng, std::size_t max_codepoints) {
    static constexpr char32_t ranges[][2] = {{0x00, 0x7F},       {0x80, 0x7FF},     {0x800, 0xD7FF},
                                             {0xE000, 0xFFFF},   {0x4E00, 0x9FFF},  {0x1F300, 0x1FAFF},
                                             {0x10000, 0x10FFFF}, {0x20, 0x7E},     {0x20, 0x20}};
    std::uniform_int_distribution<std::size_t> len(0, max_codepoints), pick(0, std::size(ranges) - 1);
    std::string s;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = ranges[pick(rng)];
        std::uniform_int_distribution<std::uint32_t> cp(r[0], r[1]);
        unicode::append_utf8(s, cp(rng));
    }
    return s;
}

}  // namespace glassgpt::testing
