#pragma once

// Byte-level BPE compatible with the published GPT-2 vocabulary files.
//
// Text is split by the GPT-2 pre-tokenization pattern
//   's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
// each piece's bytes are mapped to printable code points, and the piece is
// merged pairwise by ascending merge rank until no ranked pair remains.

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "glassgpt/error.hpp"
#include "glassgpt/unicode.hpp"

namespace glassgpt {

using token_id = std::int32_t;

inline constexpr std::string_view end_of_text_token = "<|endoftext|>";

/// A token of an encoded prompt as the UI shows it.
struct TokenSpan {
    token_id id = 0;
    /// Raw bytes of the token; may be a partial UTF-8 sequence.
    std::string text;
    /// Printable form: leading space shown as a middle dot, controls escaped.
    std::string display;

    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// Immutable vocabulary + merge table. Safe to share between threads.
class BpeVocab {
public:
    /// GPT-2's reversible byte -> printable code point table.
    static const std::array<char32_t, 256>& byte_encoder() {
        static const std::array<char32_t, 256> table = [] {
            std::array<char32_t, 256> t{};
            std::array<bool, 256> printable{};
            for (int b = '!'; b <= '~'; ++b) printable[b] = true;
            for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
            for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
            char32_t next = 256;
            for (int b = 0; b < 256; ++b) t[b] = printable[b] ? static_cast<char32_t>(b) : next++;
            return t;
        }();
        return table;
    }

    /// Inverse of byte_encoder(); std::nullopt for code points outside the alphabet.
    static std::optional<unsigned char> byte_for(char32_t cp) {
        static const std::unordered_map<char32_t, unsigned char> inverse = [] {
            std::unordered_map<char32_t, unsigned char> m;
            const auto& enc = byte_encoder();
            for (int b = 0; b < 256; ++b) m.emplace(enc[b], static_cast<unsigned char>(b));
            return m;
        }();
        const auto it = inverse.find(cp);
        if (it == inverse.end()) return std::nullopt;
        return it->second;
    }

    static BpeVocab load(std::istream& vocab_json, std::istream& merges_txt) {
        BpeVocab v;
        v.load_vocab(vocab_json);
        v.load_merges(merges_txt);
        return v;
    }

    std::size_t size() const noexcept { return id_to_token_.size(); }
    std::size_t merge_count() const noexcept { return merge_ranks_.size(); }

    /// Vocabulary string (byte-encoded form) of an id.
    const std::string& token(token_id id) const { return id_to_token_.at(checked(id)); }
    /// Raw bytes of an id.
    const std::string& bytes(token_id id) const { return id_to_bytes_.at(checked(id)); }

    std::optional<token_id> id_of(std::string_view token) const {
        const auto it = token_to_id_.find(std::string(token));
        if (it == token_to_id_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<int> merge_rank(std::string_view left, std::string_view right) const {
        std::string key;
        key.reserve(left.size() + right.size() + 1);
        key.append(left).push_back(' ');
        key.append(right);
        const auto it = merge_ranks_.find(key);
        if (it == merge_ranks_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<token_id> end_of_text() const { return end_of_text_; }

    bool contains(token_id id) const noexcept { return id >= 0 && static_cast<std::size_t>(id) < size(); }

    std::size_t checked(token_id id) const {
        if (!contains(id)) {
            throw tokenizer_error("token id " + std::to_string(id) + " outside [0, " + std::to_string(size()) + ")");
        }
        return static_cast<std::size_t>(id);
    }

private:
    BpeVocab() = default;

    void load_vocab(std::istream& in) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw tokenizer_error(std::string("vocab.json: malformed JSON: ") + e.what());
        }
        if (!doc.is_object()) throw tokenizer_error("vocab.json: top level must be an object of token -> id");

        std::vector<std::optional<std::string>> slots(doc.size());
        for (const auto& [key, value] : doc.items()) {
            if (!value.is_number_integer()) {
                throw tokenizer_error("vocab.json: id for token '" + key + "' is not an integer");
            }
            const auto id = value.get<std::int64_t>();
            if (id < 0 || static_cast<std::uint64_t>(id) >= slots.size()) {
                throw tokenizer_error("vocab.json: non-dense id space: token '" + key + "' has id " +
                                      std::to_string(id) + " but the vocabulary has " +
                                      std::to_string(slots.size()) + " entries");
            }
            auto& slot = slots[static_cast<std::size_t>(id)];
            if (slot) {
                throw tokenizer_error("vocab.json: duplicate id " + std::to_string(id) + " for tokens '" + *slot +
                                      "' and '" + key + "'");
            }
            slot = key;
        }

        id_to_token_.reserve(slots.size());
        id_to_bytes_.reserve(slots.size());
        token_to_id_.reserve(slots.size());
        for (std::size_t id = 0; id < slots.size(); ++id) {
            const std::string& tok = *slots[id];
            id_to_bytes_.push_back(decode_token_string(tok));
            token_to_id_.emplace(tok, static_cast<token_id>(id));
            id_to_token_.push_back(tok);
        }

        std::string single;
        for (char32_t cp : byte_encoder()) {
            single.clear();
            unicode::append_utf8(single, cp);
            if (!token_to_id_.contains(single)) {
                throw tokenizer_error("vocab.json: missing single-byte token '" + single + "'");
            }
        }
        end_of_text_ = id_of(end_of_text_token);
    }

    void load_merges(std::istream& in) {
        std::string line;
        std::size_t line_no = 0;
        int rank = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line_no == 1 && line.starts_with('#')) continue;
            if (line.empty()) continue;
            const auto sep = line.find(' ');
            if (sep == std::string::npos || sep == 0 || sep + 1 == line.size() ||
                line.find(' ', sep + 1) != std::string::npos) {
                throw tokenizer_error("merges.txt line " + std::to_string(line_no) + ": expected 'left right', got '" +
                                      line + "'");
            }
            const std::string left = line.substr(0, sep);
            const std::string right = line.substr(sep + 1);
            for (const std::string* sym : {&left, &right}) {
                if (!token_to_id_.contains(*sym)) {
                    throw tokenizer_error("merges.txt line " + std::to_string(line_no) + ": merge pair '" + line +
                                          "' references unknown symbol '" + *sym + "'");
                }
            }
            if (!token_to_id_.contains(left + right)) {
                throw tokenizer_error("merges.txt line " + std::to_string(line_no) + ": merge pair '" + line +
                                      "' produces '" + left + right + "' which is not in the vocabulary");
            }
            if (!merge_ranks_.emplace(line, rank).second) {
                throw tokenizer_error("merges.txt line " + std::to_string(line_no) + ": duplicate merge pair '" +
                                      line + "'");
            }
            ++rank;
        }
    }

    static std::string decode_token_string(const std::string& tok) {
        std::string out;
        out.reserve(tok.size());
        for (std::size_t pos = 0; pos < tok.size();) {
            const auto d = unicode::decode_one(tok, pos);
            const auto b = d.valid ? byte_for(d.codepoint) : std::nullopt;
            if (!b) {
                throw tokenizer_error("vocab.json: token '" + unicode::to_valid_utf8(tok) +
                                      "' contains a character outside the byte alphabet");
            }
            out.push_back(static_cast<char>(*b));
            pos += d.length;
        }
        return out;
    }

    std::vector<std::string> id_to_token_;
    std::vector<std::string> id_to_bytes_;
    std::unordered_map<std::string, token_id> token_to_id_;
    std::unordered_map<std::string, int> merge_ranks_;
    std::optional<token_id> end_of_text_;
};

inline BpeVocab load_tokenizer(std::istream& vocab_json, std::istream& merges_txt) {
    return BpeVocab::load(vocab_json, merges_txt);
}

inline BpeVocab load_tokenizer(const std::filesystem::path& vocab_path, const std::filesystem::path& merges_path) {
    std::ifstream vocab(vocab_path, std::ios::binary);
    if (!vocab) throw tokenizer_error("cannot open vocabulary file " + vocab_path.string());
    std::ifstream merges(merges_path, std::ios::binary);
    if (!merges) throw tokenizer_error("cannot open merges file " + merges_path.string());
    return BpeVocab::load(vocab, merges);
}

/// Splits text into pre-tokens with the GPT-2 pattern. Pieces are views into `text`.
inline std::vector<std::string_view> pre_tokenize(std::string_view text) {
    struct cp_info {
        char32_t cp;
        std::size_t offset;
        bool valid;
    };
    std::vector<cp_info> cps;
    cps.reserve(text.size());
    for (std::size_t pos = 0; pos < text.size();) {
        const auto d = unicode::decode_one(text, pos);
        cps.push_back({d.codepoint, pos, d.valid});
        pos += d.length;
    }
    const std::size_t n = cps.size();
    const auto offset = [&](std::size_t i) { return i < n ? cps[i].offset : text.size(); };
    const auto letter = [&](std::size_t i) { return cps[i].valid && unicode::is_letter(cps[i].cp); };
    const auto number = [&](std::size_t i) { return cps[i].valid && unicode::is_number(cps[i].cp); };
    const auto space = [&](std::size_t i) { return cps[i].valid && unicode::is_space(cps[i].cp); };
    const auto other = [&](std::size_t i) { return !letter(i) && !number(i) && !space(i); };
    const auto is = [&](std::size_t i, char32_t c) { return i < n && cps[i].valid && cps[i].cp == c; };

    std::vector<std::string_view> pieces;
    std::size_t i = 0;
    const auto emit = [&](std::size_t end) {
        pieces.push_back(text.substr(offset(i), offset(end) - offset(i)));
        i = end;
    };
    const auto run = [&](std::size_t from, auto&& pred) {
        while (from < n && pred(from)) ++from;
        return from;
    };

    while (i < n) {
        if (is(i, U'\'')) {
            if (is(i + 1, U's') || is(i + 1, U't') || is(i + 1, U'm') || is(i + 1, U'd')) {
                emit(i + 2);
                continue;
            }
            if ((is(i + 1, U'r') && is(i + 2, U'e')) || (is(i + 1, U'v') && is(i + 2, U'e')) ||
                (is(i + 1, U'l') && is(i + 2, U'l'))) {
                emit(i + 3);
                continue;
            }
        }
        const bool lead_space = is(i, U' ') && i + 1 < n;
        if (letter(i)) { emit(run(i, letter)); continue; }
        if (lead_space && letter(i + 1)) { emit(run(i + 1, letter)); continue; }
        if (number(i)) { emit(run(i, number)); continue; }
        if (lead_space && number(i + 1)) { emit(run(i + 1, number)); continue; }
        if (other(i)) { emit(run(i, other)); continue; }
        if (lead_space && other(i + 1)) { emit(run(i + 1, other)); continue; }

        // Whitespace: \s+(?!\S) leaves the last space for the next piece
        // when non-space follows, otherwise \s+ takes the whole run.
        const std::size_t end = run(i, space);
        if (end == n || end - i == 1) {
            emit(end);
        } else {
            emit(end - 1);
        }
    }
    return pieces;
}

namespace detail {

inline void bpe_piece(const BpeVocab& vocab, std::string_view piece, std::vector<token_id>& out) {
    const auto& enc = BpeVocab::byte_encoder();
    std::vector<std::string> word;
    word.reserve(piece.size());
    for (unsigned char b : piece) {
        std::string sym;
        unicode::append_utf8(sym, enc[b]);
        word.push_back(std::move(sym));
    }

    while (word.size() > 1) {
        std::optional<int> best;
        std::size_t best_at = 0;
        for (std::size_t i = 0; i + 1 < word.size(); ++i) {
            const auto r = vocab.merge_rank(word[i], word[i + 1]);
            if (r && (!best || *r < *best)) {
                best = r;
                best_at = i;
            }
        }
        if (!best) break;

        // Merge every non-overlapping occurrence of the winning pair, left to right.
        const std::string first = word[best_at];
        const std::string second = word[best_at + 1];
        std::vector<std::string> merged;
        merged.reserve(word.size());
        for (std::size_t i = 0; i < word.size();) {
            if (i + 1 < word.size() && word[i] == first && word[i + 1] == second) {
                merged.push_back(first + second);
                i += 2;
            } else {
                merged.push_back(std::move(word[i]));
                i += 1;
            }
        }
        word = std::move(merged);
    }

    for (const auto& sym : word) {
        const auto id = vocab.id_of(sym);
        // Every single-byte symbol is in the vocabulary and merges only produce vocabulary entries.
        if (!id) throw tokenizer_error("internal: symbol '" + sym + "' missing from vocabulary");
        out.push_back(*id);
    }
}

}  // namespace detail

inline std::vector<token_id> encode(const BpeVocab& vocab, std::string_view text) {
    std::vector<token_id> ids;
    for (std::string_view piece : pre_tokenize(text)) detail::bpe_piece(vocab, piece, ids);
    return ids;
}

/// Concatenated raw bytes of `ids`, without any UTF-8 repair.
inline std::string decode_bytes(const BpeVocab& vocab, std::span<const token_id> ids) {
    std::string out;
    for (token_id id : ids) out += vocab.bytes(id);
    return out;
}

/// Decoded text; ill-formed UTF-8 in the assembled bytes becomes U+FFFD.
inline std::string decode(const BpeVocab& vocab, std::span<const token_id> ids) {
    return unicode::to_valid_utf8(decode_bytes(vocab, ids));
}

/// Printable text with a leading space shown as "·" and control characters escaped.
inline std::string token_display(const BpeVocab& vocab, token_id id) {
    const std::string& raw = vocab.bytes(id);
    if (vocab.end_of_text() && id == *vocab.end_of_text()) return std::string(end_of_text_token);

    const std::string text = unicode::to_valid_utf8(raw);
    std::string out;
    for (std::size_t pos = 0; pos < text.size();) {
        const auto d = unicode::decode_one(text, pos);
        const char32_t cp = d.codepoint;
        if (pos == 0 && cp == U' ') {
            out += "·";
        } else if (cp == U'\n') {
            out += "\\n";
        } else if (cp == U'\t') {
            out += "\\t";
        } else if (cp == U'\r') {
            out += "\\r";
        } else if (cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp < 0xA0)) {
            char buf[16];
            std::snprintf(buf, sizeof buf, cp < 0x100 ? "\\x%02X" : "\\u%04X", static_cast<unsigned>(cp));
            out += buf;
        } else {
            out.append(text, pos, d.length);
        }
        pos += d.length;
    }
    return out;
}

inline std::vector<TokenSpan> tokenize(const BpeVocab& vocab, std::string_view text) {
    std::vector<TokenSpan> spans;
    for (token_id id : encode(vocab, text)) spans.push_back({id, vocab.bytes(id), token_display(vocab, id)});
    return spans;
}

inline std::vector<TokenSpan> token_spans(const BpeVocab& vocab, std::span<const token_id> ids) {
    std::vector<TokenSpan> spans;
    spans.reserve(ids.size());
    for (token_id id : ids) spans.push_back({id, vocab.bytes(id), token_display(vocab, id)});
    return spans;
}

}  // namespace glassgpt
