#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/io.hpp"
#include "hsd/core/utf8.hpp"
#include "hsd/textprep/clean_text.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hsd::textprep {

// Encoder input: ids and attention mask, both exactly max_len long.
// The mask is 1 on [CLS] + wordpieces + [SEP] and 0 on the padding tail.
struct TokenSequence {
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> attention_mask;

    [[nodiscard]] std::size_t length() const noexcept { return ids.size(); }

    // number of leading unmasked positions
    [[nodiscard]] std::size_t real_length() const noexcept {
        return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), std::uint8_t{1}));
    }

    [[nodiscard]] std::span<const std::int32_t> real_ids() const noexcept {
        return std::span<const std::int32_t>(ids).first(real_length());
    }
};

namespace detail {

constexpr bool is_bert_punct(char32_t c) noexcept {
    if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126)) {
        return true;
    }
    return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 || c == 0xBB || c == 0xBF ||
           (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003);
}

constexpr bool is_cjk(char32_t c) noexcept {
    return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x20000 && c <= 0x2A6DF) ||
           (c >= 0x2A700 && c <= 0x2B73F) || (c >= 0x2B740 && c <= 0x2B81F) || (c >= 0x2B820 && c <= 0x2CEAF) ||
           (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

constexpr bool is_control(char32_t c) noexcept {
    if (c == U'\t' || c == U'\n' || c == U'\r') {
        return false;
    }
    return c < 0x20 || (c >= 0x7F && c < 0xA0) || c == 0xAD || (c >= 0x200B && c <= 0x200F) || c == 0xFEFF;
}

}  // namespace detail

// Subword tokenizer backed by a BERT-style WordPiece vocabulary (vocab.txt).
// A default-constructed adapter is "not loaded"; encoding with it throws.
// Immutable after construction, safe for concurrent use.
class TokenizerAdapter {
  public:
    TokenizerAdapter() = default;

    explicit TokenizerAdapter(std::vector<std::string> tokens, bool lowercase = true)
    {
        auto state = std::make_shared<State>();
        state->tokens = std::move(tokens);
        state->lowercase = lowercase;
        for (std::size_t i = 0; i < state->tokens.size(); ++i) {
            state->index.emplace(state->tokens[i], static_cast<std::int32_t>(i));
        }
        const auto require = [&](const char *tok) {
            auto it = state->index.find(tok);
            if (it == state->index.end()) {
                throw ConfigError(std::string("vocabulary lacks special token ") + tok);
            }
            return it->second;
        };
        state->pad = require("[PAD]");
        state->unk = require("[UNK]");
        state->cls = require("[CLS]");
        state->sep = require("[SEP]");
        state_ = std::move(state);
    }

    static TokenizerAdapter from_vocab_file(const std::filesystem::path &path, bool lowercase = true) {
        return TokenizerAdapter(parse_vocab(read_file(path)), lowercase);
    }

    static std::vector<std::string> parse_vocab(const std::string &text) {
        std::vector<std::string> tokens;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            tokens.push_back(line);
        }
        while (!tokens.empty() && tokens.back().empty()) {
            tokens.pop_back();
        }
        return tokens;
    }

    [[nodiscard]] bool loaded() const noexcept { return state_ != nullptr; }
    [[nodiscard]] std::size_t vocab_size() const { return checked().tokens.size(); }
    [[nodiscard]] const std::vector<std::string> &tokens() const { return checked().tokens; }
    [[nodiscard]] bool lowercase() const { return checked().lowercase; }
    [[nodiscard]] std::int32_t pad_id() const { return checked().pad; }
    [[nodiscard]] std::int32_t unk_id() const { return checked().unk; }
    [[nodiscard]] std::int32_t cls_id() const { return checked().cls; }
    [[nodiscard]] std::int32_t sep_id() const { return checked().sep; }

    [[nodiscard]] std::string vocab_text() const {
        std::string out;
        for (const auto &t : tokens()) {
            out += t;
            out += '\n';
        }
        return out;
    }

    // Basic tokenization (whitespace, punctuation, CJK split, optional lowercase)
    // followed by greedy longest-match-first WordPiece.
    [[nodiscard]] std::vector<std::int32_t> wordpiece_ids(std::string_view text) const {
        const State &s = checked();
        std::vector<std::int32_t> ids;
        for (const std::u32string &word : basic_split(text, s.lowercase)) {
            append_wordpieces(s, word, ids);
        }
        return ids;
    }

    [[nodiscard]] TokenSequence encode(std::string_view text, std::size_t max_len) const {
        const State &s = checked();
        if (max_len < 2) {
            throw ConfigError("max_len must be at least 2");
        }
        std::vector<std::int32_t> pieces = wordpiece_ids(text);
        if (pieces.size() > max_len - 2) {
            pieces.resize(max_len - 2);
        }
        TokenSequence seq;
        seq.ids.reserve(max_len);
        seq.ids.push_back(s.cls);
        seq.ids.insert(seq.ids.end(), pieces.begin(), pieces.end());
        seq.ids.push_back(s.sep);
        seq.attention_mask.assign(seq.ids.size(), 1);
        seq.ids.resize(max_len, s.pad);
        seq.attention_mask.resize(max_len, 0);
        return seq;
    }

  private:
    struct State {
        std::vector<std::string> tokens;
        std::unordered_map<std::string, std::int32_t> index;
        bool lowercase = true;
        std::int32_t pad = 0, unk = 0, cls = 0, sep = 0;
    };

    static constexpr std::size_t max_chars_per_word = 100;

    const State &checked() const {
        if (!state_) {
            throw ConfigError("tokenizer adapter not loaded");
        }
        return *state_;
    }

    static std::vector<std::u32string> basic_split(std::string_view text, bool lowercase) {
        std::vector<std::u32string> words;
        std::u32string current;
        const auto flush = [&] {
            if (!current.empty()) {
                words.push_back(std::move(current));
                current.clear();
            }
        };
        for (char32_t c : utf8::decode(text)) {
            if (c == 0 || c == utf8::replacement_char || detail::is_control(c)) {
                continue;
            }
            if (utf8::is_space(c)) {
                flush();
                continue;
            }
            if (lowercase && c >= 'A' && c <= 'Z') {
                c += 'a' - 'A';
            }
            if (detail::is_bert_punct(c) || detail::is_cjk(c)) {
                flush();
                words.push_back(std::u32string(1, c));
                continue;
            }
            current.push_back(c);
        }
        flush();
        return words;
    }

    static void append_wordpieces(const State &s, const std::u32string &word, std::vector<std::int32_t> &out) {
        if (word.size() > max_chars_per_word) {
            out.push_back(s.unk);
            return;
        }
        std::vector<std::int32_t> pieces;
        std::size_t start = 0;
        while (start < word.size()) {
            std::size_t end = word.size();
            std::int32_t found = -1;
            while (start < end) {
                std::string piece = utf8::encode(std::u32string_view(word).substr(start, end - start));
                if (start > 0) {
                    piece.insert(0, "##");
                }
                auto it = s.index.find(piece);
                if (it != s.index.end()) {
                    found = it->second;
                    break;
                }
                --end;
            }
            if (found < 0) {
                out.push_back(s.unk);
                return;
            }
            pieces.push_back(found);
            start = end;
        }
        out.insert(out.end(), pieces.begin(), pieces.end());
    }

    std::shared_ptr<const State> state_;
};

// Cleaned text -> fixed-length encoder input.
inline TokenSequence tokenize(const CleanText &clean, const TokenizerAdapter &adapter, std::size_t max_len) {
    return adapter.encode(clean.str(), max_len);
}

// Builds a WordPiece vocabulary from cleaned texts when no pretrained
// vocabulary is supplied: special tokens, the 26 letters as word-initial and
// "##" continuation pieces (so every cleaned word is encodable without
// [UNK]), then whole words by descending frequency, ties lexicographic.
inline std::vector<std::string> build_wordpiece_vocab(std::span<const CleanText> texts, std::size_t max_size) {
    std::vector<std::string> vocab = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    for (char c = 'a'; c <= 'z'; ++c) {
        vocab.emplace_back(1, c);
    }
    for (char c = 'a'; c <= 'z'; ++c) {
        vocab.push_back(std::string("##") + c);
    }
    if (max_size < vocab.size()) {
        throw ConfigError("vocabulary size must be at least " + std::to_string(vocab.size()));
    }
    std::map<std::string, std::size_t> counts;
    for (const auto &t : texts) {
        std::string_view s = t.str();
        while (!s.empty()) {
            const auto sp = s.find(' ');
            const std::string_view w = s.substr(0, sp);
            if (w.size() > 1) {
                ++counts[std::string(w)];
            }
            if (sp == std::string_view::npos) {
                break;
            }
            s.remove_prefix(sp + 1);
        }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto &a, const auto &b) { return a.second > b.second; });
    for (const auto &[word, n] : ranked) {
        if (vocab.size() >= max_size) {
            break;
        }
        vocab.push_back(word);
    }
    return vocab;
}

}  // namespace hsd::textprep
