#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/io.hpp"

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

namespace hsd::moderation {

namespace detail {

// ASCII letters, digits, apostrophes, and any non-ASCII byte (keeps UTF-8 words whole)
inline bool word_byte(unsigned char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '\'' || c >= 0x80;
}

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto &c : out) {
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
    }
    return out;
}

// Calls f(is_word, piece) over alternating word / separator runs.
template <typename F>
void for_each_run(std::string_view text, F &&f) {
    std::size_t i = 0;
    while (i < text.size()) {
        const bool word = word_byte(static_cast<unsigned char>(text[i]));
        std::size_t j = i;
        while (j < text.size() && word_byte(static_cast<unsigned char>(text[j])) == word) {
            ++j;
        }
        f(word, text.substr(i, j - i));
        i = j;
    }
}

}  // namespace detail

// Offensive term -> neutral replacement.
class Lexicon {
  public:
    Lexicon() = default;

    explicit Lexicon(std::map<std::string, std::string> entries) : entries_(std::move(entries)) { validate(); }

    // One entry per line: term<TAB>replacement (a comma also separates when a
    // line has no tab). Blank lines and lines starting with '#' are skipped.
    static Lexicon parse(std::string_view text, const std::string &origin = "<lexicon>") {
        std::map<std::string, std::string> entries;
        std::istringstream in{std::string(text)};
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) {
                line.erase(0, 3);
            }
            if (line.empty() || line[0] == '#') {
                continue;
            }
            auto sep = line.find('\t');
            if (sep == std::string::npos) {
                sep = line.find(',');
            }
            if (sep == std::string::npos) {
                throw ParseError(origin + " line " + std::to_string(lineno) + ": expected term and replacement");
            }
            const std::string term = line.substr(0, sep);
            if (!entries.emplace(term, line.substr(sep + 1)).second) {
                throw ParseError(origin + " line " + std::to_string(lineno) + ": duplicate term '" + term + "'");
            }
        }
        try {
            return Lexicon(std::move(entries));
        } catch (const ConfigError &e) {
            throw ConfigError(origin + ": " + e.what());
        }
    }

    static Lexicon load(const std::filesystem::path &path) { return parse(read_file(path), path.string()); }

    [[nodiscard]] const std::map<std::string, std::string> &entries() const noexcept { return entries_; }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

    [[nodiscard]] const std::string *find(std::string_view lowered_word) const {
        const auto it = entries_.find(std::string(lowered_word));
        return it == entries_.end() ? nullptr : &it->second;
    }

    // Single left-to-right pass over word tokens; a token whose lowercase form
    // is a key is replaced, everything else is copied through. Replacements are
    // never rescanned.
    [[nodiscard]] std::string rewrite(std::string_view text) const {
        std::string out;
        out.reserve(text.size());
        detail::for_each_run(text, [&](bool word, std::string_view piece) {
            const std::string *rep = word ? find(detail::ascii_lower(piece)) : nullptr;
            out += rep ? std::string_view(*rep) : piece;
        });
        return out;
    }

  private:
    // Keys are single lowercase words. No replacement may contain a key as a
    // whole word, so a second pass could never change the output either.
    void validate() const {
        for (const auto &[key, rep] : entries_) {
            if (key.empty()) {
                throw ConfigError("lexicon has an empty term");
            }
            if (detail::ascii_lower(key) != key) {
                throw ConfigError("lexicon term '" + key + "' is not lowercase");
            }
            for (const char c : key) {
                if (!detail::word_byte(static_cast<unsigned char>(c))) {
                    throw ConfigError("lexicon term '" + key + "' is not a single word");
                }
            }
        }
        for (const auto &[key, rep] : entries_) {
            detail::for_each_run(rep, [&](bool word, std::string_view piece) {
                if (word && entries_.contains(detail::ascii_lower(piece))) {
                    throw ConfigError("lexicon replacement for '" + key + "' contains the term '" +
                                      std::string(piece) + "'");
                }
            });
        }
    }

    std::map<std::string, std::string> entries_;
};

inline std::string rewrite_lexicon(std::string_view text, const Lexicon &lex) { return lex.rewrite(text); }

}  // namespace hsd::moderation
