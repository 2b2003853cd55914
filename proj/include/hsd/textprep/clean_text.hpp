#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/utf8.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

namespace hsd::textprep {

// The 34 emoticon literals removed by the cleaning cascade, in removal order.
// Duplicates ('xD', 'XP') and mixed case are intentional; since the cascade
// lowercases first, literals containing uppercase letters never match.
// Mirrored byte-for-byte by data/emoticons-v1.txt.
inline constexpr std::string_view emoticon_list_version = "v1";
inline constexpr std::array<std::string_view, 34> emoticons = {
    ":-)", ":)",  "(:",  "(-:", ":))", "((:", ":-D", ":D",  "X-D", "XD",  "xD",  "xD",
    "<3",  "3",   ":*",  ":-*", "xP",  "XP",  "XP",  "Xp",  ":-|", ":->", ":-<", "8-)",
    ":-P", ":-p", "=P",  "=p",  ":*)", "*-*", "B-)", "O.o", "X-(", ")-X",
};

// Output of clean_text: empty, or [a-z]+ words separated by single spaces.
class CleanText {
  public:
    CleanText() = default;

    // Throws ConfigError when `text` violates the invariant.
    static CleanText from_validated(std::string text) {
        if (!is_valid(text)) {
            throw ConfigError("not a cleaned text: '" + text + "'");
        }
        return CleanText(std::move(text));
    }

    static bool is_valid(std::string_view text) noexcept {
        if (text.empty()) {
            return true;
        }
        if (text.front() == ' ' || text.back() == ' ') {
            return false;
        }
        for (std::size_t i = 0; i < text.size(); ++i) {
            const char c = text[i];
            if (c == ' ') {
                if (text[i - 1] == ' ') {
                    return false;
                }
            } else if (c < 'a' || c > 'z') {
                return false;
            }
        }
        return true;
    }

    [[nodiscard]] const std::string &str() const noexcept { return value_; }
    [[nodiscard]] bool empty() const noexcept { return value_.empty(); }

    friend bool operator==(const CleanText &, const CleanText &) = default;

  private:
    explicit CleanText(std::string text) : value_(std::move(text)) {}

    friend CleanText clean_text(std::string_view raw);

    std::string value_;
};

namespace detail {

constexpr bool is_ascii_word(char32_t c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

constexpr bool is_ascii_digit(char32_t c) noexcept { return c >= '0' && c <= '9'; }

constexpr bool is_kept(char32_t c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '?' || c == '.' || c == '!' || c == ',' ||
           c == 0xBF;
}

// str.lower(), restricted to what can influence the rest of the cascade:
// ASCII letters plus the only two code points whose lowercase form contains
// ASCII (U+0130 -> "i̇", U+212A KELVIN SIGN -> "k"). Every other non-ASCII
// code point is erased by the character filter whatever its case.
inline std::u32string lower(std::u32string_view in) {
    std::u32string out;
    out.reserve(in.size());
    for (const char32_t c : in) {
        if (c >= 'A' && c <= 'Z') {
            out.push_back(c + ('a' - 'A'));
        } else if (c == 0x130) {
            out.push_back(U'i');
            out.push_back(0x307);
        } else if (c == 0x212A) {
            out.push_back(U'k');
        } else {
            out.push_back(c);
        }
    }
    return out;
}

// https?://[^\s]+
inline std::u32string remove_urls(std::u32string_view in) {
    std::u32string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        if (in.substr(i, 4) == U"http") {
            std::size_t j = i + 4;
            if (j < in.size() && in[j] == U's') {
                ++j;
            }
            if (in.substr(j, 3) == U"://" && j + 3 < in.size() && !utf8::is_space(in[j + 3])) {
                j += 3;
                while (j < in.size() && !utf8::is_space(in[j])) {
                    ++j;
                }
                i = j;
                continue;
            }
        }
        out.push_back(in[i++]);
    }
    return out;
}

// @\w+ with ASCII \w
inline std::u32string remove_mentions(std::u32string_view in) {
    std::u32string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        if (in[i] == U'@' && i + 1 < in.size() && is_ascii_word(in[i + 1])) {
            i += 2;
            while (i < in.size() && is_ascii_word(in[i])) {
                ++i;
            }
            continue;
        }
        out.push_back(in[i++]);
    }
    return out;
}

inline std::u32string remove_digits(std::u32string_view in) {
    std::u32string out;
    out.reserve(in.size());
    for (const char32_t c : in) {
        if (!is_ascii_digit(c)) {
            out.push_back(c);
        }
    }
    return out;
}

// str.replace(needle, ''): one left-to-right pass, non-overlapping, no rescan.
inline std::u32string erase_all(std::u32string_view in, std::u32string_view needle) {
    std::u32string out;
    out.reserve(in.size());
    std::size_t i = 0;
    while (i < in.size()) {
        if (in.substr(i, needle.size()) == needle) {
            i += needle.size();
        } else {
            out.push_back(in[i++]);
        }
    }
    return out;
}

inline std::u32string remove_emoticons(std::u32string text) {
    for (const std::string_view e : emoticons) {
        const std::u32string needle(e.begin(), e.end());
        text = erase_all(text, needle);
    }
    return text;
}

// [^a-zA-Z?.!,\xbf]+ -> " ", then each of ?.!,\xbf -> " ", then [" "]+ -> " ", then strip.
inline std::string filter_and_normalise(std::u32string_view in) {
    std::u32string filtered;
    filtered.reserve(in.size());
    for (std::size_t i = 0; i < in.size();) {
        if (is_kept(in[i])) {
            const char32_t c = in[i++];
            const bool punct = c == U'?' || c == U'.' || c == U'!' || c == U',' || c == 0xBF;
            filtered.push_back(punct ? U' ' : c);
        } else {
            while (i < in.size() && !is_kept(in[i])) {
                ++i;
            }
            filtered.push_back(U' ');
        }
    }
    std::string out;
    out.reserve(filtered.size());
    for (std::size_t i = 0; i < filtered.size();) {
        if (filtered[i] == U' ' || filtered[i] == U'"') {
            while (i < filtered.size() && (filtered[i] == U' ' || filtered[i] == U'"')) {
                ++i;
            }
            out.push_back(' ');
        } else {
            // only ASCII letters survive the filter
            out.push_back(static_cast<char>(filtered[i++]));
        }
    }
    const auto first = out.find_first_not_of(' ');
    if (first == std::string::npos) {
        return {};
    }
    const auto last = out.find_last_not_of(' ');
    return out.substr(first, last - first + 1);
}

}  // namespace detail

// Deterministic tweet-cleaning cascade. Order: lowercase, URLs, mentions,
// digits, emoticons, character filter, punctuation, space collapse, strip.
// Total: every input, including malformed UTF-8, yields a CleanText.
inline CleanText clean_text(std::string_view raw) {
    std::u32string text = detail::lower(utf8::decode(raw));
    text = detail::remove_urls(text);
    text = detail::remove_mentions(text);
    text = detail::remove_digits(text);
    text = detail::remove_emoticons(std::move(text));
    return CleanText(detail::filter_and_normalise(text));
}

// Number of maximal runs of non-whitespace code points (str.split() semantics).
inline std::size_t word_count(std::string_view raw) {
    std::size_t count = 0;
    bool in_word = false;
    for (const char32_t c : utf8::decode(raw)) {
        if (utf8::is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

}  // namespace hsd::textprep
