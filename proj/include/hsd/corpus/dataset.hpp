#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/hash.hpp"
#include "hsd/core/io.hpp"
#include "hsd/core/labels.hpp"
#include "hsd/corpus/csv.hpp"
#include "hsd/textprep/clean_text.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace hsd::corpus {

// One annotated row. Vote counts sum to `count`; `label` is the consensus class.
struct LabeledTweet {
    std::int64_t row_id = 0;
    int count = 0;
    int hate_votes = 0;
    int offensive_votes = 0;
    int neither_votes = 0;
    int label = 0;
    std::string text;
    int text_length = 0;

    [[nodiscard]] int votes_for(int c) const noexcept {
        return c == 0 ? hate_votes : c == 1 ? offensive_votes : neither_votes;
    }
};

// A row that parsed but broke a row invariant. Kept for the validation report.
struct QuarantinedRow {
    std::size_t line = 0;
    std::int64_t row_id = 0;
    std::string reason;
};

struct Dataset {
    std::vector<LabeledTweet> rows;
    std::string source;
    std::string content_hash;  // sha256 of the source bytes
    bool text_length_recomputed = false;
    std::vector<QuarantinedRow> quarantined;

    [[nodiscard]] std::size_t size() const noexcept { return rows.size(); }
    [[nodiscard]] bool empty() const noexcept { return rows.empty(); }
};

// Canonical column names. The id column is written with an empty header by
// pandas' to_csv and read back as "Unnamed: 0"; both spellings are accepted.
inline constexpr std::string_view col_id = "Unnamed: 0";
inline constexpr std::string_view col_count = "count";
inline constexpr std::string_view col_hate = "hate_speech";
inline constexpr std::string_view col_offensive = "offensive_language";
inline constexpr std::string_view col_neither = "neither";
inline constexpr std::string_view col_class = "class";
inline constexpr std::string_view col_tweet = "tweet";
inline constexpr std::string_view col_text_length = "text_length";

namespace detail {

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    if (s.empty()) {
        return std::nullopt;
    }
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

}  // namespace detail

// Parses the annotated CSV. Missing columns raise SchemaError naming the
// column; non-integer cells raise ParseError with the line number; rows that
// parse but violate a row invariant (vote sum, label range, negative votes,
// duplicate id) are quarantined and reported, never silently dropped.
inline Dataset parse_dataset(std::string_view csv_text, std::string source = "<memory>") {
    const std::vector<CsvRecord> records = parse_csv(csv_text);
    if (records.empty()) {
        throw SchemaError("empty file " + source);
    }
    const auto &header = records.front().fields;
    const auto find_col = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name || (name == col_id && header[i].empty() && i == 0)) {
                return i;
            }
        }
        return std::nullopt;
    };
    const auto require_col = [&](std::string_view name) {
        const auto idx = find_col(name);
        if (!idx) {
            throw SchemaError("missing column '" + std::string(name) + "' in " + source);
        }
        return *idx;
    };
    const std::size_t i_id = require_col(col_id);
    const std::size_t i_count = require_col(col_count);
    const std::size_t i_hate = require_col(col_hate);
    const std::size_t i_off = require_col(col_offensive);
    const std::size_t i_nei = require_col(col_neither);
    const std::size_t i_class = require_col(col_class);
    const std::size_t i_tweet = require_col(col_tweet);
    const std::optional<std::size_t> i_len = find_col(col_text_length);

    Dataset ds;
    ds.source = std::move(source);
    ds.content_hash = sha256_hex(csv_text);
    ds.text_length_recomputed = !i_len.has_value();
    std::unordered_set<std::int64_t> seen;

    for (std::size_t r = 1; r < records.size(); ++r) {
        const CsvRecord &rec = records[r];
        if (rec.fields.size() != header.size()) {
            throw ParseError("line " + std::to_string(rec.line) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(rec.fields.size()));
        }
        const auto integer = [&](std::size_t col) {
            const auto v = detail::parse_int(rec.fields[col]);
            if (!v) {
                throw ParseError("line " + std::to_string(rec.line) + ": column '" + header[col] +
                                 "' is not an integer: '" + rec.fields[col] + "'");
            }
            return *v;
        };
        LabeledTweet row;
        row.row_id = integer(i_id);
        const std::int64_t count = integer(i_count);
        const std::int64_t hate = integer(i_hate);
        const std::int64_t off = integer(i_off);
        const std::int64_t nei = integer(i_nei);
        const std::int64_t label = integer(i_class);
        row.text = rec.fields[i_tweet];
        const std::int64_t length =
            i_len ? integer(*i_len) : static_cast<std::int64_t>(textprep::word_count(row.text));

        std::string reason;
        if (count < 1) {
            reason = "count < 1";
        } else if (hate < 0 || off < 0 || nei < 0) {
            reason = "negative vote count";
        } else if (hate + off + nei != count) {
            reason = "votes " + std::to_string(hate) + "+" + std::to_string(off) + "+" + std::to_string(nei) +
                     " != count " + std::to_string(count);
        } else if (!is_valid_class(static_cast<int>(label)) || label != static_cast<int>(label)) {
            reason = "class " + std::to_string(label) + " outside {0,1,2}";
        } else if (seen.contains(row.row_id)) {
            reason = "duplicate row id";
        }
        if (!reason.empty()) {
            ds.quarantined.push_back({rec.line, row.row_id, std::move(reason)});
            continue;
        }
        seen.insert(row.row_id);
        row.count = static_cast<int>(count);
        row.hate_votes = static_cast<int>(hate);
        row.offensive_votes = static_cast<int>(off);
        row.neither_votes = static_cast<int>(nei);
        row.label = static_cast<int>(label);
        row.text_length = static_cast<int>(length);
        ds.rows.push_back(std::move(row));
    }
    if (ds.rows.empty()) {
        throw DataError("no valid rows in " + ds.source);
    }
    return ds;
}

inline Dataset load_dataset(const std::filesystem::path &path) { return parse_dataset(read_file(path), path.string()); }

// Rows whose ids are in `ids`, in dataset order. Unknown ids raise DataError.
inline Dataset select_rows(const Dataset &ds, std::span<const std::int64_t> ids) {
    std::unordered_map<std::int64_t, std::size_t> pos;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        pos.emplace(ds.rows[i].row_id, i);
    }
    std::vector<std::size_t> picked;
    picked.reserve(ids.size());
    for (const auto id : ids) {
        auto it = pos.find(id);
        if (it == pos.end()) {
            throw DataError("row id " + std::to_string(id) + " not in dataset " + ds.source);
        }
        picked.push_back(it->second);
    }
    std::sort(picked.begin(), picked.end());
    picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
    Dataset out;
    out.source = ds.source;
    out.content_hash = ds.content_hash;
    out.text_length_recomputed = ds.text_length_recomputed;
    for (const auto i : picked) {
        out.rows.push_back(ds.rows[i]);
    }
    return out;
}

inline std::vector<std::int64_t> row_ids(const Dataset &ds) {
    std::vector<std::int64_t> ids;
    ids.reserve(ds.rows.size());
    for (const auto &r : ds.rows) {
        ids.push_back(r.row_id);
    }
    return ids;
}

}  // namespace hsd::corpus
