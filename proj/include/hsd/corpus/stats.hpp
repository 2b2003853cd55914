#pragma once

#include "hsd/core/labels.hpp"
#include "hsd/corpus/dataset.hpp"
#include "hsd/textprep/clean_text.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hsd::corpus {

using ClassCounts = std::array<std::size_t, num_classes>;

inline ClassCounts class_distribution(const Dataset &ds) {
    ClassCounts counts{};
    for (const auto &r : ds.rows) {
        ++counts[static_cast<std::size_t>(r.label)];
    }
    return counts;
}

// Summary of one numeric column, pandas describe() conventions: sample
// standard deviation (n-1) and linearly interpolated quantiles.
struct ColumnStats {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double max = 0.0;
    bool degenerate = false;  // fewer than two values, std reported as 0
};

inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) {
        return 0.0;
    }
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline ColumnStats describe(std::vector<double> values) {
    ColumnStats s;
    s.count = values.size();
    if (values.empty()) {
        s.degenerate = true;
        return s;
    }
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (const double v : values) {
        sum += v;
    }
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (const double v : values) {
            ss += (v - s.mean) * (v - s.mean);
        }
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    } else {
        s.degenerate = true;
    }
    s.min = values.front();
    s.max = values.back();
    s.q25 = quantile_sorted(values, 0.25);
    s.median = quantile_sorted(values, 0.5);
    s.q75 = quantile_sorted(values, 0.75);
    return s;
}

inline const std::array<std::string_view, 7> numeric_columns = {col_id,      col_count, col_hate,       col_offensive,
                                                                col_neither, col_class, col_text_length};

inline std::vector<double> numeric_column(const Dataset &ds, std::string_view column) {
    std::vector<double> v;
    v.reserve(ds.rows.size());
    for (const auto &r : ds.rows) {
        double x = 0.0;
        if (column == col_id) {
            x = static_cast<double>(r.row_id);
        } else if (column == col_count) {
            x = r.count;
        } else if (column == col_hate) {
            x = r.hate_votes;
        } else if (column == col_offensive) {
            x = r.offensive_votes;
        } else if (column == col_neither) {
            x = r.neither_votes;
        } else if (column == col_class) {
            x = r.label;
        } else if (column == col_text_length) {
            x = r.text_length;
        } else {
            throw ConfigError("unknown numeric column " + std::string(column));
        }
        v.push_back(x);
    }
    return v;
}

// Column name -> statistics, columns in table order.
inline std::vector<std::pair<std::string, ColumnStats>> descriptive_stats(const Dataset &ds) {
    std::vector<std::pair<std::string, ColumnStats>> out;
    for (const auto col : numeric_columns) {
        out.emplace_back(std::string(col), describe(numeric_column(ds, col)));
    }
    return out;
}

inline std::vector<std::pair<std::string, std::size_t>> unique_counts(const Dataset &ds) {
    std::vector<std::pair<std::string, std::size_t>> out;
    for (const auto col : numeric_columns) {
        if (col == col_text_length) {
            continue;
        }
        const auto v = numeric_column(ds, col);
        out.emplace_back(std::string(col), std::unordered_set<double>(v.begin(), v.end()).size());
    }
    std::unordered_set<std::string> tweets;
    for (const auto &r : ds.rows) {
        tweets.insert(r.text);
    }
    out.emplace_back(std::string(col_tweet), tweets.size());
    const auto lengths = numeric_column(ds, col_text_length);
    out.emplace_back(std::string(col_text_length), std::unordered_set<double>(lengths.begin(), lengths.end()).size());
    return out;
}

using WordFrequencies = std::vector<std::pair<std::string, std::size_t>>;

// Word counts over cleaned texts; descending frequency, ties lexicographic.
inline WordFrequencies word_frequencies(std::span<const std::string> raw_texts, std::size_t top_k) {
    if (top_k == 0) {
        throw ConfigError("top_k must be >= 1");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto &raw : raw_texts) {
        const auto clean = textprep::clean_text(raw);
        std::string_view s = clean.str();
        while (!s.empty()) {
            const auto sp = s.find(' ');
            ++counts[std::string(s.substr(0, sp))];
            if (sp == std::string_view::npos) {
                break;
            }
            s.remove_prefix(sp + 1);
        }
    }
    WordFrequencies ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) { return a.second > b.second; });
    if (ranked.size() > top_k) {
        ranked.resize(top_k);
    }
    return ranked;
}

inline WordFrequencies word_frequencies(const Dataset &ds, std::size_t top_k) {
    std::vector<std::string> texts;
    texts.reserve(ds.rows.size());
    for (const auto &r : ds.rows) {
        texts.push_back(r.text);
    }
    return word_frequencies(texts, top_k);
}

// Stored text_length versus a whitespace word count of the raw tweet.
struct TextLengthCheck {
    double stored_mean = 0.0;
    double recomputed_mean = 0.0;
    std::size_t mismatches = 0;
    std::vector<std::pair<std::int64_t, std::pair<int, std::size_t>>> examples;  // row id -> (stored, recomputed)
};

inline TextLengthCheck text_length_check(const Dataset &ds, std::size_t max_examples = 20) {
    TextLengthCheck c;
    if (ds.empty()) {
        return c;
    }
    double stored = 0.0;
    double recomputed = 0.0;
    for (const auto &r : ds.rows) {
        const std::size_t wc = textprep::word_count(r.text);
        stored += r.text_length;
        recomputed += static_cast<double>(wc);
        if (static_cast<std::size_t>(r.text_length) != wc) {
            ++c.mismatches;
            if (c.examples.size() < max_examples) {
                c.examples.push_back({r.row_id, {r.text_length, wc}});
            }
        }
    }
    c.stored_mean = stored / static_cast<double>(ds.size());
    c.recomputed_mean = recomputed / static_cast<double>(ds.size());
    return c;
}

// How often the consensus label has the (possibly tied) maximum vote count.
struct LabelConsistency {
    std::size_t consistent = 0;
    std::size_t total = 0;
    std::vector<std::int64_t> violating_rows;

    [[nodiscard]] double fraction() const noexcept {
        return total == 0 ? 0.0 : static_cast<double>(consistent) / static_cast<double>(total);
    }
};

inline LabelConsistency label_consistency(const Dataset &ds) {
    LabelConsistency lc;
    for (const auto &r : ds.rows) {
        const int best = std::max({r.hate_votes, r.offensive_votes, r.neither_votes});
        ++lc.total;
        if (r.votes_for(r.label) == best) {
            ++lc.consistent;
        } else {
            lc.violating_rows.push_back(r.row_id);
        }
    }
    return lc;
}

inline nlohmann::json to_json(const ColumnStats &s) {
    return {{"count", s.count}, {"mean", s.mean},     {"std", s.std}, {"min", s.min},
            {"25%", s.q25},     {"50%", s.median},    {"75%", s.q75}, {"max", s.max},
            {"degenerate", s.degenerate}};
}

// Versioned exploratory-statistics report (schema "hsd.stats", version 1).
inline nlohmann::json stats_report(const Dataset &ds, std::size_t top_k = 20) {
    nlohmann::json j;
    j["schema"] = "hsd.stats";
    j["version"] = 1;
    j["source"] = ds.source;
    j["content_hash"] = ds.content_hash;
    j["rows"] = ds.size();
    j["text_length_recomputed"] = ds.text_length_recomputed;
    auto &q = j["quarantined"] = nlohmann::json::array();
    for (const auto &row : ds.quarantined) {
        q.push_back({{"line", row.line}, {"row_id", row.row_id}, {"reason", row.reason}});
    }
    const auto dist = class_distribution(ds);
    for (int c = 0; c < num_classes; ++c) {
        j["class_distribution"][std::to_string(c)] = dist[static_cast<std::size_t>(c)];
    }
    auto &schema = j["columns"] = nlohmann::json::array();
    for (const auto col : {col_id, col_count, col_hate, col_offensive, col_neither, col_class, col_tweet,
                           col_text_length}) {
        schema.push_back({{"column", col}, {"non_null", ds.size()}, {"dtype", col == col_tweet ? "object" : "int64"}});
    }
    for (const auto &[col, s] : descriptive_stats(ds)) {
        j["descriptive"][col] = to_json(s);
    }
    for (const auto &[col, n] : unique_counts(ds)) {
        j["unique"][col] = n;
    }
    const auto tl = text_length_check(ds);
    j["text_length_check"] = {{"stored_mean", tl.stored_mean},
                              {"recomputed_mean", tl.recomputed_mean},
                              {"mismatches", tl.mismatches}};
    for (const auto &[id, pair] : tl.examples) {
        j["text_length_check"]["examples"].push_back(
            {{"row_id", id}, {"stored", pair.first}, {"recomputed", pair.second}});
    }
    const auto lc = label_consistency(ds);
    j["label_consistency"] = {{"fraction", lc.fraction()},
                              {"consistent", lc.consistent},
                              {"violations", lc.violating_rows.size()},
                              {"violating_rows", lc.violating_rows}};
    auto &words = j["top_words"] = nlohmann::json::array();
    for (const auto &[w, n] : word_frequencies(ds, top_k)) {
        words.push_back({{"word", w}, {"count", n}});
    }
    return j;
}

}  // namespace hsd::corpus
