#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/labels.hpp"
#include "hsd/core/rng.hpp"
#include "hsd/corpus/dataset.hpp"
#include "hsd/corpus/stats.hpp"

#include "json.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace hsd::corpus {

inline constexpr std::size_t num_splits = 3;

struct SplitSpec {
    double train_fraction = 0.70;
    double val_fraction = 0.15;
    double test_fraction = 0.15;
    std::uint64_t seed = 42;
    bool stratified = true;

    [[nodiscard]] std::array<double, num_splits> fractions() const {
        return {train_fraction, val_fraction, test_fraction};
    }

    void validate() const {
        double sum = 0.0;
        for (const double f : fractions()) {
            if (!(f > 0.0 && f < 1.0)) {
                throw ConfigError("split fractions must lie in (0,1), got " + std::to_string(f));
            }
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw ConfigError("split fractions must sum to 1, got " + std::to_string(sum));
        }
    }
};

struct Splits {
    Dataset train;
    Dataset val;
    Dataset test;
};

namespace detail {

// Floor every quota, then hand the leftover units to the largest fractional
// parts; equal fractions favour the later split.
inline std::array<std::size_t, num_splits> distribute(std::size_t n, const std::array<double, num_splits> &fractions) {
    std::array<std::size_t, num_splits> out{};
    std::array<double, num_splits> frac{};
    std::size_t used = 0;
    for (std::size_t s = 0; s < num_splits; ++s) {
        const double q = static_cast<double>(n) * fractions[s];
        out[s] = static_cast<std::size_t>(std::floor(q));
        frac[s] = q - std::floor(q);
        used += out[s];
    }
    for (std::size_t left = n - used; left > 0; --left) {
        std::size_t best = 0;
        for (std::size_t s = 1; s < num_splits; ++s) {
            if (frac[s] >= frac[best]) {
                best = s;
            }
        }
        ++out[best];
        frac[best] = -1.0;
    }
    return out;
}

// Per-class allocation whose column sums hit the global split sizes. Quotas
// are n_c * size_s / N, floored; each class's leftover units go to distinct
// splits, largest fractional part first, then largest remaining deficit, then
// later index. If no split with a deficit is available the unit still goes
// somewhere so the class is fully assigned.
inline std::vector<std::array<std::size_t, num_splits>> allocate(const ClassCounts &counts,
                                                                 const std::array<std::size_t, num_splits> &sizes) {
    std::size_t total = 0;
    for (const auto n : counts) {
        total += n;
    }
    std::vector<std::array<std::size_t, num_splits>> alloc(counts.size());
    std::vector<std::array<double, num_splits>> frac(counts.size());
    std::array<std::int64_t, num_splits> deficit{};
    for (std::size_t s = 0; s < num_splits; ++s) {
        deficit[s] = static_cast<std::int64_t>(sizes[s]);
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
        for (std::size_t s = 0; s < num_splits; ++s) {
            const double q = static_cast<double>(counts[c]) * static_cast<double>(sizes[s]) / static_cast<double>(total);
            alloc[c][s] = static_cast<std::size_t>(std::floor(q));
            frac[c][s] = q - std::floor(q);
            deficit[s] -= static_cast<std::int64_t>(alloc[c][s]);
        }
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
        std::size_t assigned = 0;
        for (const auto a : alloc[c]) {
            assigned += a;
        }
        std::array<bool, num_splits> taken{};
        for (std::size_t left = counts[c] - assigned; left > 0; --left) {
            const auto pick = [&](bool need_deficit) -> std::ptrdiff_t {
                std::ptrdiff_t best = -1;
                for (std::size_t s = 0; s < num_splits; ++s) {
                    if (taken[s] || (need_deficit && deficit[s] <= 0)) {
                        continue;
                    }
                    if (best < 0) {
                        best = static_cast<std::ptrdiff_t>(s);
                        continue;
                    }
                    const auto b = static_cast<std::size_t>(best);
                    if (frac[c][s] > frac[c][b] || (frac[c][s] == frac[c][b] && deficit[s] >= deficit[b])) {
                        best = static_cast<std::ptrdiff_t>(s);
                    }
                }
                return best;
            };
            std::ptrdiff_t s = pick(true);
            if (s < 0) {
                s = pick(false);
            }
            if (s < 0) {
                // every split already took one extra unit; fall back to the largest deficit
                s = 0;
                for (std::size_t t = 1; t < num_splits; ++t) {
                    if (deficit[t] >= deficit[static_cast<std::size_t>(s)]) {
                        s = static_cast<std::ptrdiff_t>(t);
                    }
                }
            }
            const auto su = static_cast<std::size_t>(s);
            ++alloc[c][su];
            --deficit[su];
            taken[su] = true;
        }
    }
    return alloc;
}

inline Dataset take(const Dataset &ds, std::vector<std::size_t> idx) {
    std::sort(idx.begin(), idx.end());
    Dataset out;
    out.source = ds.source;
    out.content_hash = ds.content_hash;
    out.text_length_recomputed = ds.text_length_recomputed;
    out.rows.reserve(idx.size());
    for (const auto i : idx) {
        out.rows.push_back(ds.rows[i]);
    }
    return out;
}

}  // namespace detail

// Seeded split into train/val/test. Under stratification each class's rows
// are shuffled on their own (classes in label order, one generator) and cut
// by the per-class allocation; every split keeps the dataset's row order.
inline Splits split(const Dataset &ds, const SplitSpec &spec) {
    spec.validate();
    if (ds.size() < num_splits) {
        throw DataError("dataset with " + std::to_string(ds.size()) + " rows cannot be split three ways");
    }
    const auto sizes = detail::distribute(ds.size(), spec.fractions());
    Rng rng(spec.seed);
    std::array<std::vector<std::size_t>, num_splits> parts;

    if (spec.stratified) {
        const ClassCounts counts = class_distribution(ds);
        for (int c = 0; c < num_classes; ++c) {
            if (counts[static_cast<std::size_t>(c)] < num_splits) {
                throw DataError("class " + std::string(label_name(c)) + " has " +
                                std::to_string(counts[static_cast<std::size_t>(c)]) +
                                " rows, fewer than the 3 splits required for stratification");
            }
        }
        const auto alloc = detail::allocate(counts, sizes);
        for (int c = 0; c < num_classes; ++c) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < ds.rows.size(); ++i) {
                if (ds.rows[i].label == c) {
                    members.push_back(i);
                }
            }
            rng.shuffle(std::span<std::size_t>(members));
            std::size_t at = 0;
            for (std::size_t s = 0; s < num_splits; ++s) {
                const std::size_t k = alloc[static_cast<std::size_t>(c)][s];
                parts[s].insert(parts[s].end(), members.begin() + static_cast<std::ptrdiff_t>(at),
                                members.begin() + static_cast<std::ptrdiff_t>(at + k));
                at += k;
            }
        }
    } else {
        std::vector<std::size_t> order(ds.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        rng.shuffle(std::span<std::size_t>(order));
        std::size_t at = 0;
        for (std::size_t s = 0; s < num_splits; ++s) {
            parts[s].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                            order.begin() + static_cast<std::ptrdiff_t>(at + sizes[s]));
            at += sizes[s];
        }
    }
    return {detail::take(ds, std::move(parts[0])), detail::take(ds, std::move(parts[1])),
            detail::take(ds, std::move(parts[2]))};
}

inline const std::array<std::string_view, num_splits> split_names = {"train", "val", "test"};

// Manifest (schema "hsd.split", version 1): the split settings, the source hash and the
// row ids of each split. Applying it to the same file reproduces the split
// without re-running the shuffle.
inline nlohmann::json split_manifest(const Dataset &ds, const SplitSpec &spec, const Splits &splits) {
    nlohmann::json j;
    j["schema"] = "hsd.split";
    j["version"] = 1;
    j["source"] = ds.source;
    j["dataset_hash"] = ds.content_hash;
    j["spec"] = {{"train_fraction", spec.train_fraction},
                 {"val_fraction", spec.val_fraction},
                 {"test_fraction", spec.test_fraction},
                 {"seed", spec.seed},
                 {"stratified", spec.stratified}};
    j["train"] = row_ids(splits.train);
    j["val"] = row_ids(splits.val);
    j["test"] = row_ids(splits.test);
    return j;
}

inline SplitSpec spec_from_manifest(const nlohmann::json &m) {
    SplitSpec spec;
    const auto &s = m.at("spec");
    spec.train_fraction = s.at("train_fraction").get<double>();
    spec.val_fraction = s.at("val_fraction").get<double>();
    spec.test_fraction = s.at("test_fraction").get<double>();
    spec.seed = s.at("seed").get<std::uint64_t>();
    spec.stratified = s.at("stratified").get<bool>();
    return spec;
}

inline Splits apply_manifest(const Dataset &ds, const nlohmann::json &m) {
    try {
        if (m.at("schema") != "hsd.split" || m.at("version") != 1) {
            throw ConfigError("not an hsd.split v1 manifest");
        }
        if (m.at("dataset_hash").get<std::string>() != ds.content_hash) {
            throw DataError("split manifest was made for a different dataset (hash " +
                            m.at("dataset_hash").get<std::string>() + ", loaded " + ds.content_hash + ")");
        }
        const auto ids = [&](const char *key) { return m.at(key).get<std::vector<std::int64_t>>(); };
        return {select_rows(ds, ids("train")), select_rows(ds, ids("val")), select_rows(ds, ids("test"))};
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed split manifest: ") + e.what());
    }
}

// weight_c = N / (3 n_c); the count-weighted mean weight is 1.
inline std::array<double, num_classes> class_weights(const ClassCounts &counts) {
    std::size_t total = 0;
    for (const auto n : counts) {
        total += n;
    }
    std::array<double, num_classes> w{};
    for (int c = 0; c < num_classes; ++c) {
        const auto n = counts[static_cast<std::size_t>(c)];
        if (n == 0) {
            throw DataError("class " + std::string(label_name(c)) + " is absent from the training set");
        }
        w[static_cast<std::size_t>(c)] = static_cast<double>(total) / (num_classes * static_cast<double>(n));
    }
    return w;
}

inline std::array<double, num_classes> class_weights(const Dataset &train) {
    return class_weights(class_distribution(train));
}

}  // namespace hsd::corpus
