#include "hsd/corpus/csv.hpp"
#include "hsd/corpus/dataset.hpp"
#include "hsd/corpus/split.hpp"
#include "hsd/corpus/stats.hpp"
#include "test_support.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace hsd;
using namespace hsd::corpus;

namespace {

const std::string header = ",count,hate_speech,offensive_language,neither,class,tweet\n";

std::string make_csv(const std::vector<std::array<int, 3>> &votes_and_label) {
    std::string csv = header;
    for (std::size_t i = 0; i < votes_and_label.size(); ++i) {
        const auto [a, b, label] = votes_and_label[i];
        csv += std::to_string(i) + ",3," + std::to_string(a) + "," + std::to_string(b) + "," +
               std::to_string(3 - a - b) + "," + std::to_string(label) + ",tweet number " + std::to_string(i) + "\n";
    }
    return csv;
}

// Rows with the requested number of each class, interleaved in file order.
Dataset synthetic(const std::array<std::size_t, 3> &per_class) {
    std::string csv = header;
    std::size_t id = 0;
    std::array<std::size_t, 3> left = per_class;
    while (left[0] + left[1] + left[2] > 0) {
        for (int c = 0; c < 3; ++c) {
            if (left[c] == 0) {
                continue;
            }
            --left[c];
            std::array<int, 3> v{0, 0, 0};
            v[c] = 3;
            csv += std::to_string(id) + ",3," + std::to_string(v[0]) + "," + std::to_string(v[1]) + "," +
                   std::to_string(v[2]) + "," + std::to_string(c) + ",row " + std::to_string(id) + "\n";
            ++id;
        }
    }
    return parse_dataset(csv, "synthetic");
}

}  // namespace

TEST(Csv, QuotedFieldsAndEmbeddedNewlines) {
    const auto recs = parse_csv("a,b\r\n1,\"x, \"\"y\"\"\nz\"\n");
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[1].fields[1], "x, \"y\"\nz");
    EXPECT_EQ(recs[1].line, 2u);
    EXPECT_THROW(parse_csv("a\n\"open"), ParseError);
}

TEST(Dataset, VoteSumInvariant) {
    const auto ds = parse_dataset(header + "0,3,2,1,0,0,ok\n1,3,2,2,0,0,bad\n");
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.rows[0].row_id, 0);
    ASSERT_EQ(ds.quarantined.size(), 1u);
    EXPECT_EQ(ds.quarantined[0].row_id, 1);
    EXPECT_EQ(ds.quarantined[0].line, 3u);
    EXPECT_FALSE(ds.content_hash.empty());
}

TEST(Dataset, OtherInvariantsQuarantine) {
    const auto ds = parse_dataset(header + "0,3,3,0,0,0,a\n1,0,0,0,0,0,b\n2,3,-1,4,0,1,c\n3,3,0,3,0,5,d\n0,3,0,3,0,1,e\n");
    EXPECT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.quarantined.size(), 4u);
}

TEST(Dataset, MissingTweetColumnIsSchemaError) {
    try {
        parse_dataset(",count,hate_speech,offensive_language,neither,class\n0,3,0,3,0,1\n");
        FAIL();
    } catch (const SchemaError &e) {
        EXPECT_NE(std::string(e.what()).find("tweet"), std::string::npos);
        EXPECT_EQ(e.exit_code(), ExitCode::data);
    }
}

TEST(Dataset, NonIntegerClassNamesLine) {
    try {
        parse_dataset(header + "0,3,0,3,0,1,a\n1,3,0,3,0,one,b\n");
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(Dataset, TextLengthRecomputedWhenAbsent) {
    const auto ds = parse_dataset(header + "0,3,0,3,0,1,\"one  two\tthree\"\n");
    EXPECT_TRUE(ds.text_length_recomputed);
    EXPECT_EQ(ds.rows[0].text_length, 3);
    const auto with = parse_dataset(",count,hate_speech,offensive_language,neither,class,tweet,text_length\n"
                                    "0,3,0,3,0,1,a b,9\n");
    EXPECT_FALSE(with.text_length_recomputed);
    EXPECT_EQ(with.rows[0].text_length, 9);
    EXPECT_EQ(text_length_check(with).mismatches, 1u);
}

TEST(Dataset, AllRowsInvalidIsDataError) {
    EXPECT_THROW(parse_dataset(header + "0,3,2,2,0,0,bad\n"), DataError);
}

TEST(Stats, ClassDistribution) {
    const auto ds = parse_dataset(make_csv({{3, 0, 0}, {0, 3, 1}, {0, 0, 2}}));
    EXPECT_EQ(class_distribution(ds), (ClassCounts{1, 1, 1}));
    EXPECT_EQ(class_distribution(Dataset{}), (ClassCounts{0, 0, 0}));
}

TEST(Stats, SingleRowIsDegenerate) {
    const auto s = describe({5.0});
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.std, 0.0);
    EXPECT_EQ(s.median, 5.0);
}

TEST(Stats, WordFrequenciesTieBreak) {
    const std::vector<std::string> texts = {"a a b", "a c"};
    const auto top = word_frequencies(texts, 2);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0], (std::pair<std::string, std::size_t>{"a", 3}));
    EXPECT_EQ(top[1], (std::pair<std::string, std::size_t>{"b", 1}));
    EXPECT_EQ(word_frequencies(texts, 100).size(), 3u);
    EXPECT_THROW(word_frequencies(texts, 0), ConfigError);
}

TEST(Stats, LabelConsistencyReportsViolations) {
    const auto ds = parse_dataset(make_csv({{2, 1, 0}, {0, 1, 0}}));
    const auto lc = label_consistency(ds);
    EXPECT_EQ(lc.total, 2u);
    EXPECT_EQ(lc.consistent, 1u);
    EXPECT_EQ(lc.violating_rows, std::vector<std::int64_t>{1});
}

// Frozen pandas describe()/nunique and Counter outputs on random tables.
TEST(Stats, MatchesPandasReference) {
    const auto cases = nlohmann::json::parse(read_file(test::data_path("corpus_golden.json")));
    ASSERT_EQ(cases.size(), 40u);
    for (const auto &c : cases) {
        const auto ds = parse_dataset(c["csv"].get<std::string>());
        for (const auto &[col, s] : descriptive_stats(ds)) {
            const auto &ref = c["describe"][col];
            SCOPED_TRACE(col);
            EXPECT_EQ(s.count, ref["count"].get<std::size_t>());
            EXPECT_NEAR(s.mean, ref["mean"].get<double>(), 1e-9);
            EXPECT_NEAR(s.std, ref["std"].get<double>(), 1e-9);
            EXPECT_EQ(s.min, ref["min"].get<double>());
            EXPECT_NEAR(s.q25, ref["25%"].get<double>(), 1e-9);
            EXPECT_NEAR(s.median, ref["50%"].get<double>(), 1e-9);
            EXPECT_NEAR(s.q75, ref["75%"].get<double>(), 1e-9);
            EXPECT_EQ(s.max, ref["max"].get<double>());
        }
        for (const auto &[col, n] : unique_counts(ds)) {
            if (c["unique"].contains(col)) {
                EXPECT_EQ(n, c["unique"][col].get<std::size_t>()) << col;
            }
        }
        const auto top = word_frequencies(ds, 10);
        ASSERT_EQ(top.size(), c["top10"].size());
        for (std::size_t i = 0; i < top.size(); ++i) {
            EXPECT_EQ(top[i].first, c["top10"][i][0].get<std::string>());
            EXPECT_EQ(top[i].second, c["top10"][i][1].get<std::size_t>());
        }
        EXPECT_EQ(label_consistency(ds).fraction(), 1.0);
    }
}

// Brute-force quantiles: the order statistic at floor/ceil of q(n-1), mixed by hand.
TEST(Stats, QuantilesAgainstBruteForce) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(100);
        std::vector<double> v(n);
        for (auto &x : v) {
            x = static_cast<double>(rng.below(50));
        }
        const auto s = describe(v);
        std::multiset<double> ordered(v.begin(), v.end());
        const auto kth = [&](std::size_t k) { return *std::next(ordered.begin(), static_cast<std::ptrdiff_t>(k)); };
        for (const auto &[q, got] : {std::pair{0.25, s.q25}, {0.5, s.median}, {0.75, s.q75}}) {
            const double h = q * static_cast<double>(n - 1);
            const auto lo = static_cast<std::size_t>(h);
            const double expected = lo + 1 < n ? kth(lo) + (h - lo) * (kth(lo + 1) - kth(lo)) : kth(lo);
            EXPECT_NEAR(got, expected, 1e-12);
        }
        EXPECT_EQ(s.min, kth(0));
        EXPECT_EQ(s.max, kth(n - 1));
    }
}

TEST(Stats, ReportIsVersioned) {
    const auto ds = parse_dataset(make_csv({{3, 0, 0}, {0, 3, 1}, {0, 0, 2}}));
    const auto j = stats_report(ds);
    EXPECT_EQ(j["schema"], "hsd.stats");
    EXPECT_EQ(j["version"], 1);
    EXPECT_EQ(j["rows"], 3);
    EXPECT_EQ(j["class_distribution"]["1"], 1);
    EXPECT_TRUE(j["descriptive"].contains("text_length"));
}

TEST(Split, SpecValidation) {
    EXPECT_NO_THROW(SplitSpec{}.validate());
    EXPECT_THROW((SplitSpec{0.7, 0.2, 0.2}).validate(), ConfigError);
    EXPECT_THROW((SplitSpec{1.0, 0.0, 0.0}).validate(), ConfigError);
}

TEST(Split, GlobalSizesFloorThenDistribute) {
    EXPECT_EQ(detail::distribute(24783, {0.7, 0.15, 0.15}), (std::array<std::size_t, 3>{17348, 3717, 3718}));
    EXPECT_EQ(detail::distribute(100, {0.7, 0.15, 0.15}), (std::array<std::size_t, 3>{70, 15, 15}));
}

// Canonical class counts; stratified sizes equal the unstratified ones and
// each class is within one row of its exact quota in every split.
TEST(Split, CanonicalCountsAllocation) {
    const ClassCounts counts{1430, 19190, 4163};
    const auto sizes = detail::distribute(24783, {0.7, 0.15, 0.15});
    const auto alloc = detail::allocate(counts, sizes);
    for (std::size_t s = 0; s < 3; ++s) {
        EXPECT_EQ(alloc[0][s] + alloc[1][s] + alloc[2][s], sizes[s]);
    }
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(alloc[c][0] + alloc[c][1] + alloc[c][2], counts[c]);
        for (std::size_t s = 0; s < 3; ++s) {
            const double quota = static_cast<double>(counts[c]) * static_cast<double>(sizes[s]) / 24783.0;
            EXPECT_LT(std::abs(static_cast<double>(alloc[c][s]) - quota), 1.0);
        }
    }
}

TEST(Split, DeterministicAndPartition) {
    const auto ds = synthetic({40, 300, 90});
    for (const bool strat : {true, false}) {
        for (const std::uint64_t seed : {1u, 42u, 7u}) {
            SplitSpec spec{0.6, 0.25, 0.15, seed, strat};
            const auto a = split(ds, spec);
            const auto b = split(ds, spec);
            EXPECT_EQ(row_ids(a.train), row_ids(b.train));
            EXPECT_EQ(row_ids(a.test), row_ids(b.test));
            std::set<std::int64_t> all;
            for (const auto *part : {&a.train, &a.val, &a.test}) {
                for (const auto id : row_ids(*part)) {
                    EXPECT_TRUE(all.insert(id).second) << "duplicate " << id;
                }
                EXPECT_TRUE(std::is_sorted(part->rows.begin(), part->rows.end(),
                                           [](const auto &x, const auto &y) { return x.row_id < y.row_id; }));
            }
            EXPECT_EQ(all.size(), ds.size());
            EXPECT_EQ(a.train.size(), 258u);
        }
    }
    EXPECT_NE(row_ids(split(ds, SplitSpec{0.7, 0.15, 0.15, 1}).train),
              row_ids(split(ds, SplitSpec{0.7, 0.15, 0.15, 2}).train));
}

TEST(Split, BalancedFixtureStratified) {
    const auto ds = synthetic({34, 33, 33});
    const auto sp = split(ds, SplitSpec{});
    for (const auto *part : {&sp.train, &sp.val, &sp.test}) {
        const auto counts = class_distribution(*part);
        for (const auto n : counts) {
            EXPECT_LE(std::abs(static_cast<double>(n) - static_cast<double>(part->size()) / 3.0), 1.0);
        }
    }
    EXPECT_EQ(sp.train.size(), 70u);
}

TEST(Split, TooFewRowsInClass) {
    const auto ds = synthetic({2, 50, 50});
    EXPECT_THROW(split(ds, SplitSpec{}), DataError);
    EXPECT_NO_THROW(split(ds, SplitSpec{0.7, 0.15, 0.15, 42, false}));
}

TEST(Split, ManifestRoundTrip) {
    const auto ds = synthetic({10, 60, 30});
    const SplitSpec spec{0.7, 0.15, 0.15, 9, true};
    const auto sp = split(ds, spec);
    const auto m = nlohmann::json::parse(split_manifest(ds, spec, sp).dump());
    EXPECT_EQ(m["schema"], "hsd.split");
    const auto back = apply_manifest(ds, m);
    EXPECT_EQ(row_ids(back.val), row_ids(sp.val));
    EXPECT_EQ(spec_from_manifest(m).seed, 9u);
    auto other = ds;
    other.content_hash = "0000";
    EXPECT_THROW(apply_manifest(other, m), DataError);
}

TEST(ClassWeights, Values) {
    const auto w = class_weights(ClassCounts{1430, 19190, 4163});
    EXPECT_NEAR(w[0], 5.777, 1e-3);
    EXPECT_NEAR(w[1], 0.4305, 1e-3);
    EXPECT_NEAR(w[2], 1.9845, 1e-3);
    const auto balanced = class_weights(ClassCounts{7, 7, 7});
    for (const auto x : balanced) {
        EXPECT_DOUBLE_EQ(x, 1.0);
    }
    EXPECT_THROW(class_weights(ClassCounts{0, 3, 3}), DataError);
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const ClassCounts c{1 + rng.below(1000), 1 + rng.below(1000), 1 + rng.below(1000)};
        const auto cw = class_weights(c);
        const double n = static_cast<double>(c[0] + c[1] + c[2]);
        EXPECT_NEAR((c[0] * cw[0] + c[1] * cw[1] + c[2] * cw[2]) / n, 1.0, 1e-9);
    }
}
