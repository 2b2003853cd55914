#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/labels.hpp"

#include "json.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>

namespace hsd::evaluation {

// rows = true class, columns = predicted class
struct ConfusionMatrix {
    std::array<std::array<std::size_t, num_classes>, num_classes> counts{};

    [[nodiscard]] std::size_t total() const noexcept {
        std::size_t n = 0;
        for (const auto &row : counts) {
            for (const auto v : row) {
                n += v;
            }
        }
        return n;
    }
    [[nodiscard]] std::size_t row_sum(int t) const noexcept {
        std::size_t n = 0;
        for (const auto v : counts[static_cast<std::size_t>(t)]) {
            n += v;
        }
        return n;
    }
    [[nodiscard]] std::size_t col_sum(int p) const noexcept {
        std::size_t n = 0;
        for (const auto &row : counts) {
            n += row[static_cast<std::size_t>(p)];
        }
        return n;
    }
    [[nodiscard]] std::size_t trace() const noexcept {
        return counts[0][0] + counts[1][1] + counts[2][2];
    }
    [[nodiscard]] std::size_t at(int t, int p) const { return counts.at(static_cast<std::size_t>(t)).at(static_cast<std::size_t>(p)); }

    bool operator==(const ConfusionMatrix &) const = default;
};

inline ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels) {
    if (preds.size() != labels.size()) {
        throw DataError("confusion: " + std::to_string(preds.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
    }
    if (preds.empty()) {
        throw DataError("confusion: no examples");
    }
    ConfusionMatrix m;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!is_valid_class(preds[i]) || !is_valid_class(labels[i])) {
            throw DataError("confusion: class id outside {0,1,2} at index " + std::to_string(i));
        }
        ++m.counts[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
    }
    return m;
}

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const ClassMetrics &) const = default;
};

using PerClass = std::array<ClassMetrics, num_classes>;

namespace detail {
// 0/0 counts as 0: a class never predicted (or never present) scores zero
inline double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
inline double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }
}  // namespace detail

inline PerClass per_class_metrics(const ConfusionMatrix &m) {
    PerClass out;
    for (int c = 0; c < num_classes; ++c) {
        auto &k = out[static_cast<std::size_t>(c)];
        const std::size_t tp = m.at(c, c);
        k.precision = detail::ratio(tp, m.col_sum(c));
        k.recall = detail::ratio(tp, m.row_sum(c));
        k.f1 = detail::harmonic(k.precision, k.recall);
    }
    return out;
}

// unweighted mean over the classes
inline ClassMetrics macro_metrics(const PerClass &pc) {
    ClassMetrics m;
    for (const auto &k : pc) {
        m.precision += k.precision;
        m.recall += k.recall;
        m.f1 += k.f1;
    }
    m.precision /= num_classes;
    m.recall /= num_classes;
    m.f1 /= num_classes;
    return m;
}

// support-weighted mean; available, not the table default
inline ClassMetrics weighted_metrics(const PerClass &pc, const std::array<std::size_t, num_classes> &support) {
    std::size_t n = 0;
    for (const auto s : support) {
        n += s;
    }
    ClassMetrics m;
    if (n == 0) {
        return m;
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        const double w = static_cast<double>(support[c]) / static_cast<double>(n);
        m.precision += w * pc[c].precision;
        m.recall += w * pc[c].recall;
        m.f1 += w * pc[c].f1;
    }
    return m;
}

inline double accuracy(const ConfusionMatrix &m) { return detail::ratio(m.trace(), m.total()); }

inline nlohmann::json to_json(const ClassMetrics &k) {
    return {{"precision", k.precision}, {"recall", k.recall}, {"f1", k.f1}};
}

inline ClassMetrics class_metrics_from_json(const nlohmann::json &j) {
    return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

}  // namespace hsd::evaluation
