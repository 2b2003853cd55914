#pragma once

#include "hsd/core/error.hpp"
#include "hsd/evaluation/metrics.hpp"

#include "json.hpp"

#include <fmt/format.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace hsd::evaluation {

inline constexpr int report_version = 1;

struct EvalReport {
    std::string name;  // model title, used as the comparison row label
    ConfusionMatrix confusion;
    PerClass per_class{};
    ClassMetrics macro;
    double accuracy = 0.0;
    double mean_loss = 0.0;  // unweighted mean cross-entropy
    std::array<std::size_t, num_classes> support{};
    std::optional<int> epochs;
};

inline EvalReport make_report(const ConfusionMatrix &m, double mean_loss, std::string name = {},
                              std::optional<int> epochs = std::nullopt) {
    EvalReport r;
    r.name = std::move(name);
    r.confusion = m;
    r.per_class = per_class_metrics(m);
    r.macro = macro_metrics(r.per_class);
    r.accuracy = accuracy(m);
    r.mean_loss = mean_loss;
    for (int c = 0; c < num_classes; ++c) {
        r.support[static_cast<std::size_t>(c)] = m.row_sum(c);
    }
    r.epochs = epochs;
    return r;
}

inline EvalReport make_report(std::span<const int> preds, std::span<const int> labels, double mean_loss,
                              std::string name = {}, std::optional<int> epochs = std::nullopt) {
    return make_report(confusion(preds, labels), mean_loss, std::move(name), epochs);
}

inline nlohmann::json to_json(const EvalReport &r) {
    nlohmann::json j = {{"schema", "hsd.eval"},
                        {"version", report_version},
                        {"name", r.name},
                        {"accuracy", r.accuracy},
                        {"mean_loss", r.mean_loss},
                        {"macro", to_json(r.macro)},
                        {"epochs", nullptr}};
    for (int c = 0; c < num_classes; ++c) {
        const auto k = static_cast<std::size_t>(c);
        auto entry = to_json(r.per_class[k]);
        entry["support"] = r.support[k];
        j["per_class"][std::string(label_names[k])] = entry;
        j["confusion"].push_back(r.confusion.counts[k]);
    }
    if (r.epochs) {
        j["epochs"] = *r.epochs;
    }
    return j;
}

// Metrics are recomputed from the stored confusion matrix; the stored values
// must agree with them.
inline EvalReport report_from_json(const nlohmann::json &j) {
    try {
        if (j.at("schema") != "hsd.eval") {
            throw SchemaError("not an evaluation report (schema " + j.at("schema").dump() + ")");
        }
        if (j.at("version").get<int>() != report_version) {
            throw SchemaError("unsupported evaluation report version " + j.at("version").dump());
        }
        ConfusionMatrix m;
        const auto &rows = j.at("confusion");
        if (!rows.is_array() || rows.size() != num_classes) {
            throw SchemaError("confusion must be a 3x3 array");
        }
        for (std::size_t t = 0; t < num_classes; ++t) {
            if (rows[t].size() != num_classes) {
                throw SchemaError("confusion must be a 3x3 array");
            }
            for (std::size_t p = 0; p < num_classes; ++p) {
                m.counts[t][p] = rows[t][p].get<std::size_t>();
            }
        }
        std::optional<int> epochs;
        if (j.contains("epochs") && !j["epochs"].is_null()) {
            epochs = j["epochs"].get<int>();
        }
        auto r = make_report(m, j.at("mean_loss").get<double>(), j.value("name", std::string{}), epochs);
        if (std::abs(r.accuracy - j.at("accuracy").get<double>()) > 1e-9) {
            throw SchemaError("stored accuracy disagrees with the confusion matrix");
        }
        return r;
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError(std::string("bad evaluation report: ") + e.what());
    }
}

// Half-up rounding to `decimals` places. The small nudge keeps values whose
// decimal form ends in 5 (0.745 is stored as 0.74499999...) rounding up.
inline double round_half_up(double x, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::floor(x * scale + 0.5 + 1e-9) / scale;
}

struct ComparisonRow {
    std::string model;
    std::string precision;
    std::string recall;
    std::string f1;
    std::string loss;
    std::string accuracy;
    std::string epochs;

    [[nodiscard]] std::array<std::string, 7> cells() const {
        return {model, precision, recall, f1, loss, accuracy, epochs};
    }
};

inline const std::array<std::string, 7> comparison_header = {
    "Model", "Precision (%)", "Recall (%)", "F1-Score (%)", "Loss", "Accuracy (%)", "Epochs"};

// Rows in the given order. Macro metrics as whole percents, loss to three
// decimals, accuracy as a percent to one decimal; rounding happens here only.
inline std::vector<ComparisonRow> compare_report(std::span<const EvalReport> reports) {
    if (reports.empty()) {
        throw ConfigError("compare_report needs at least one report");
    }
    std::vector<ComparisonRow> rows;
    for (const auto &r : reports) {
        rows.push_back({r.name,
                        fmt::format("{:.0f}", round_half_up(100.0 * r.macro.precision, 0)),
                        fmt::format("{:.0f}", round_half_up(100.0 * r.macro.recall, 0)),
                        fmt::format("{:.0f}", round_half_up(100.0 * r.macro.f1, 0)),
                        fmt::format("{:.3f}", round_half_up(r.mean_loss, 3)),
                        fmt::format("{:.1f}", round_half_up(100.0 * r.accuracy, 1)),
                        r.epochs ? std::to_string(*r.epochs) : std::string("-")});
    }
    return rows;
}

inline std::string render_text(std::span<const ComparisonRow> rows) {
    std::array<std::size_t, 7> width{};
    for (std::size_t c = 0; c < 7; ++c) {
        width[c] = comparison_header[c].size();
    }
    for (const auto &r : rows) {
        const auto cells = r.cells();
        for (std::size_t c = 0; c < 7; ++c) {
            width[c] = std::max(width[c], cells[c].size());
        }
    }
    std::string out;
    const auto line = [&](const std::array<std::string, 7> &cells) {
        for (std::size_t c = 0; c < 7; ++c) {
            if (c == 0) {
                out += fmt::format("{:<{}}", cells[c], width[c]);
            } else {
                out += fmt::format("  {:>{}}", cells[c], width[c]);
            }
        }
        out += '\n';
    };
    line(comparison_header);
    std::size_t total = 0;
    for (const auto w : width) {
        total += w;
    }
    out += std::string(total + 2 * 6, '-') + '\n';
    for (const auto &r : rows) {
        line(r.cells());
    }
    return out;
}

inline std::string render_delimited(std::span<const ComparisonRow> rows, char delim = ',') {
    const auto quote = [delim](const std::string &s) {
        if (s.find_first_of(std::string{delim, '"', '\n'}) == std::string::npos) {
            return s;
        }
        std::string q = "\"";
        for (const char ch : s) {
            q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        }
        return q + "\"";
    };
    std::string out;
    const auto line = [&](const std::array<std::string, 7> &cells) {
        for (std::size_t c = 0; c < 7; ++c) {
            out += (c ? std::string(1, delim) : std::string()) + quote(cells[c]);
        }
        out += '\n';
    };
    line(comparison_header);
    for (const auto &r : rows) {
        line(r.cells());
    }
    return out;
}

inline nlohmann::json comparison_json(std::span<const ComparisonRow> rows) {
    nlohmann::json j = {{"schema", "hsd.comparison"}, {"version", 1}, {"columns", comparison_header}};
    j["rows"] = nlohmann::json::array();
    for (const auto &r : rows) {
        j["rows"].push_back(r.cells());
    }
    return j;
}

inline std::string render_confusion(const ConfusionMatrix &m) {
    std::string out = fmt::format("{:<20}{:>12}{:>12}{:>12}\n", "true \\ predicted", "hate", "offensive", "neither");
    for (int t = 0; t < num_classes; ++t) {
        out += fmt::format("{:<20}{:>12}{:>12}{:>12}\n", label_titles[static_cast<std::size_t>(t)], m.at(t, 0),
                           m.at(t, 1), m.at(t, 2));
    }
    return out;
}

// Per-class block in the layout of the per-model classification tables.
inline std::string render_classification(const EvalReport &r) {
    std::string out = fmt::format("{:<20}{:>10}{:>10}{:>10}{:>10}\n", "Category", "Precision", "Recall", "F1-Score",
                                  "Support");
    for (std::size_t c = 0; c < num_classes; ++c) {
        const auto &k = r.per_class[c];
        out += fmt::format("{:<20}{:>10.2f}{:>10.2f}{:>10.2f}{:>10}\n", label_titles[c], round_half_up(k.precision, 2),
                           round_half_up(k.recall, 2), round_half_up(k.f1, 2), r.support[c]);
    }
    out += fmt::format("{:<20}{:>10.3f}\n", "Accuracy", round_half_up(r.accuracy, 3));
    out += fmt::format("{:<20}{:>10.3f}\n", "Loss", round_half_up(r.mean_loss, 3));
    return out;
}

}  // namespace hsd::evaluation
