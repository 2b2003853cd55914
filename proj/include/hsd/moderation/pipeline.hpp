#pragma once

#include "hsd/core/labels.hpp"
#include "hsd/models/model.hpp"
#include "hsd/moderation/rewriter.hpp"
#include "hsd/textprep/clean_text.hpp"

#include "json.hpp"

#include <chrono>
#include <optional>
#include <string>

namespace hsd::moderation {

struct Classification {
    int label = 0;
    std::array<double, num_classes> probabilities{};
    std::string cleaned;
};

// raw -> clean_text -> tokenizer -> forward -> softmax -> argmax (ties to the lower id)
template <typename S>
Classification classify(std::string_view raw, const models::Model<S> &model) {
    const auto pred = model.predict(model.encode(raw));
    return {pred.label, pred.probabilities, textprep::clean_text(raw).str()};
}

enum class Action { pass, rewrite, blocked };

inline std::string_view action_name(Action a) {
    switch (a) {
        case Action::pass: return "pass";
        case Action::rewrite: return "rewrite";
        case Action::blocked: return "blocked";
    }
    return "?";
}

struct ModerationResult {
    std::string original;
    std::string cleaned;
    int label = 0;
    std::array<double, num_classes> probabilities{};
    Action action = Action::pass;
    std::optional<std::string> rewritten;
    std::string backend;
    double latency_ms = 0.0;
    bool flagged_unrewritten = false;  // harmful, but the backend produced no rewrite
    std::optional<std::string> error;
    std::optional<std::string> warning;

    // text to show downstream; blocked results have none
    [[nodiscard]] std::optional<std::string> output() const {
        if (action == Action::blocked) {
            return std::nullopt;
        }
        return rewritten ? *rewritten : original;
    }
};

// Neutral text passes untouched. Hate or offensive text goes to the rewriter
// with its original raw form. If the backend fails, fail-closed blocks the
// text; fail-open passes it through with a warning. Either way the result is
// flagged as harmful and unrewritten. The rewrite is not re-classified.
template <typename S>
ModerationResult moderate(std::string_view raw, const models::Model<S> &model, Rewriter &rewriter,
                          FailureMode on_failure = FailureMode::closed) {
    const auto t0 = std::chrono::steady_clock::now();
    ModerationResult r;
    r.original = std::string(raw);
    const auto c = classify(raw, model);
    r.cleaned = c.cleaned;
    r.label = c.label;
    r.probabilities = c.probabilities;
    r.backend = rewriter.id();
    if (c.label == static_cast<int>(Label::neither)) {
        r.action = Action::pass;
    } else {
        try {
            r.rewritten = rewriter.rewrite(r.original);
            r.action = Action::rewrite;
        } catch (const BackendError &e) {
            r.flagged_unrewritten = true;
            if (on_failure == FailureMode::closed) {
                r.action = Action::blocked;
                r.error = e.what();
            } else {
                r.action = Action::pass;
                r.warning = std::string("passed through unrewritten: ") + e.what();
            }
        }
    }
    r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline nlohmann::json to_json(const ModerationResult &r, bool with_latency = true) {
    nlohmann::json j = {{"schema", "hsd.moderation"},
                        {"version", 1},
                        {"original", r.original},
                        {"cleaned", r.cleaned},
                        {"label", r.label},
                        {"label_name", label_name(r.label)},
                        {"probabilities", r.probabilities},
                        {"action", action_name(r.action)},
                        {"backend", r.backend},
                        {"flagged_unrewritten", r.flagged_unrewritten}};
    if (r.rewritten) {
        j["rewritten"] = *r.rewritten;
    }
    if (r.error) {
        j["error"] = *r.error;
    }
    if (r.warning) {
        j["warning"] = *r.warning;
    }
    if (with_latency) {
        j["latency_ms"] = r.latency_ms;
    }
    return j;
}

inline nlohmann::json to_json(const Classification &c) {
    return {{"label", c.label},
            {"label_name", label_name(c.label)},
            {"probabilities", c.probabilities},
            {"cleaned", c.cleaned}};
}

}  // namespace hsd::moderation
