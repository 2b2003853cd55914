#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/labels.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hsd::models {

enum class Kind { cnn, lstm, bilstm, encoder, encoder_cnn, encoder_bilstm };

inline constexpr std::array<std::pair<Kind, std::string_view>, 6> kind_names = {{{Kind::cnn, "cnn"},
                                                                                  {Kind::lstm, "lstm"},
                                                                                  {Kind::bilstm, "bilstm"},
                                                                                  {Kind::encoder, "encoder"},
                                                                                  {Kind::encoder_cnn, "encoder_cnn"},
                                                                                  {Kind::encoder_bilstm, "encoder_bilstm"}}};

inline std::string_view kind_name(Kind k) {
    for (const auto &[kind, name] : kind_names) {
        if (kind == k) {
            return name;
        }
    }
    return "?";
}

inline Kind parse_kind(std::string_view s) {
    for (const auto &[kind, name] : kind_names) {
        if (name == s) {
            return kind;
        }
    }
    throw SpecError("unknown model kind '" + std::string(s) + "'");
}

inline bool uses_encoder(Kind k) { return k == Kind::encoder || k == Kind::encoder_cnn || k == Kind::encoder_bilstm; }

// Architecture description. Serialised as JSON; every field has a default so
// a config only needs the ones it changes.
struct ModelSpec {
    Kind kind = Kind::cnn;
    std::string encoder_name;  // directory, or a name under $HSD_ENCODER_HOME
    std::string tokenizer;     // baselines: vocab.txt path or encoder name; empty = build from training data
    int vocab_size = 0;        // baselines; 0 = take from the tokenizer
    int embed_dim = 128;
    int conv_filters = 100;
    std::vector<int> kernel_sizes = {3, 4, 5};
    int lstm_hidden = 128;
    int lstm_layers = 1;
    double dropout = 0.1;
    int num_classes = hsd::num_classes;
    int max_len = 64;

    void validate() const {
        if (num_classes != hsd::num_classes) {
            throw SpecError("num_classes must be 3, got " + std::to_string(num_classes));
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) {
            throw SpecError("dropout must lie in [0,1), got " + std::to_string(dropout));
        }
        if (max_len < 2) {
            throw SpecError("max_len must be >= 2 to hold the boundary tokens");
        }
        if (uses_encoder(kind) != !encoder_name.empty()) {
            throw SpecError(uses_encoder(kind) ? "kind " + std::string(kind_name(kind)) + " needs encoder_name"
                                               : "encoder_name is only valid for encoder kinds");
        }
        if (kind == Kind::cnn || kind == Kind::encoder_cnn) {
            if (kernel_sizes.empty() || conv_filters < 1) {
                throw SpecError("convolutional kinds need kernel_sizes and conv_filters >= 1");
            }
            for (const int k : kernel_sizes) {
                if (k < 1 || k > max_len) {
                    throw SpecError("kernel size " + std::to_string(k) + " outside [1, max_len=" +
                                    std::to_string(max_len) + "]");
                }
            }
        }
        if (kind == Kind::lstm || kind == Kind::bilstm || kind == Kind::encoder_bilstm) {
            if (lstm_hidden < 1 || lstm_layers < 1) {
                throw SpecError("lstm_hidden and lstm_layers must be >= 1");
            }
        }
        if (!uses_encoder(kind) && embed_dim < 1) {
            throw SpecError("embed_dim must be >= 1");
        }
        if (vocab_size < 0) {
            throw SpecError("vocab_size must be >= 0");
        }
    }

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j = {{"kind", kind_name(kind)},
                            {"encoder_name", encoder_name},
                            {"tokenizer", tokenizer},
                            {"vocab_size", vocab_size},
                            {"embed_dim", embed_dim},
                            {"conv_filters", conv_filters},
                            {"kernel_sizes", kernel_sizes},
                            {"lstm_hidden", lstm_hidden},
                            {"lstm_layers", lstm_layers},
                            {"dropout", dropout},
                            {"num_classes", num_classes},
                            {"max_len", max_len}};
        return j;
    }

    static ModelSpec from_json(const nlohmann::json &j) {
        ModelSpec s;
        try {
            for (const auto &[key, _] : j.items()) {
                static const std::vector<std::string> known = {
                    "kind",        "encoder_name", "tokenizer",   "vocab_size", "embed_dim",   "conv_filters",
                    "kernel_sizes", "lstm_hidden", "lstm_layers", "dropout",    "num_classes", "max_len"};
                if (std::find(known.begin(), known.end(), key) == known.end()) {
                    throw ConfigError("unknown model spec field '" + key + "'");
                }
            }
            s.kind = parse_kind(j.at("kind").get<std::string>());
            s.encoder_name = j.value("encoder_name", s.encoder_name);
            s.tokenizer = j.value("tokenizer", s.tokenizer);
            s.vocab_size = j.value("vocab_size", s.vocab_size);
            s.embed_dim = j.value("embed_dim", s.embed_dim);
            s.conv_filters = j.value("conv_filters", s.conv_filters);
            s.kernel_sizes = j.value("kernel_sizes", s.kernel_sizes);
            s.lstm_hidden = j.value("lstm_hidden", s.lstm_hidden);
            s.lstm_layers = j.value("lstm_layers", s.lstm_layers);
            s.dropout = j.value("dropout", s.dropout);
            s.num_classes = j.value("num_classes", s.num_classes);
            s.max_len = j.value("max_len", s.max_len);
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError(std::string("bad model spec: ") + e.what());
        }
        s.validate();
        return s;
    }
};

}  // namespace hsd::models
