#pragma once

#include "hsd/core/error.hpp"
#include "hsd/models/spec.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hsd::training {

struct TrainConfig {
    int epochs = 3;
    int batch_size = 32;
    std::optional<double> learning_rate;  // unset: 2e-5 for encoder kinds, 1e-3 otherwise
    double weight_decay = 0.01;
    std::optional<double> grad_clip_norm = 1.0;
    bool use_class_weights = false;
    std::uint64_t seed = 42;
    std::string optimizer = "adamw";
    bool freeze_encoder = false;
    int vocab_max_size = 20000;  // baselines without a tokenizer build a vocabulary this large

    [[nodiscard]] double effective_lr(models::Kind kind) const {
        return learning_rate.value_or(models::uses_encoder(kind) ? 2e-5 : 1e-3);
    }

    void validate() const {
        if (epochs < 1) {
            throw ConfigError("epochs must be >= 1");
        }
        if (batch_size < 1) {
            throw ConfigError("batch_size must be >= 1");
        }
        if (learning_rate && !(*learning_rate > 0.0)) {
            throw ConfigError("learning_rate must be > 0");
        }
        if (weight_decay < 0.0) {
            throw ConfigError("weight_decay must be >= 0");
        }
        if (grad_clip_norm && !(*grad_clip_norm > 0.0)) {
            throw ConfigError("grad_clip_norm must be > 0 when set");
        }
        if (optimizer != "adamw") {
            throw ConfigError("unsupported optimizer '" + optimizer + "' (only adamw)");
        }
        if (vocab_max_size < 57) {
            throw ConfigError("vocab_max_size must be >= 57");
        }
    }

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j = {{"epochs", epochs},
                            {"batch_size", batch_size},
                            {"learning_rate", nullptr},
                            {"weight_decay", weight_decay},
                            {"grad_clip_norm", nullptr},
                            {"use_class_weights", use_class_weights},
                            {"seed", seed},
                            {"optimizer", optimizer},
                            {"freeze_encoder", freeze_encoder},
                            {"vocab_max_size", vocab_max_size}};
        if (learning_rate) {
            j["learning_rate"] = *learning_rate;
        }
        if (grad_clip_norm) {
            j["grad_clip_norm"] = *grad_clip_norm;
        }
        return j;
    }

    static TrainConfig from_json(const nlohmann::json &j) {
        TrainConfig c;
        static const std::vector<std::string> known = {"epochs",         "batch_size",      "learning_rate",
                                                       "weight_decay",   "grad_clip_norm",  "use_class_weights",
                                                       "seed",           "optimizer",       "freeze_encoder",
                                                       "vocab_max_size"};
        try {
            for (const auto &[key, _] : j.items()) {
                if (std::find(known.begin(), known.end(), key) == known.end()) {
                    throw ConfigError("unknown training config field '" + key + "'");
                }
            }
            c.epochs = j.value("epochs", c.epochs);
            c.batch_size = j.value("batch_size", c.batch_size);
            if (j.contains("learning_rate")) {
                c.learning_rate = j["learning_rate"].is_null() ? std::nullopt
                                                               : std::optional(j["learning_rate"].get<double>());
            }
            c.weight_decay = j.value("weight_decay", c.weight_decay);
            if (j.contains("grad_clip_norm")) {
                c.grad_clip_norm = j["grad_clip_norm"].is_null() ? std::nullopt
                                                                 : std::optional(j["grad_clip_norm"].get<double>());
            }
            c.use_class_weights = j.value("use_class_weights", c.use_class_weights);
            c.seed = j.value("seed", c.seed);
            c.optimizer = j.value("optimizer", c.optimizer);
            c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
            c.vocab_max_size = j.value("vocab_max_size", c.vocab_max_size);
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError(std::string("bad training config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

// The checkpoint kept is the one with the lowest epoch-end validation loss.
struct CheckpointPolicy {
    std::string path;  // empty: keep the best weights in memory only
    std::string metric = "val_loss";
    std::string mode = "min";
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;

    bool operator==(const EpochRecord &) const = default;
};

struct LearningCurves {
    std::vector<EpochRecord> epochs;

    [[nodiscard]] std::size_t size() const noexcept { return epochs.size(); }
    bool operator==(const LearningCurves &) const = default;

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j = {{"schema", "hsd.curves"}, {"version", 1}};
        for (const char *key : {"epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"}) {
            j["series"][key] = nlohmann::json::array();
        }
        for (const auto &e : epochs) {
            j["series"]["epoch"].push_back(e.epoch);
            j["series"]["train_loss"].push_back(e.train_loss);
            j["series"]["train_accuracy"].push_back(e.train_accuracy);
            j["series"]["val_loss"].push_back(e.val_loss);
            j["series"]["val_accuracy"].push_back(e.val_accuracy);
        }
        return j;
    }

    // plot-ready: one row per epoch
    [[nodiscard]] std::string to_csv() const {
        std::string out = "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
        char buf[160];
        for (const auto &e : epochs) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.train_accuracy,
                          e.val_loss, e.val_accuracy);
            out += buf;
        }
        return out;
    }
};

}  // namespace hsd::training
