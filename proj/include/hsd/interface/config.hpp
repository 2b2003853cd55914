#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/io.hpp"
#include "hsd/models/spec.hpp"
#include "hsd/moderation/rewriter.hpp"
#include "hsd/training/config.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace hsd::interface {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string checkpoint;
    std::size_t max_body_bytes = 64 * 1024;
    int max_inflight = 4;  // concurrent inference limit
    int queue_timeout_ms = 5000;  // wait for an inference slot before answering 503

    void validate() const {
        if (port < 0 || port > 65535) {
            throw ConfigError("port out of range");
        }
        if (max_body_bytes < 16) {
            throw ConfigError("max_body_bytes must be >= 16");
        }
        if (max_inflight < 1 || max_inflight > 256) {
            throw ConfigError("max_inflight must be in [1, 256]");
        }
        if (queue_timeout_ms < 0) {
            throw ConfigError("queue_timeout_ms must be >= 0");
        }
    }

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"host", host},
                {"port", port},
                {"checkpoint", checkpoint},
                {"max_body_bytes", max_body_bytes},
                {"max_inflight", max_inflight},
                {"queue_timeout_ms", queue_timeout_ms}};
    }

    static ServiceConfig from_json(const nlohmann::json &j) {
        ServiceConfig c;
        const auto known = c.to_json();
        try {
            for (const auto &[key, _] : j.items()) {
                if (!known.contains(key)) {
                    throw ConfigError("unknown service config field '" + key + "'");
                }
            }
            c.host = j.value("host", c.host);
            c.port = j.value("port", c.port);
            c.checkpoint = j.value("checkpoint", c.checkpoint);
            c.max_body_bytes = j.value("max_body_bytes", c.max_body_bytes);
            c.max_inflight = j.value("max_inflight", c.max_inflight);
            c.queue_timeout_ms = j.value("queue_timeout_ms", c.queue_timeout_ms);
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError(std::string("bad service config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

// One JSON file with optional sections: service, model, train, rewriter.
// Relative paths inside are resolved against the file's directory.
struct AppConfig {
    ServiceConfig service;
    std::optional<models::ModelSpec> model;
    training::TrainConfig train;
    moderation::RewriterConfig rewriter;

    static AppConfig from_json(const nlohmann::json &j, const std::filesystem::path &base = {}) {
        if (!j.is_object()) {
            throw ConfigError("config file must hold a JSON object");
        }
        for (const auto &[key, _] : j.items()) {
            if (key != "service" && key != "model" && key != "train" && key != "rewriter") {
                throw ConfigError("unknown config section '" + key + "'");
            }
        }
        AppConfig c;
        if (j.contains("service")) {
            c.service = ServiceConfig::from_json(j["service"]);
        }
        if (j.contains("model")) {
            c.model = models::ModelSpec::from_json(j["model"]);
        }
        if (j.contains("train")) {
            c.train = training::TrainConfig::from_json(j["train"]);
        }
        if (j.contains("rewriter")) {
            c.rewriter = moderation::RewriterConfig::from_json(j["rewriter"]);
        }
        const auto resolve = [&](std::string &p) {
            if (!p.empty() && !base.empty() && std::filesystem::path(p).is_relative()) {
                p = (base / p).string();
            }
        };
        resolve(c.service.checkpoint);
        resolve(c.rewriter.lexicon_path);
        resolve(c.rewriter.cassette_path);
        return c;
    }

    static AppConfig load(const std::filesystem::path &path) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::parse_error &e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        return from_json(j, path.parent_path());
    }
};

}  // namespace hsd::interface
