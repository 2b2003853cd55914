#pragma once

#include "hsd/core/hash.hpp"
#include "hsd/core/io.hpp"
#include "hsd/interface/config.hpp"
#include "hsd/models/model.hpp"
#include "hsd/moderation/pipeline.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>

namespace hsd::interface {

// HTTP front end over one read-only model:
//   POST /classify {"text": ...}  -> {label, label_name, probabilities}
//   POST /moderate {"text": ...}  -> moderation result
//   GET  /health                  -> 200 ready | 503 loading/failed
//   GET  /model                   -> spec and checkpoint sha256
// Inference endpoints answer 503 until a model is loaded.
class Service {
  public:
    struct Reply {
        int status = 200;
        nlohmann::json body;
    };

    Service(ServiceConfig cfg, moderation::RewriterConfig rw_cfg, std::unique_ptr<moderation::Rewriter> rewriter = nullptr)
        : cfg_(std::move(cfg)), rw_cfg_(std::move(rw_cfg)), slots_(cfg_.max_inflight) {
        cfg_.validate();
        rewriter_ = rewriter ? std::move(rewriter) : moderation::make_rewriter(rw_cfg_);
    }

    Service(const Service &) = delete;
    Service &operator=(const Service &) = delete;
    ~Service() { stop(); }

    // Loads cfg.checkpoint. On failure the service stays not-ready and the
    // error is reported by /health; the exception is rethrown.
    void load_model() {
        try {
            const auto bytes = read_file(cfg_.checkpoint);
            auto m = std::make_shared<const models::ModelHandle>(
                models::load_checkpoint_bytes<float>(bytes, cfg_.checkpoint));
            set_model(std::move(m), sha256_hex(bytes));
        } catch (const std::exception &e) {
            const std::lock_guard lock(mu_);
            load_error_ = e.what();
            throw;
        }
    }

    void set_model(std::shared_ptr<const models::ModelHandle> model, std::string checkpoint_sha256) {
        const std::lock_guard lock(mu_);
        model_ = std::move(model);
        checkpoint_hash_ = std::move(checkpoint_sha256);
        load_error_.clear();
    }

    [[nodiscard]] bool ready() const {
        const std::lock_guard lock(mu_);
        return model_ != nullptr;
    }

    Reply health() const {
        const std::lock_guard lock(mu_);
        if (model_) {
            return {200, {{"status", "ready"}}};
        }
        nlohmann::json b = {{"status", load_error_.empty() ? "loading" : "failed"}};
        if (!load_error_.empty()) {
            b["error"] = load_error_;
        }
        return {503, b};
    }

    Reply model_info() const {
        const std::lock_guard lock(mu_);
        if (!model_) {
            return not_ready();
        }
        return {200,
                {{"spec", model_->spec.to_json()},
                 {"checkpoint", cfg_.checkpoint},
                 {"checkpoint_sha256", checkpoint_hash_},
                 {"parameters", model_->parameter_count()},
                 {"rewriter", rewriter_->id()}}};
    }

    Reply classify(const std::string &body) {
        return with_model(body, [](const models::ModelHandle &m, const std::string &text, moderation::Rewriter &) {
            const auto c = moderation::classify(text, m);
            return Reply{200,
                         {{"label", c.label}, {"label_name", label_name(c.label)}, {"probabilities", c.probabilities}}};
        });
    }

    Reply moderate(const std::string &body) {
        const auto mode = rw_cfg_.on_failure;
        return with_model(body, [mode](const models::ModelHandle &m, const std::string &text, moderation::Rewriter &rw) {
            const auto r = moderation::moderate(text, m, rw, mode);
            return Reply{r.action == moderation::Action::blocked ? 502 : 200, moderation::to_json(r)};
        });
    }

    // Binds; port 0 picks a free port. Returns the bound port.
    int bind() {
        install_routes();
        int port = cfg_.port;
        if (port == 0) {
            port = server_.bind_to_any_port(cfg_.host);
        } else if (!server_.bind_to_port(cfg_.host, port)) {
            port = -1;
        }
        if (port < 0) {
            throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
        }
        bound_port_ = port;
        return port;
    }

    // Blocks serving requests until stop().
    void run() { server_.listen_after_bind(); }

    void start() {
        if (bound_port_ < 0) {
            bind();
        }
        thread_ = std::thread([this] { run(); });
        server_.wait_until_ready();
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) {
            thread_.join();
        }
    }

    [[nodiscard]] int port() const noexcept { return bound_port_; }

  private:
    static Reply not_ready() { return {503, {{"error", "model not loaded"}}}; }
    static Reply bad_request(const std::string &why) { return {400, {{"error", why}}}; }

    template <typename F>
    Reply with_model(const std::string &body, F &&f) {
        std::shared_ptr<const models::ModelHandle> model;
        {
            const std::lock_guard lock(mu_);
            model = model_;
        }
        if (!model) {
            return not_ready();
        }
        if (body.size() > cfg_.max_body_bytes) {
            return {413, {{"error", "request body exceeds " + std::to_string(cfg_.max_body_bytes) + " bytes"}}};
        }
        if (body.empty()) {
            return bad_request("empty body");
        }
        const auto j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded()) {
            return bad_request("malformed JSON");
        }
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
            return bad_request("expected {\"text\": string}");
        }
        if (!slots_.try_acquire_for(std::chrono::milliseconds(cfg_.queue_timeout_ms))) {
            return {503, {{"error", "inference limit reached"}}};
        }
        struct Release {
            std::counting_semaphore<256> &s;
            ~Release() { s.release(); }
        } release{slots_};
        try {
            return f(*model, j["text"].get<std::string>(), *rewriter_);
        } catch (const Error &e) {
            return {500, {{"error", e.what()}}};
        }
    }

    void install_routes() {
        if (routes_installed_) {
            return;
        }
        routes_installed_ = true;
        server_.set_payload_max_length(cfg_.max_body_bytes);
        const auto send = [](httplib::Response &res, const Reply &r) {
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        server_.Get("/health", [this, send](const httplib::Request &, httplib::Response &res) { send(res, health()); });
        server_.Get("/model", [this, send](const httplib::Request &, httplib::Response &res) { send(res, model_info()); });
        server_.Post("/classify", [this, send](const httplib::Request &req, httplib::Response &res) {
            send(res, classify(req.body));
        });
        server_.Post("/moderate", [this, send](const httplib::Request &req, httplib::Response &res) {
            send(res, moderate(req.body));
        });
        server_.set_error_handler([](const httplib::Request &, httplib::Response &res) {
            if (res.body.empty()) {
                res.set_content(nlohmann::json{{"error", httplib::status_message(res.status)}}.dump(),
                                "application/json");
            }
        });
    }

    ServiceConfig cfg_;
    moderation::RewriterConfig rw_cfg_;
    std::unique_ptr<moderation::Rewriter> rewriter_;
    mutable std::mutex mu_;
    std::shared_ptr<const models::ModelHandle> model_;
    std::string checkpoint_hash_;
    std::string load_error_;
    std::counting_semaphore<256> slots_;
    httplib::Server server_;
    std::thread thread_;
    int bound_port_ = -1;
    bool routes_installed_ = false;
};

}  // namespace hsd::interface
