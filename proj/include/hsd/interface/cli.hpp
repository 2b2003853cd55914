#pragma once

#include "hsd/corpus/split.hpp"
#include "hsd/corpus/stats.hpp"
#include "hsd/evaluation/evaluate.hpp"
#include "hsd/interface/config.hpp"
#include "hsd/interface/service.hpp"
#include "hsd/moderation/pipeline.hpp"
#include "hsd/training/manifest.hpp"
#include "hsd/training/presets.hpp"
#include "hsd/training/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fmt/format.h>

#include <atomic>
#include <csignal>
#include <iostream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace hsd::interface {

inline constexpr std::string_view repl_prompt = "Enter a tweet to analyze (or type 'exit' to quit): ";

namespace detail {

inline std::atomic<bool> &stop_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

inline void on_signal(int) { stop_flag() = true; }

inline void write_or_print(const std::string &path, const std::string &content, std::ostream &out) {
    if (path.empty() || path == "-") {
        out << content;
    } else {
        write_file(path, content);
    }
}

inline nlohmann::json load_json(const std::string &path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(path + ": " + e.what());
    }
}

struct SplitChoice {
    std::string manifest_path;
    corpus::SplitSpec spec;
};

inline std::pair<corpus::Splits, nlohmann::json> resolve_splits(const corpus::Dataset &ds, const SplitChoice &c) {
    if (!c.manifest_path.empty()) {
        const auto m = load_json(c.manifest_path);
        return {corpus::apply_manifest(ds, m), m};
    }
    auto s = corpus::split(ds, c.spec);
    auto m = corpus::split_manifest(ds, c.spec, s);
    return {std::move(s), std::move(m)};
}

inline const corpus::Dataset &pick(const corpus::Splits &s, const std::string &part) {
    if (part == "train") {
        return s.train;
    }
    if (part == "val") {
        return s.val;
    }
    if (part == "test") {
        return s.test;
    }
    throw ConfigError("unknown split part '" + part + "' (train, val, test)");
}

// Rewriter flags shared by moderate, repl and serve.
struct RewriterFlags {
    std::string backend;
    std::string lexicon;
    std::string cassette;
    bool fail_open = false;

    void add(CLI::App *cmd) {
        cmd->add_option("--backend", backend, "rewriter backend: stub, lexicon, remote_llm");
        cmd->add_option("--lexicon", lexicon, "lexicon file for the lexicon backend");
        cmd->add_option("--cassette", cassette, "replay remote_llm responses from a cassette file");
        cmd->add_flag("--fail-open", fail_open, "pass harmful text through when the backend fails");
    }

    [[nodiscard]] moderation::RewriterConfig apply(moderation::RewriterConfig c) const {
        if (!backend.empty()) {
            c.backend = backend;
        }
        if (!lexicon.empty()) {
            c.lexicon_path = lexicon;
            if (backend.empty()) {
                c.backend = "lexicon";
            }
        }
        if (!cassette.empty()) {
            c.cassette_path = cassette;
        }
        if (fail_open) {
            c.on_failure = moderation::FailureMode::open;
        }
        c.validate();
        return c;
    }
};

inline std::string trim_cr(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) {
        s.pop_back();
    }
    return s;
}

inline std::string lower_ascii(std::string s) {
    for (auto &c : s) {
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
    }
    return s;
}

}  // namespace detail

// Runs one CLI invocation. `args` excludes the program name. Returns the
// process exit status (see ExitCode).
inline int run_cli(std::vector<std::string> args, std::istream &in, std::ostream &out, std::ostream &err) {
    CLI::App app{"Hate-speech and offensive-language detection toolkit", "hsd"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "hsd 0.1.0");
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (service, model, train, rewriter sections)");
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress progress on stderr");

    // clean
    auto *clean = app.add_subcommand("clean", "clean text line by line (file or stdin)");
    std::string clean_in, clean_out;
    clean->add_option("-i,--input", clean_in, "input file (default stdin)");
    clean->add_option("-o,--output", clean_out, "output file (default stdout)");

    // stats
    auto *stats = app.add_subcommand("stats", "dataset statistics as JSON");
    std::string stats_data, stats_out;
    std::size_t top_k = 20;
    stats->add_option("-d,--data", stats_data, "annotated CSV")->required();
    stats->add_option("--top-k", top_k, "number of frequent words");
    stats->add_option("-o,--out", stats_out, "output file (default stdout)");

    // split
    auto *split = app.add_subcommand("split", "seeded stratified split manifest");
    std::string split_data, split_out;
    corpus::SplitSpec split_spec;
    bool no_stratify = false;
    split->add_option("-d,--data", split_data, "annotated CSV")->required();
    split->add_option("--train", split_spec.train_fraction, "train fraction");
    split->add_option("--val", split_spec.val_fraction, "validation fraction");
    split->add_option("--test", split_spec.test_fraction, "test fraction");
    split->add_option("--seed", split_spec.seed, "shuffle seed");
    split->add_flag("--no-stratify", no_stratify, "plain random split");
    split->add_option("-o,--out", split_out, "manifest file (default stdout)");

    // train
    auto *train = app.add_subcommand("train", "train a model and save the best-validation checkpoint");
    std::string tr_data, tr_preset, tr_spec, tr_out, tr_curves, tr_curves_csv, tr_manifest, tr_report;
    std::string enc_bert = "bert-base-uncased", enc_distil = "distilbert-base-uncased";
    detail::SplitChoice tr_split;
    std::optional<int> tr_epochs, tr_batch, tr_vocab;
    std::optional<double> tr_lr, tr_clip;
    std::optional<std::uint64_t> tr_seed;
    bool tr_weights = false, tr_no_clip = false, tr_freeze = false;
    train->add_option("-d,--data", tr_data, "annotated CSV")->required();
    train->add_option("--split-manifest", tr_split.manifest_path, "reuse a split manifest");
    train->add_option("--split-seed", tr_split.spec.seed, "split seed when no manifest is given");
    train->add_option("--preset", tr_preset, "one of the ten comparison presets");
    train->add_option("--spec", tr_spec, "model spec JSON file");
    train->add_option("--bert", enc_bert, "encoder name for BERT presets");
    train->add_option("--distilbert", enc_distil, "encoder name for DistilBERT presets");
    train->add_option("--epochs", tr_epochs);
    train->add_option("--batch-size", tr_batch);
    train->add_option("--lr", tr_lr);
    train->add_option("--seed", tr_seed);
    train->add_option("--clip", tr_clip, "global gradient-norm clip");
    train->add_flag("--no-clip", tr_no_clip, "disable gradient clipping");
    train->add_flag("--class-weights", tr_weights, "weight the loss by inverse class frequency");
    train->add_flag("--freeze-encoder", tr_freeze);
    train->add_option("--vocab-max-size", tr_vocab, "vocabulary size for baselines");
    train->add_option("-o,--out", tr_out, "checkpoint path")->required();
    train->add_option("--curves", tr_curves, "learning curves JSON");
    train->add_option("--curves-csv", tr_curves_csv, "learning curves CSV");
    train->add_option("--run-manifest", tr_manifest, "run manifest JSON");
    train->add_option("--report", tr_report, "test-split evaluation report JSON");

    // eval
    auto *eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string ev_ckpt, ev_data, ev_part = "test", ev_name, ev_out, ev_format = "text";
    detail::SplitChoice ev_split;
    std::optional<int> ev_epochs;
    bool ev_all = false;
    eval->add_option("-c,--checkpoint", ev_ckpt)->required();
    eval->add_option("-d,--data", ev_data, "annotated CSV")->required();
    eval->add_option("--split-manifest", ev_split.manifest_path);
    eval->add_option("--split-seed", ev_split.spec.seed);
    eval->add_option("--part", ev_part, "train, val or test");
    eval->add_flag("--all", ev_all, "evaluate on every row instead of one split");
    eval->add_option("--name", ev_name, "row label for comparison tables");
    eval->add_option("--epochs", ev_epochs, "epochs, recorded for comparison tables");
    eval->add_option("-o,--out", ev_out, "report JSON file");
    eval->add_option("--format", ev_format, "stdout format: text or json");

    // compare
    auto *compare = app.add_subcommand("compare", "comparison table from evaluation reports");
    std::vector<std::string> cmp_reports;
    std::string cmp_format = "text", cmp_out;
    compare->add_option("reports", cmp_reports, "report JSON files, in row order")->required();
    compare->add_option("--format", cmp_format, "text, csv, tsv or json");
    compare->add_option("-o,--out", cmp_out);

    // moderate
    auto *mod = app.add_subcommand("moderate", "classify one text and rewrite it if harmful");
    std::string mod_ckpt, mod_text;
    detail::RewriterFlags mod_rw;
    mod->add_option("-c,--checkpoint", mod_ckpt);
    mod->add_option("text", mod_text, "text, or - for stdin")->required();
    mod_rw.add(mod);

    // repl
    auto *repl = app.add_subcommand("repl", "interactive analyze loop");
    std::string repl_ckpt;
    detail::RewriterFlags repl_rw;
    repl->add_option("-c,--checkpoint", repl_ckpt);
    repl_rw.add(repl);

    // serve
    auto *serve = app.add_subcommand("serve", "HTTP classification and moderation service");
    std::string sv_ckpt, sv_host;
    std::optional<int> sv_port, sv_inflight;
    detail::RewriterFlags sv_rw;
    serve->add_option("-c,--checkpoint", sv_ckpt);
    serve->add_option("--host", sv_host);
    serve->add_option("--port", sv_port);
    serve->add_option("--max-inflight", sv_inflight);
    sv_rw.add(serve);

    // presets
    auto *pre = app.add_subcommand("presets", "list the ten model presets");
    bool pre_json = false;
    pre->add_flag("--json", pre_json);

    // build-vocab
    auto *vocab = app.add_subcommand("build-vocab", "WordPiece vocabulary from cleaned training texts");
    std::string bv_data, bv_out;
    detail::SplitChoice bv_split;
    std::size_t bv_max = 20000;
    bool bv_all = false;
    vocab->add_option("-d,--data", bv_data)->required();
    vocab->add_option("--split-manifest", bv_split.manifest_path);
    vocab->add_option("--split-seed", bv_split.spec.seed);
    vocab->add_flag("--all", bv_all, "use every row, not just the training split");
    vocab->add_option("--max-size", bv_max);
    vocab->add_option("-o,--out", bv_out);

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    const auto log = [&](const std::string &s) {
        if (!quiet) {
            err << s << '\n';
        }
    };

    try {
        AppConfig cfg = config_path.empty() ? AppConfig{} : AppConfig::load(config_path);
        const auto checkpoint_or = [&](const std::string &flag) {
            const std::string p = flag.empty() ? cfg.service.checkpoint : flag;
            if (p.empty()) {
                throw ConfigError("no checkpoint given (--checkpoint or service.checkpoint in --config)");
            }
            return p;
        };

        if (*clean) {
            std::string text = clean_in.empty() || clean_in == "-"
                                   ? std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>())
                                   : read_file(clean_in);
            std::istringstream lines(text);
            std::string line, result;
            while (std::getline(lines, line)) {
                result += textprep::clean_text(detail::trim_cr(line)).str();
                result += '\n';
            }
            detail::write_or_print(clean_out, result, out);
            return 0;
        }

        if (*stats) {
            const auto ds = corpus::load_dataset(stats_data);
            if (!ds.quarantined.empty()) {
                log(fmt::format("{} row(s) quarantined", ds.quarantined.size()));
            }
            detail::write_or_print(stats_out, corpus::stats_report(ds, top_k).dump(2) + "\n", out);
            return 0;
        }

        if (*split) {
            split_spec.stratified = !no_stratify;
            const auto ds = corpus::load_dataset(split_data);
            const auto s = corpus::split(ds, split_spec);
            log(fmt::format("train {} / val {} / test {}", s.train.size(), s.val.size(), s.test.size()));
            detail::write_or_print(split_out, corpus::split_manifest(ds, split_spec, s).dump(2) + "\n", out);
            return 0;
        }

        if (*train) {
            models::ModelSpec spec;
            training::TrainConfig tc = cfg.train;
            std::string title;
            if (!tr_preset.empty()) {
                const auto p = training::find_preset(tr_preset, enc_bert, enc_distil);
                spec = p.spec;
                if (config_path.empty()) {
                    tc = p.train;
                } else {
                    // preset-specific choices survive a config file's train section
                    tc.use_class_weights = tc.use_class_weights || p.train.use_class_weights;
                    if (!p.train.grad_clip_norm) {
                        tc.grad_clip_norm.reset();
                    }
                }
                title = p.title;
            } else if (!tr_spec.empty()) {
                spec = models::ModelSpec::from_json(detail::load_json(tr_spec));
            } else if (cfg.model) {
                spec = *cfg.model;
            } else {
                throw ConfigError("train needs --preset, --spec or a model section in --config");
            }
            if (title.empty()) {
                title = std::string(models::kind_name(spec.kind));
            }
            if (tr_epochs) tc.epochs = *tr_epochs;
            if (tr_batch) tc.batch_size = *tr_batch;
            if (tr_lr) tc.learning_rate = *tr_lr;
            if (tr_seed) tc.seed = *tr_seed;
            if (tr_clip) tc.grad_clip_norm = *tr_clip;
            if (tr_no_clip) tc.grad_clip_norm.reset();
            if (tr_weights) tc.use_class_weights = true;
            if (tr_freeze) tc.freeze_encoder = true;
            if (tr_vocab) tc.vocab_max_size = *tr_vocab;
            tc.validate();

            const auto ds = corpus::load_dataset(tr_data);
            const auto [splits, manifest] = detail::resolve_splits(ds, tr_split);
            log(fmt::format("training {} on {} rows ({} validation)", title, splits.train.size(), splits.val.size()));
            auto result = training::train<float>(spec, splits.train, splits.val, tc, {.path = tr_out}, log);
            const auto report = evaluation::evaluate(result.model, splits.test, title, tc.epochs);
            out << evaluation::render_classification(report);
            if (!tr_curves.empty()) {
                write_file(tr_curves, result.curves.to_json().dump(2) + "\n");
            }
            if (!tr_curves_csv.empty()) {
                write_file(tr_curves_csv, result.curves.to_csv());
            }
            if (!tr_report.empty()) {
                write_file(tr_report, evaluation::to_json(report).dump(2) + "\n");
            }
            if (!tr_manifest.empty()) {
                training::RunSummary rs{result.model.spec, tc, training::split_manifest_hash(manifest), tr_out,
                                        result.best_epoch, result.best_val_loss, evaluation::to_json(report)};
                write_file(tr_manifest, training::run_manifest(rs).dump(2) + "\n");
            }
            return 0;
        }

        if (*eval) {
            const auto model = models::load_checkpoint<float>(ev_ckpt);
            const auto ds = corpus::load_dataset(ev_data);
            evaluation::EvalReport report;
            const std::string name = ev_name.empty() ? std::string(models::kind_name(model.spec.kind)) : ev_name;
            if (ev_all) {
                report = evaluation::evaluate(model, ds, name, ev_epochs);
            } else {
                const auto [splits, _] = detail::resolve_splits(ds, ev_split);
                report = evaluation::evaluate(model, detail::pick(splits, ev_part), name, ev_epochs);
            }
            if (!ev_out.empty()) {
                write_file(ev_out, evaluation::to_json(report).dump(2) + "\n");
            }
            if (ev_format == "json") {
                out << evaluation::to_json(report).dump(2) << '\n';
            } else if (ev_format == "text") {
                out << evaluation::render_classification(report) << '\n' << evaluation::render_confusion(report.confusion);
            } else {
                throw ConfigError("unknown format '" + ev_format + "' (text, json)");
            }
            return 0;
        }

        if (*compare) {
            std::vector<evaluation::EvalReport> reports;
            for (const auto &p : cmp_reports) {
                reports.push_back(evaluation::report_from_json(detail::load_json(p)));
            }
            const auto rows = evaluation::compare_report(reports);
            std::string text;
            if (cmp_format == "text") {
                text = evaluation::render_text(rows);
            } else if (cmp_format == "csv") {
                text = evaluation::render_delimited(rows, ',');
            } else if (cmp_format == "tsv") {
                text = evaluation::render_delimited(rows, '\t');
            } else if (cmp_format == "json") {
                text = evaluation::comparison_json(rows).dump(2) + "\n";
            } else {
                throw ConfigError("unknown format '" + cmp_format + "' (text, csv, tsv, json)");
            }
            detail::write_or_print(cmp_out, text, out);
            return 0;
        }

        if (*mod) {
            const auto model = models::load_checkpoint<float>(checkpoint_or(mod_ckpt));
            const auto rw_cfg = mod_rw.apply(cfg.rewriter);
            auto rw = moderation::make_rewriter(rw_cfg);
            std::string text = mod_text;
            if (text == "-") {
                text = detail::trim_cr(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
            }
            const auto r = moderation::moderate(text, model, *rw, rw_cfg.on_failure);
            out << moderation::to_json(r, false).dump() << '\n';
            if (r.warning) {
                log("warning: " + *r.warning);
            }
            return r.action == moderation::Action::blocked ? static_cast<int>(ExitCode::backend) : 0;
        }

        if (*repl) {
            const auto model = models::load_checkpoint<float>(checkpoint_or(repl_ckpt));
            const auto rw_cfg = repl_rw.apply(cfg.rewriter);
            auto rw = moderation::make_rewriter(rw_cfg);
            std::string line;
            while (true) {
                out << repl_prompt << std::flush;
                if (!std::getline(in, line)) {
                    out << '\n';
                    break;
                }
                line = detail::trim_cr(line);
                if (detail::lower_ascii(line) == "exit") {
                    break;
                }
                const auto r = moderation::moderate(line, model, *rw, rw_cfg.on_failure);
                out << "Classified as: " << label_titles[static_cast<std::size_t>(r.label)] << '\n';
                if (r.rewritten) {
                    out << "Rewritten: " << *r.rewritten << '\n';
                } else if (r.action == moderation::Action::blocked) {
                    out << "Blocked: " << r.error.value_or("rewriter unavailable") << '\n';
                } else if (r.warning) {
                    out << "Warning: " << *r.warning << '\n';
                }
            }
            return 0;
        }

        if (*serve) {
            auto sc = cfg.service;
            if (!sv_ckpt.empty()) sc.checkpoint = sv_ckpt;
            if (!sv_host.empty()) sc.host = sv_host;
            if (sv_port) sc.port = *sv_port;
            if (sv_inflight) sc.max_inflight = *sv_inflight;
            if (sc.checkpoint.empty()) {
                throw ConfigError("no checkpoint given (--checkpoint or service.checkpoint in --config)");
            }
            Service svc(sc, sv_rw.apply(cfg.rewriter));
            const int port = svc.bind();
            svc.start();  // /health answers 503 until the model is in
            log(fmt::format("listening on {}:{}", sc.host, port));
            svc.load_model();
            log("model loaded from " + sc.checkpoint);
            detail::stop_flag() = false;
            std::signal(SIGINT, detail::on_signal);
            std::signal(SIGTERM, detail::on_signal);
            while (!detail::stop_flag()) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            }
            svc.stop();
            return 0;
        }

        if (*pre) {
            const auto all = training::presets(enc_bert, enc_distil);
            if (pre_json) {
                nlohmann::json j = nlohmann::json::array();
                for (const auto &p : all) {
                    j.push_back({{"name", p.name}, {"title", p.title}, {"spec", p.spec.to_json()},
                                 {"train", p.train.to_json()}});
                }
                out << j.dump(2) << '\n';
            } else {
                for (const auto &p : all) {
                    out << fmt::format("{:<18} {:<20} {:<15} {}\n", p.name, p.title, models::kind_name(p.spec.kind),
                                       p.spec.encoder_name.empty() ? "-" : p.spec.encoder_name);
                }
            }
            return 0;
        }

        if (*vocab) {
            const auto ds = corpus::load_dataset(bv_data);
            std::vector<textprep::CleanText> texts;
            const auto collect = [&](const corpus::Dataset &d) {
                for (const auto &r : d.rows) {
                    texts.push_back(textprep::clean_text(r.text));
                }
            };
            if (bv_all) {
                collect(ds);
            } else {
                collect(detail::resolve_splits(ds, bv_split).first.train);
            }
            std::string text;
            for (const auto &t : textprep::build_wordpiece_vocab(texts, bv_max)) {
                text += t + '\n';
            }
            detail::write_or_print(bv_out, text, out);
            return 0;
        }
    } catch (const Error &e) {
        err << "hsd: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception &e) {
        err << "hsd: unexpected error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::unexpected);
    }
    return static_cast<int>(ExitCode::usage);
}

}  // namespace hsd::interface
