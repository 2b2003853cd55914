// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance            run all nine
//   acceptance --only N   run criterion N
//
// Exit status: 0 all selected passed, 1 any failed, 77 everything selected
// was skipped (ctest SKIP_RETURN_CODE). Criteria 2 and 5 need the canonical
// annotated CSV in $HSD_DATASET; criterion 5 also needs the pretrained
// distilled encoder under $HSD_ENCODER_HOME.

#include "hsd/corpus/split.hpp"
#include "hsd/corpus/stats.hpp"
#include "hsd/evaluation/evaluate.hpp"
#include "hsd/interface/service.hpp"
#include "hsd/moderation/pipeline.hpp"
#include "hsd/textprep/clean_text.hpp"
#include "hsd/training/presets.hpp"
#include "hsd/training/trainer.hpp"
#include "model_support.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace hsd;
using hsd::test::data_path;
using Clock = std::chrono::steady_clock;

// Tolerances, pinned.
constexpr double clean_budget_s = 5.0;
constexpr double eda_budget_s = 30.0;
constexpr double eda_tol = 0.01;
constexpr int macro_tol_points = 1;
constexpr double cnn_target = 89.7, cnn_tol = 3.0;
constexpr double distil_target = 91.3, distil_tol = 2.5;
constexpr double grad_rel_tol = 1e-3;
constexpr float padding_tol = 1e-5f;
constexpr double clip_tol = 1e-6;
constexpr double prob_sum_tol = 1e-6;
constexpr double suite_budget_s = 300.0;

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::pass;
    std::string detail;
};

// Collects failed checks; the first few go into the report line.
class Checks {
  public:
    void operator()(bool ok, const std::string &what) {
        ++total_;
        if (!ok) {
            failed_.push_back(what);
        }
    }
    [[nodiscard]] Outcome outcome(const std::string &summary) const {
        if (failed_.empty()) {
            return {Status::pass, summary};
        }
        std::string d = fmt::format("{}/{} checks failed: ", failed_.size(), total_);
        for (std::size_t i = 0; i < std::min<std::size_t>(failed_.size(), 3); ++i) {
            d += (i ? "; " : "") + failed_[i];
        }
        return {Status::fail, d};
    }

  private:
    std::size_t total_ = 0;
    std::vector<std::string> failed_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const char *env(const char *name) {
    const char *v = std::getenv(name);
    return v != nullptr && *v != '\0' ? v : nullptr;
}

// ---------------------------------------------------------------- 1

Outcome cleaning_fidelity() {
    const auto t0 = Clock::now();
    Checks check;
    const auto cases = test::read_golden_tsv(data_path("clean_text_golden.tsv"));
    check(cases.size() >= 30, fmt::format("golden corpus has {} cases", cases.size()));

    std::string all_raw;
    bool has_empty = false;
    for (const auto &[raw, want] : cases) {
        all_raw += raw + "\x01";
        has_empty = has_empty || raw.empty();
        const auto got = textprep::clean_text(raw).str();
        check(got == want, fmt::format("'{}' -> '{}', expected '{}'", raw, got, want));
    }
    // coverage of the required categories
    check(all_raw.find("http") != std::string::npos, "no URL case");
    check(all_raw.find('@') != std::string::npos, "no mention case");
    check(all_raw.find_first_of("0123456789") != std::string::npos, "no digit case");
    check(all_raw.find("\xc2\xbf") != std::string::npos, "no inverted question mark case");
    check(all_raw.find("!!!") != std::string::npos, "no punctuation run case");
    check(std::any_of(all_raw.begin(), all_raw.end(), [](char c) { return c >= 'A' && c <= 'Z'; }),
          "no mixed case");
    check(has_empty, "no empty-string case");
    for (const auto e : textprep::emoticons) {
        check(all_raw.find(e) != std::string::npos, fmt::format("emoticon '{}' not covered", e));
    }

    Rng rng(20240601);
    std::size_t violations = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto once = textprep::clean_text(test::fuzz_text(rng));
        violations += textprep::clean_text(once.str()) != once;
    }
    check(violations == 0, fmt::format("{} idempotence violations", violations));
    const double secs = seconds_since(t0);
    check(secs < clean_budget_s, fmt::format("took {:.2f}s", secs));
    return check.outcome(fmt::format("{} golden cases byte-exact, 10000 fuzzed inputs idempotent, {:.2f}s",
                                     cases.size(), secs));
}

// ---------------------------------------------------------------- 2

Outcome eda_reproduction() {
    const char *path = env("HSD_DATASET");
    if (path == nullptr) {
        return {Status::skip, "HSD_DATASET is not set (canonical annotated CSV required)"};
    }
    const auto t0 = Clock::now();
    Checks check;
    const auto ds = corpus::load_dataset(path);
    const auto j = corpus::stats_report(ds, 20);
    check(j["rows"] == 24783, fmt::format("rows {}", j["rows"].dump()));
    check(j["class_distribution"]["0"] == 1430 && j["class_distribution"]["1"] == 19190 &&
              j["class_distribution"]["2"] == 4163,
          "class distribution " + j["class_distribution"].dump());
    const auto &tl = j["descriptive"]["text_length"];
    const auto near = [&](const char *key, double want, double tol) {
        const double got = tl[key].get<double>();
        check(std::abs(got - want) <= tol, fmt::format("text_length {} {} vs {}", key, got, want));
    };
    near("mean", 14.12, eda_tol);
    near("std", 6.83, eda_tol);
    near("25%", 9, 0);
    near("50%", 13, 0);
    near("75%", 19, 0);
    near("max", 52, 0);
    check(j["unique"]["tweet"] == 24783, "unique tweet " + j["unique"]["tweet"].dump());
    check(j["unique"]["class"] == 3, "unique class " + j["unique"]["class"].dump());
    check(j["unique"]["text_length"] == 35, "unique text_length " + j["unique"]["text_length"].dump());
    const double secs = seconds_since(t0);
    check(secs < eda_budget_s, fmt::format("took {:.2f}s", secs));
    return check.outcome(fmt::format("24783 rows, distribution and text_length profile match, {:.2f}s", secs));
}

// ---------------------------------------------------------------- 3

struct BruteForce {
    std::array<std::array<std::size_t, 3>, 3> counts{};
    std::array<double, 3> p{}, r{}, f{};
    double accuracy = 0.0;
};

BruteForce brute_force(const std::vector<int> &preds, const std::vector<int> &labels) {
    BruteForce o;
    std::size_t right = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ++o.counts[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
        right += preds[i] == labels[i];
    }
    o.accuracy = static_cast<double>(right) / static_cast<double>(preds.size());
    for (int c = 0; c < 3; ++c) {
        std::size_t tp = 0, predicted = 0, actual = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            tp += preds[i] == c && labels[i] == c;
            predicted += preds[i] == c;
            actual += labels[i] == c;
        }
        const double p = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        const double r = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        const auto k = static_cast<std::size_t>(c);
        o.p[k] = p;
        o.r[k] = r;
        o.f[k] = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    }
    return o;
}

Outcome metrics_oracle() {
    using namespace evaluation;
    Checks check;
    const auto golden = nlohmann::json::parse(read_file(data_path("metrics_golden.json")));
    check(golden["cases"].size() == 1000, "fixture count");
    std::size_t idx = 0;
    for (const auto &c : golden["cases"]) {
        const auto preds = c["preds"].get<std::vector<int>>();
        const auto labels = c["labels"].get<std::vector<int>>();
        check(preds.size() <= 100, fmt::format("case {} has n = {}", idx, preds.size()));
        const auto m = confusion(preds, labels);
        const auto pc = per_class_metrics(m);
        const auto mac = macro_metrics(pc);
        const auto o = brute_force(preds, labels);
        bool same = accuracy(m) == o.accuracy;
        double mp = 0, mr = 0, mf = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            same = same && pc[k].precision == o.p[k] && pc[k].recall == o.r[k] && pc[k].f1 == o.f[k];
            for (std::size_t q = 0; q < 3; ++q) {
                same = same && m.counts[k][q] == o.counts[k][q];
            }
            mp += o.p[k];
            mr += o.r[k];
            mf += o.f[k];
        }
        same = same && mac.precision == mp / 3 && mac.recall == mr / 3 && mac.f1 == mf / 3;
        check(same, fmt::format("case {} differs from the brute-force oracle", idx));
        ++idx;
    }
    // degenerate majority predictor over the canonical class counts
    ConfusionMatrix deg;
    deg.counts = {{{0, 1430, 0}, {0, 19190, 0}, {0, 4163, 0}}};
    const auto r = make_report(deg, 0.0);
    for (const std::size_t k : {0U, 2U}) {
        check(r.per_class[k].precision == 0.0 && r.per_class[k].recall == 0.0 && r.per_class[k].f1 == 0.0,
              fmt::format("class {} not all zero", k));
    }
    check(round_half_up(r.accuracy, 4) == 0.7743, fmt::format("degenerate accuracy {}", r.accuracy));
    check(r.per_class[1].recall == 1.0 && round_half_up(r.per_class[1].precision, 2) == 0.77 &&
              round_half_up(r.per_class[1].f1, 2) == 0.87,
          "class 1 row differs from 0.77 / 1.00 / 0.87");
    return check.outcome(fmt::format("1000 fixtures exact, degenerate case accuracy {:.4f}", r.accuracy));
}

// ---------------------------------------------------------------- 4

Outcome macro_consistency() {
    using evaluation::ClassMetrics;
    struct Case {
        const char *model;
        evaluation::PerClass per_class;
        std::array<int, 3> summary;
    };
    const std::vector<Case> cases = {
        {"CNN", {ClassMetrics{0.49, 0.15, 0.23}, {0.91, 0.97, 0.94}, {0.87, 0.81, 0.84}}, {76, 64, 67}},
        {"Bi-LSTM", {ClassMetrics{0.48, 0.21, 0.29}, {0.93, 0.94, 0.94}, {0.81, 0.92, 0.86}}, {74, 69, 70}},
        {"BERT", {ClassMetrics{0.46, 0.50, 0.48}, {0.95, 0.94, 0.94}, {0.88, 0.91, 0.90}}, {77, 78, 78}},
    };
    Checks check;
    std::string detail;
    for (const auto &c : cases) {
        const auto m = evaluation::macro_metrics(c.per_class);
        const std::array<int, 3> got = {static_cast<int>(evaluation::round_half_up(100 * m.precision, 0)),
                                        static_cast<int>(evaluation::round_half_up(100 * m.recall, 0)),
                                        static_cast<int>(evaluation::round_half_up(100 * m.f1, 0))};
        for (std::size_t k = 0; k < 3; ++k) {
            check(std::abs(got[k] - c.summary[k]) <= macro_tol_points,
                  fmt::format("{} metric {}: {} vs {}", c.model, k, got[k], c.summary[k]));
        }
        detail += fmt::format("{}{} {}/{}/{}", detail.empty() ? "" : ", ", c.model, got[0], got[1], got[2]);
    }
    return check.outcome(detail + " (within 1 point)");
}

// ---------------------------------------------------------------- 5

Outcome training_reproduction() {
    const char *path = env("HSD_DATASET");
    if (path == nullptr) {
        return {Status::skip, "HSD_DATASET is not set (canonical annotated CSV required)"};
    }
    const auto ds = corpus::load_dataset(path);
    const auto splits = corpus::split(ds, {});
    const auto run = [&](const std::string &preset) {
        auto p = training::find_preset(preset);
        p.train.epochs = 3;
        const auto r = training::train<float>(p.spec, splits.train, splits.val, p.train, {},
                                               [](const std::string &s) { std::cerr << s << '\n'; });
        return 100.0 * evaluation::evaluate(r.model, splits.test, p.title, 3).accuracy;
    };
    Checks check;
    const double cnn = run("cnn");
    check(std::abs(cnn - cnn_target) <= cnn_tol, fmt::format("CNN test accuracy {:.1f}%", cnn));
    std::string detail = fmt::format("CNN {:.1f}% (target {} +/- {})", cnn, cnn_target, cnn_tol);

    const char *home = env("HSD_ENCODER_HOME");
    if (home == nullptr || !std::filesystem::is_directory(std::filesystem::path(home) / "distilbert-base-uncased")) {
        const auto o = check.outcome(detail);
        if (o.status == Status::fail) {
            return o;
        }
        return {Status::skip, detail + "; distilled encoder run not possible: "
                                       "$HSD_ENCODER_HOME/distilbert-base-uncased is missing"};
    }
    const double distil = run("distilbert");
    check(std::abs(distil - distil_target) <= distil_tol, fmt::format("DistilBERT test accuracy {:.1f}%", distil));
    detail += fmt::format(", DistilBERT {:.1f}% (target {} +/- {})", distil, distil_target, distil_tol);
    return check.outcome(detail);
}

// ---------------------------------------------------------------- 6

textprep::TokenSequence padded(std::vector<std::int32_t> ids, std::size_t pad_to) {
    textprep::TokenSequence s;
    s.ids = std::move(ids);
    s.attention_mask.assign(s.ids.size(), 1);
    while (s.ids.size() < pad_to) {
        s.ids.push_back(0);
        s.attention_mask.push_back(0);
    }
    return s;
}

Outcome model_properties() {
    using models::Kind;
    Checks check;
    Rng rng(6);
    std::size_t shapes = 0;
    for (const auto kind :
         {Kind::cnn, Kind::lstm, Kind::bilstm, Kind::encoder, Kind::encoder_cnn, Kind::encoder_bilstm}) {
        const auto m = models::build_model(test::tiny_spec(kind), 2);
        for (int trial = 0; trial < 40; ++trial) {
            const auto len = 1 + rng.below(static_cast<std::uint64_t>(m.spec.max_len));
            std::vector<std::int32_t> ids(len);
            for (auto &id : ids) {
                id = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(m.spec.vocab_size)));
            }
            const auto logits = m.logits(padded(ids, static_cast<std::size_t>(m.spec.max_len)));
            check(logits.rows() == 1 && logits.cols() == 3 && logits.allFinite(),
                  fmt::format("{} length {}", models::kind_name(kind), len));
            ++shapes;
        }
    }

    double worst_grad = 0.0;
    const std::vector<std::vector<std::int32_t>> inputs = {{2, 7, 9, 3}, {2, 12, 3}, {2, 30, 31, 32, 33, 3}};
    for (const auto kind : {Kind::cnn, Kind::lstm}) {
        auto m = models::build_model<double>(test::tiny_spec(kind), 21);
        const auto g = test::grad_check(m, inputs, {0, 2, 1});
        check(g.worst < grad_rel_tol, fmt::format("{} gradient {}", models::kind_name(kind), g.worst_param));
        worst_grad = std::max(worst_grad, g.worst);
    }

    float worst_pad = 0.0f;
    for (const auto kind : {Kind::encoder, Kind::encoder_cnn, Kind::encoder_bilstm}) {
        const auto m = models::build_model(test::tiny_spec(kind), 4);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<std::int32_t> ids = {2};
            for (std::uint64_t i = 0, n = 1 + rng.below(8); i < n; ++i) {
                ids.push_back(static_cast<std::int32_t>(5 + rng.below(90)));
            }
            ids.push_back(3);
            const auto bare = m.logits(padded(ids, ids.size()));
            auto seq = padded(ids, 16);
            for (std::size_t i = ids.size(); i < seq.ids.size(); ++i) {
                seq.ids[i] = static_cast<std::int32_t>(rng.below(100));
            }
            const float d = (m.logits(seq) - bare).cwiseAbs().maxCoeff();
            worst_pad = std::max(worst_pad, d);
            check(d <= padding_tol, fmt::format("{} padding moved logits by {}", models::kind_name(kind), d));
        }
    }

    // 32-example overfit
    const auto ds = corpus::load_dataset(data_path("synthetic_tweets.csv"));
    auto small = corpus::split(ds, {}).train;
    small.rows.resize(32);
    training::TrainConfig cfg;
    cfg.epochs = 25;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-2;
    cfg.seed = 5;
    auto spec = test::tiny_spec(Kind::cnn);
    spec.vocab_size = 0;
    spec.embed_dim = 16;
    spec.conv_filters = 8;
    const auto r = training::train(spec, small, small, cfg);
    const double acc = training::evaluate_pass(r.model, training::encode_dataset(r.model, small)).accuracy;
    check(acc == 1.0, fmt::format("overfit train accuracy {}", acc));

    return check.outcome(fmt::format("{} fuzzed shapes, worst gradient rel err {:.2e}, worst padding drift {:.1e}, "
                                     "overfit accuracy {:.2f}",
                                     shapes, worst_grad, worst_pad, acc));
}

// ---------------------------------------------------------------- 7

Outcome training_contracts() {
    Checks check;
    const auto ds = corpus::load_dataset(data_path("synthetic_tweets.csv"));
    const auto sp = corpus::split(ds, {});
    auto spec = test::tiny_spec(models::Kind::cnn);
    spec.vocab_size = 0;
    spec.embed_dim = 16;
    spec.conv_filters = 8;

    training::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 9;
    const auto a = training::train(spec, sp.train, sp.val, cfg);
    const auto b = training::train(spec, sp.train, sp.val, cfg);
    check(a.curves == b.curves, "seeded runs produced different curves");

    // validation rows carry rotated labels so the minimum comes early
    corpus::Dataset val = sp.train;
    val.rows.resize(100);
    for (auto &row : val.rows) {
        row.label = (row.label + 1) % 3;
    }
    const auto path = std::filesystem::temp_directory_path() / fmt::format("hsd_accept_{}.safetensors", ::getpid());
    cfg.epochs = 6;
    cfg.seed = 3;
    const auto r = training::train(spec, sp.train, val, cfg, {.path = path.string()});
    double best = std::numeric_limits<double>::infinity();
    for (const auto &e : r.curves.epochs) {
        best = std::min(best, e.val_loss);
    }
    const auto loaded = models::load_checkpoint<float>(path.string());
    const double reloaded = training::evaluate_pass(loaded, training::encode_dataset(loaded, val)).mean_loss;
    std::filesystem::remove(path);
    check(reloaded == best, fmt::format("checkpoint loss {} vs curve minimum {}", reloaded, best));

    Rng rng(77);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        nn::ParameterSet<double> ps;
        for (int k = 0, n = 1 + static_cast<int>(rng.below(5)); k < n; ++k) {
            auto &p = ps.add("p" + std::to_string(k),
                             {static_cast<Eigen::Index>(1 + rng.below(6)), static_cast<Eigen::Index>(1 + rng.below(6))});
            const double scale = std::pow(10.0, rng.uniform(-3.0, 2.0));
            for (Eigen::Index i = 0; i < p.grad.size(); ++i) {
                p.grad.data()[i] = rng.normal(0.0, scale);
            }
        }
        const double max_norm = rng.uniform(0.01, 5.0);
        const double pre = training::clip_gradients(ps, max_norm);
        double sq = 0.0;
        for (const auto &p : ps) {
            sq += p->grad.squaredNorm();
        }
        const double err = std::abs(std::sqrt(sq) - std::min(pre, max_norm));
        worst = std::max(worst, err);
        check(err <= clip_tol, fmt::format("clip trial {} off by {}", trial, err));
    }
    return check.outcome(fmt::format("identical seeded curves, checkpoint at epoch {} holds min val loss, "
                                     "500 clip fixtures within {:.1e}",
                                     r.best_epoch, worst));
}

// ---------------------------------------------------------------- 8

std::vector<std::pair<std::string, int>> fixture() {
    std::vector<std::pair<std::string, int>> out;
    std::istringstream in(read_file(data_path("moderation_fixture.tsv")));
    std::string line;
    while (std::getline(in, line)) {
        const auto tab = line.rfind('\t');
        out.emplace_back(line.substr(0, tab), std::stoi(line.substr(tab + 1)));
    }
    return out;
}

Outcome moderation_pipeline() {
    using namespace moderation;
    Checks check;
    const auto model = models::load_checkpoint<float>(data_path("frozen_cnn.safetensors").string());
    StubRewriter stub;
    const auto sentences = fixture();
    check(sentences.size() == 200, fmt::format("fixture has {} sentences", sentences.size()));
    std::size_t rewrites = 0;
    for (const auto &[text, _] : sentences) {
        const auto r = moderate(text, model, stub);
        const bool harmful = r.label == 0 || r.label == 1;
        check((r.action == Action::rewrite) == harmful, fmt::format("'{}' label {} action {}", text, r.label,
                                                                     action_name(r.action)));
        if (r.action == Action::pass) {
            check(r.output() == text, fmt::format("pass result altered '{}'", text));
        }
        rewrites += r.action == Action::rewrite;
    }

    // remote backend, recorded interactions only
    RewriterConfig rc;
    rc.backend = "remote_llm";
    rc.cassette_path = data_path("rewriter_cassette.json").string();
    auto cassette = CassetteTransport::load(rc.cassette_path);
    RemoteRewriter remote(rc, cassette, "", [](std::chrono::milliseconds) {});
    check(remote.rewrite("you are so stupid") == "A kinder phrasing.", "cassette rewrite");
    check(remote.rewrite("shut up you idiot") == "Could you please stop for a moment?", "cassette retry path");
    bool auth_failed = false;
    try {
        (void)remote.rewrite("what a trash take");
    } catch (const BackendError &e) {
        auth_failed = !e.retryable();
    }
    check(auth_failed, "401 not surfaced as a non-retryable backend error");

    // fail-closed under a simulated outage
    auto outage = std::make_shared<OutageTransport>();
    RewriterConfig oc;
    oc.backend = "remote_llm";
    RemoteRewriter down(oc, outage, "key", [](std::chrono::milliseconds) {});
    std::size_t blocked = 0;
    for (const auto &[text, _] : sentences) {
        const int before = outage->calls();
        const auto r = moderate(text, model, down, FailureMode::closed);
        if (r.label == 2) {
            check(r.action == Action::pass && outage->calls() == before, "neutral text reached the backend");
        } else {
            check(r.action == Action::blocked && !r.output() && r.flagged_unrewritten,
                  fmt::format("'{}' was not blocked", text));
            blocked += r.action == Action::blocked;
        }
    }
    return check.outcome(fmt::format("{} rewrites over 200 sentences, cassette replay {} interactions, "
                                     "{} blocked under outage",
                                     rewrites, cassette->replayed(), blocked));
}

// ---------------------------------------------------------------- 9

Outcome service_round_trip(Clock::time_point suite_start, bool whole_suite) {
    Checks check;
    interface::ServiceConfig sc;
    sc.port = 0;
    sc.checkpoint = data_path("frozen_cnn.safetensors").string();
    interface::Service svc(sc, {});
    svc.start();
    httplib::Client client("127.0.0.1", svc.port());
    const auto post = [&](const std::string &route, const std::string &text) {
        auto res = client.Post(route, nlohmann::json{{"text", text}}.dump(), "application/json");
        return std::make_pair(res ? res->status : -1,
                              res ? nlohmann::json::parse(res->body, nullptr, false) : nlohmann::json{});
    };

    auto h = client.Get("/health");
    check(h && h->status == 503, "health before load is not 503");
    check(post("/classify", "hello").first == 503, "classify before load is not 503");
    check(post("/moderate", "hello").first == 503, "moderate before load is not 503");
    svc.load_model();
    h = client.Get("/health");
    check(h && h->status == 200, "health after load is not 200");

    double worst = 0.0;
    for (const auto &[text, _] : fixture()) {
        const auto [status, c] = post("/classify", text);
        check(status == 200, fmt::format("classify '{}' status {}", text, status));
        if (status != 200) {
            continue;
        }
        double sum = 0.0;
        for (const auto &p : c["probabilities"]) {
            sum += p.get<double>();
        }
        worst = std::max(worst, std::abs(sum - 1.0));
        check(std::abs(sum - 1.0) <= prob_sum_tol, fmt::format("probabilities of '{}' sum to {}", text, sum));

        const auto [ms, m] = post("/moderate", text);
        const bool harmful = c["label"] != 2;
        check(ms == 200 && m["label"] == c["label"], fmt::format("moderate '{}' disagrees with classify", text));
        check(m["action"] == (harmful ? "rewrite" : "pass"), fmt::format("moderate '{}' action", text));
        check(harmful ? m["rewritten"] == "[neutralized] " + text : !m.contains("rewritten"),
              fmt::format("moderate '{}' output", text));
    }
    svc.stop();

    const double elapsed = seconds_since(suite_start);
    std::string timing;
    if (whole_suite) {
        check(elapsed < suite_budget_s, fmt::format("suite without criterion 5 took {:.1f}s", elapsed));
        timing = fmt::format(", suite without criterion 5 {:.1f}s", elapsed);
    }
    return check.outcome(fmt::format("200 texts, worst |sum - 1| {:.1e}, readiness gated{}", worst, timing));
}

}  // namespace

int main(int argc, char **argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--only N]\n";
            return 2;
        }
    }
    if (only < 0 || only > 9) {
        std::cerr << "criterion must be 1..9\n";
        return 2;
    }

    const auto suite_start = Clock::now();
    double training_secs = 0.0;
    const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria = {
        {"cleaning fidelity", cleaning_fidelity},
        {"EDA reproduction", eda_reproduction},
        {"metrics oracle equivalence", metrics_oracle},
        {"macro consistency", macro_consistency},
        {"desk-scale training reproduction",
         [&] {
             const auto t0 = Clock::now();
             auto o = training_reproduction();
             training_secs = seconds_since(t0);
             return o;
         }},
        {"model property suite", model_properties},
        {"training contracts", training_contracts},
        {"moderation pipeline", moderation_pipeline},
        {"service round trip",
         [&] {
             const auto adjusted = suite_start + std::chrono::duration_cast<Clock::duration>(
                                                     std::chrono::duration<double>(training_secs));
             return service_round_trip(adjusted, only == 0);
         }},
    };

    int passed = 0, failed = 0, skipped = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (only != 0 && only != n) {
            continue;
        }
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = {Status::fail, std::string("exception: ") + e.what()};
        }
        const char *tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
        std::cout << fmt::format("[{}] criterion {}: {} - {}", tag, n, criteria[i].first, o.detail) << std::endl;
        (o.status == Status::pass ? passed : o.status == Status::fail ? failed : skipped)++;
    }
    std::cout << fmt::format("{} passed, {} failed, {} skipped", passed, failed, skipped) << std::endl;
    if (failed > 0) {
        return 1;
    }
    return passed == 0 && skipped > 0 ? 77 : 0;
}
