#include "hsd/corpus/split.hpp"
#include "hsd/training/manifest.hpp"
#include "hsd/training/presets.hpp"
#include "hsd/training/trainer.hpp"
#include "model_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

namespace hsd::test {
namespace {

using models::Kind;
using nn::Mat;
using training::TrainConfig;

corpus::Dataset make_dataset(const std::vector<std::pair<std::string, int>> &items) {
    corpus::Dataset ds;
    ds.source = "<synthetic>";
    std::int64_t id = 0;
    for (const auto &[text, label] : items) {
        corpus::LabeledTweet r;
        r.row_id = id++;
        r.count = 3;
        r.hate_votes = label == 0 ? 3 : 0;
        r.offensive_votes = label == 1 ? 3 : 0;
        r.neither_votes = label == 2 ? 3 : 0;
        r.label = label;
        r.text = text;
        ds.rows.push_back(r);
    }
    return ds;
}

corpus::Splits synthetic_splits() {
    static const auto ds = corpus::load_dataset(data_path("synthetic_tweets.csv"));
    return corpus::split(ds, {});
}

models::ModelSpec small_cnn() {
    auto s = tiny_spec(Kind::cnn);
    s.vocab_size = 0;  // take the built vocabulary's size
    s.embed_dim = 16;
    s.conv_filters = 8;
    return s;
}

// ---------------------------------------------------------------- loss

TEST(WeightedCrossEntropy, ConfidentLogitsNearZero) {
    Mat<double> z(1, 3);
    z << 30.0, 0.0, 0.0;
    const int y = 0;
    EXPECT_LT(training::weighted_cross_entropy(z, std::span(&y, 1), {5.0, 1.0, 0.2}), 1e-4);
}

TEST(WeightedCrossEntropy, UniformLogitsGiveLn3) {
    const Mat<double> z = Mat<double>::Zero(4, 3);
    const std::vector<int> y = {0, 1, 2, 1};
    EXPECT_NEAR(training::weighted_cross_entropy(z, y, training::uniform_weights), std::log(3.0), 1e-12);
}

TEST(WeightedCrossEntropy, HandComputedWeightedBatch) {
    // example weights 2 and 1 via class weights {2, 0.5, 1} and labels {0, 2}
    Mat<double> z(2, 3);
    z << 1.0, 2.0, 0.0, 0.0, 0.0, 1.0;
    const std::vector<int> y = {0, 2};
    // (2 * (log(e + e^2 + 1) - 1) + (log(2 + e) - 1)) / 3, cross-checked with torch
    EXPECT_NEAR(training::weighted_cross_entropy(z, y, {2.0, 0.5, 1.0}), 1.1222188809402704, 1e-12);
}

TEST(WeightedCrossEntropy, GradientMatchesFiniteDifferences) {
    Rng rng(3);
    Mat<double> z(5, 3);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z.data()[i] = rng.normal(0.0, 2.0);
    }
    const std::vector<int> y = {0, 1, 2, 2, 0};
    const training::ClassWeights w = {3.0, 0.4, 1.7};
    Mat<double> d;
    training::weighted_cross_entropy(z, y, w, &d);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        Mat<double> zp = z, zm = z;
        zp.data()[i] += h;
        zm.data()[i] -= h;
        const double fd =
            (training::weighted_cross_entropy(zp, y, w) - training::weighted_cross_entropy(zm, y, w)) / (2 * h);
        EXPECT_NEAR(d.data()[i], fd, 1e-8);
    }
}

TEST(WeightedCrossEntropy, RejectsBadLabelsAndShapes) {
    const Mat<double> z = Mat<double>::Zero(1, 3);
    const int bad = 3;
    EXPECT_THROW(training::weighted_cross_entropy(z, std::span(&bad, 1), training::uniform_weights), ConfigError);
    const std::vector<int> two = {0, 1};
    EXPECT_THROW(training::weighted_cross_entropy(z, two, training::uniform_weights), ConfigError);
}

// ---------------------------------------------------------------- clipping

TEST(ClipGradients, ScalesDownToMax) {
    nn::ParameterSet<double> ps;
    auto &p = ps.add("w", {4});
    p.grad << 6.0, 8.0, 0.0, 0.0;
    EXPECT_DOUBLE_EQ(training::clip_gradients(ps, 1.0), 10.0);
    EXPECT_NEAR(p.grad(0, 0), 0.6, 1e-15);
    EXPECT_NEAR(p.grad(0, 1), 0.8, 1e-15);
    EXPECT_NEAR(training::grad_norm(ps), 1.0, 1e-12);
}

TEST(ClipGradients, LeavesSmallGradientsAlone) {
    nn::ParameterSet<double> ps;
    auto &p = ps.add("w", {2});
    p.grad << 0.3, 0.4;
    EXPECT_DOUBLE_EQ(training::clip_gradients(ps, 1.0), 0.5);
    EXPECT_EQ(p.grad(0, 0), 0.3);
    EXPECT_EQ(p.grad(0, 1), 0.4);
}

TEST(ClipGradients, RandomFixturesPostNormIsMinOfPreAndMax) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        nn::ParameterSet<double> ps;
        const int nparams = 1 + static_cast<int>(rng.below(5));
        for (int k = 0; k < nparams; ++k) {
            const auto r = static_cast<Eigen::Index>(1 + rng.below(6));
            const auto c = static_cast<Eigen::Index>(1 + rng.below(6));
            auto &p = ps.add("p" + std::to_string(k), {r, c});
            const double scale = std::pow(10.0, rng.uniform(-3.0, 2.0));
            for (Eigen::Index i = 0; i < p.grad.size(); ++i) {
                p.grad.data()[i] = rng.normal(0.0, scale);
            }
        }
        const double max_norm = rng.uniform(0.01, 5.0);
        const double pre = training::clip_gradients(ps, max_norm);
        // independent recomputation
        double sq = 0.0;
        for (const auto &p : ps) {
            for (Eigen::Index i = 0; i < p->grad.size(); ++i) {
                sq += p->grad.data()[i] * p->grad.data()[i];
            }
        }
        EXPECT_NEAR(std::sqrt(sq), std::min(pre, max_norm), 1e-6) << "trial " << trial;
    }
}

TEST(ClipGradients, PreservesDirectionAndSkipsFrozen) {
    nn::ParameterSet<double> ps;
    auto &a = ps.add("a", {3});
    auto &b = ps.add("b", {1});
    a.grad << 3.0, 0.0, 4.0;
    b.grad << 100.0;
    b.trainable = false;
    EXPECT_DOUBLE_EQ(training::clip_gradients(ps, 2.5), 5.0);
    EXPECT_NEAR(a.grad(0, 0), 1.5, 1e-15);
    EXPECT_NEAR(a.grad(0, 2), 2.0, 1e-15);
    EXPECT_EQ(b.grad(0, 0), 100.0);
}

// ---------------------------------------------------------------- optimizer

TEST(AdamW, MatchesTorchReferenceSteps) {
    nn::ParameterSet<double> ps;
    auto &p = ps.add("w", {3});
    p.value << 1.0, -2.0, 0.5;
    training::AdamW<double> opt(ps, {.lr = 0.1, .weight_decay = 0.01});
    const double grads[3][3] = {{0.5, -1.0, 0.0}, {0.1, 0.3, -0.2}, {-0.4, 0.2, 1.5}};
    // torch.optim.AdamW(lr=0.1, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01)
    const double expected[3][3] = {{0.89900000199999996, -1.898000001, 0.4995},
                                   {0.81779690638265179, -1.8533171424282264, 0.57341417709617226},
                                   {0.80760916944982908, -1.8310127735702886, 0.51711780894184833}};
    for (int s = 0; s < 3; ++s) {
        for (int i = 0; i < 3; ++i) {
            p.grad(0, i) = grads[s][i];
        }
        opt.step();
        for (int i = 0; i < 3; ++i) {
            EXPECT_NEAR(p.value(0, i), expected[s][i], 1e-14) << "step " << s + 1;
        }
    }
    EXPECT_EQ(opt.steps(), 3);
}

TEST(AdamW, FrozenParametersUntouched) {
    nn::ParameterSet<double> ps;
    auto &p = ps.add("w", {2});
    p.value << 1.0, 2.0;
    p.grad << 1.0, 1.0;
    p.trainable = false;
    training::AdamW<double> opt(ps, {});
    opt.step();
    EXPECT_EQ(p.value(0, 0), 1.0);
    EXPECT_EQ(p.value(0, 1), 2.0);
}

// ---------------------------------------------------------------- config

TEST(TrainConfig, DefaultsAndValidation) {
    TrainConfig c;
    EXPECT_EQ(c.epochs, 3);
    EXPECT_EQ(c.batch_size, 32);
    EXPECT_DOUBLE_EQ(c.effective_lr(Kind::cnn), 1e-3);
    EXPECT_DOUBLE_EQ(c.effective_lr(Kind::encoder_bilstm), 2e-5);
    EXPECT_DOUBLE_EQ(*c.grad_clip_norm, 1.0);
    EXPECT_NO_THROW(c.validate());

    auto bad = c;
    bad.epochs = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.learning_rate = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.grad_clip_norm = -1.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.optimizer = "sgd";
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TrainConfig, JsonRoundTrip) {
    TrainConfig c;
    c.epochs = 7;
    c.learning_rate = 3e-4;
    c.grad_clip_norm.reset();
    c.use_class_weights = true;
    c.seed = 1234567890123ULL;
    const auto back = TrainConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    EXPECT_FALSE(back.grad_clip_norm.has_value());
    EXPECT_THROW(TrainConfig::from_json({{"epoch", 3}}), ConfigError);
    EXPECT_THROW(TrainConfig::from_json({{"epochs", "three"}}), ConfigError);
    EXPECT_THROW(TrainConfig::from_json({{"epochs", 0}}), ConfigError);
}

TEST(LearningCurves, JsonSeriesAndCsv) {
    training::LearningCurves c;
    c.epochs.push_back({1, 0.9, 0.5, 0.8, 0.6});
    c.epochs.push_back({2, 0.5, 0.75, 0.7, 0.7});
    const auto j = c.to_json();
    EXPECT_EQ(j["schema"], "hsd.curves");
    EXPECT_EQ(j["version"], 1);
    EXPECT_EQ(j["series"]["val_loss"].size(), 2U);
    EXPECT_EQ(j["series"]["epoch"][1], 2);
    const auto csv = c.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,train_accuracy,val_loss,val_accuracy");
    EXPECT_NE(csv.find("\n2,0.5,0.75,"), std::string::npos);
}

// ---------------------------------------------------------------- presets

TEST(Presets, TenConfigurations) {
    const auto all = training::presets();
    ASSERT_EQ(all.size(), 10U);
    std::set<std::string> names;
    for (const auto &p : all) {
        names.insert(p.name);
        EXPECT_NO_THROW(p.spec.validate()) << p.name;
        EXPECT_NO_THROW(p.train.validate()) << p.name;
        EXPECT_EQ(models::ModelSpec::from_json(p.spec.to_json()).to_json(), p.spec.to_json());
        EXPECT_EQ(TrainConfig::from_json(p.train.to_json()).to_json(), p.train.to_json());
    }
    EXPECT_EQ(names.size(), 10U);

    const auto orig = training::find_preset("bert_cnn");
    const auto updated = training::find_preset("updated_bert_cnn");
    EXPECT_EQ(orig.title, "BERT+CNN");
    EXPECT_EQ(updated.title, "UPDATED BERT+CNN");
    EXPECT_FALSE(orig.train.grad_clip_norm.has_value());
    EXPECT_FALSE(orig.train.use_class_weights);
    EXPECT_TRUE(updated.train.use_class_weights);
    EXPECT_EQ(updated.spec.kernel_sizes, std::vector<int>{3});
    EXPECT_EQ(training::find_preset("distilbert_bilstm", "b", "d").spec.encoder_name, "d");
    EXPECT_THROW(training::find_preset("gpt"), ConfigError);
}

// ---------------------------------------------------------------- train

TEST(Train, OverfitsThirtyTwoExamples) {
    const auto sp = synthetic_splits();
    corpus::Dataset small = sp.train;
    small.rows.resize(32);
    TrainConfig cfg;
    cfg.epochs = 25;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-2;
    cfg.seed = 5;
    for (const Kind kind : {Kind::cnn, Kind::lstm}) {
        auto spec = small_cnn();
        spec.kind = kind;
        const auto r = training::train(spec, small, small, cfg);
        const auto enc = training::encode_dataset(r.model, small);
        EXPECT_EQ(training::evaluate_pass(r.model, enc).accuracy, 1.0) << models::kind_name(kind);
        ASSERT_EQ(r.curves.size(), 25U);
        EXPECT_LT(r.curves.epochs.back().train_loss, r.curves.epochs.front().train_loss);
        EXPECT_EQ(r.steps, 25U * 8U);
    }
}

TEST(Train, SeededRunsAreIdentical) {
    const auto sp = synthetic_splits();
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 9;
    const auto a = training::train(small_cnn(), sp.train, sp.val, cfg);
    const auto b = training::train(small_cnn(), sp.train, sp.val, cfg);
    EXPECT_EQ(a.curves, b.curves);
    auto ia = a.model.params->begin();
    for (const auto &p : *b.model.params) {
        EXPECT_EQ((*ia)->value, p->value) << p->name;
        ++ia;
    }
    cfg.seed = 10;
    const auto c = training::train(small_cnn(), sp.train, sp.val, cfg);
    EXPECT_NE(a.curves, c.curves);
}

TEST(Train, EncoderHybridDeterministic) {
    // tiny randomly initialised encoder; exercises the fine-tuning path end to end
    const auto sp = synthetic_splits();
    corpus::Dataset tr = sp.train, va = sp.val;
    tr.rows.resize(48);
    va.rows.resize(16);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    const auto spec = tiny_spec(Kind::encoder_cnn);
    const auto a = training::train(spec, tr, va, cfg);
    const auto b = training::train(spec, tr, va, cfg);
    EXPECT_EQ(a.curves, b.curves);
    EXPECT_EQ(a.curves.size(), 2U);
    for (const auto &e : a.curves.epochs) {
        EXPECT_TRUE(std::isfinite(e.train_loss));
        EXPECT_GE(e.val_accuracy, 0.0);
        EXPECT_LE(e.val_accuracy, 1.0);
    }
}

TEST(Train, FrozenEncoderKeepsPretrainedWeights) {
    const auto sp = synthetic_splits();
    corpus::Dataset tr = sp.train, va = sp.val;
    tr.rows.resize(16);
    va.rows.resize(8);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-2;
    cfg.freeze_encoder = true;
    const auto spec = tiny_spec(Kind::encoder_bilstm);
    const auto before = models::build_model(spec, cfg.seed);
    const auto r = training::train(spec, tr, va, cfg);
    for (const auto &p : *r.model.params) {
        if (p->name.rfind("encoder.", 0) == 0) {
            EXPECT_EQ(p->value, before.params->at(p->name).value) << p->name;
        }
    }
}

TEST(Train, CheckpointHoldsMinimumValidationLoss) {
    const auto sp = synthetic_splits();
    const auto path = std::filesystem::temp_directory_path() / "hsd_test_best.safetensors";
    std::filesystem::remove(path);
    // validation rows carry rotated labels, so fitting the training set
    // drives validation loss up after an early minimum
    corpus::Dataset val = sp.train;
    val.rows.resize(100);
    for (auto &row : val.rows) {
        row.label = (row.label + 1) % 3;
    }
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.seed = 3;
    const auto r = training::train(small_cnn(), sp.train, val, cfg, {.path = path.string()});
    ASSERT_EQ(r.curves.size(), 6U);

    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    for (const auto &e : r.curves.epochs) {
        if (e.val_loss < best) {
            best = e.val_loss;
            best_epoch = e.epoch;
        }
    }
    EXPECT_EQ(r.best_epoch, best_epoch);
    EXPECT_EQ(r.best_val_loss, best);
    EXPECT_LT(best_epoch, 6) << "fixture should peak before the last epoch";

    const auto loaded = models::load_checkpoint<float>(path.string());
    const auto enc = training::encode_dataset(loaded, val);
    EXPECT_EQ(training::evaluate_pass(loaded, enc).mean_loss, best);
    EXPECT_EQ(training::evaluate_pass(r.model, enc).mean_loss, best);
    std::filesystem::remove(path);
}

TEST(Train, ClassWeightsDoNotHurtMinorityRecall) {
    // 9:1 task. Minority (class 0) rows differ from majority rows by one
    // marker word; half of the majority rows contain a decoy word.
    const std::vector<std::string> fill = {"alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "zeta"};
    std::vector<double> recall_plain, recall_weighted;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed * 101);
        std::vector<std::pair<std::string, int>> items;
        const auto words = [&](int n) {
            std::string s;
            for (int i = 0; i < n; ++i) {
                s += (s.empty() ? "" : " ") + fill[rng.below(fill.size())];
            }
            return s;
        };
        for (int i = 0; i < 400; ++i) {
            const double u = rng.uniform();
            const int label = u < 0.05 ? 0 : u < 0.5 ? 1 : 2;  // class 0 : class 1 = 1 : 9
            std::string text = words(4);
            if (label == 0) {
                text += rng.bernoulli(0.7) ? " marker" : " decoy";
            } else if (rng.bernoulli(0.3)) {
                text += " decoy";
            }
            text += label == 2 ? " calm" : " loud";
            items.emplace_back(text, label);
        }
        const auto ds = make_dataset(items);
        const auto sp = corpus::split(ds, {.seed = seed});
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 16;
        cfg.seed = seed;
        const auto minority_recall = [&](bool weighted) {
            cfg.use_class_weights = weighted;
            const auto r = training::train(small_cnn(), sp.train, sp.val, cfg);
            if (weighted) {
                EXPECT_GT(r.class_weights[0], r.class_weights[1]);
            }
            const auto test = training::encode_dataset(r.model, sp.test);
            const auto pass = training::evaluate_pass(r.model, test);
            std::size_t hit = 0, n = 0;
            for (std::size_t i = 0; i < test.size(); ++i) {
                if (test.labels[i] == 0) {
                    ++n;
                    hit += pass.predictions[i] == 0 ? 1 : 0;
                }
            }
            return static_cast<double>(hit) / static_cast<double>(n);
        };
        recall_plain.push_back(minority_recall(false));
        recall_weighted.push_back(minority_recall(true));
    }
    const auto mean = [](const std::vector<double> &v) {
        double s = 0.0;
        for (const double x : v) {
            s += x;
        }
        return s / static_cast<double>(v.size());
    };
    EXPECT_GE(mean(recall_weighted), mean(recall_plain))
        << "plain " << fmt_g(mean(recall_plain)) << " weighted " << fmt_g(mean(recall_weighted));
}

TEST(Train, NonFiniteLossAbortsWithDiagnostics) {
    const auto sp = synthetic_splits();
    corpus::Dataset tr = sp.train, va = sp.val;
    tr.rows.resize(20);
    va.rows.resize(5);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 10;
    auto spec = small_cnn();
    auto m = models::build_model(spec, 1, training::baseline_tokenizer(spec, tr, cfg));
    m.params->at("fc.bias").value(0, 0) = std::numeric_limits<float>::quiet_NaN();
    const auto etr = training::encode_dataset(m, tr);
    const auto eva = training::encode_dataset(m, va);
    try {
        training::fit(std::move(m), etr, eva, cfg);
        FAIL() << "expected TrainingError";
    } catch (const TrainingError &e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("epoch 1 step 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("batch row ids ["), std::string::npos) << msg;
        EXPECT_NE(msg.find("recent losses ["), std::string::npos) << msg;
    }
}

TEST(Train, RejectsEmptySplits) {
    const auto sp = synthetic_splits();
    EXPECT_THROW(training::train(small_cnn(), sp.train, corpus::Dataset{}, TrainConfig{}), DataError);
}

TEST(RunManifest, RecordsConfigSeedAndSplitHash) {
    const auto ds = corpus::load_dataset(data_path("synthetic_tweets.csv"));
    const corpus::SplitSpec ss;
    const auto splits = corpus::split(ds, ss);
    const auto sm = corpus::split_manifest(ds, ss, splits);
    training::RunSummary r;
    r.spec = small_cnn();
    r.config.seed = 77;
    r.split_hash = training::split_manifest_hash(sm);
    r.final_metrics = {{"accuracy", 0.5}};
    const auto j = training::run_manifest(r);
    EXPECT_EQ(j["schema"], "hsd.run");
    EXPECT_EQ(j["version"], 1);
    EXPECT_EQ(j["seed"], 77);
    EXPECT_EQ(j["config"]["seed"], 77);
    EXPECT_EQ(j["split_manifest_sha256"].get<std::string>().size(), 64U);
    EXPECT_EQ(j["split_manifest_sha256"], training::split_manifest_hash(nlohmann::json::parse(sm.dump(2))));
    EXPECT_EQ(j["final_metrics"]["accuracy"], 0.5);
}

}  // namespace
}  // namespace hsd::test
