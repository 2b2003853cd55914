#pragma once

#include "hsd/core/error.hpp"
#include "hsd/corpus/dataset.hpp"
#include "hsd/corpus/split.hpp"
#include "hsd/models/model.hpp"
#include "hsd/textprep/tokenizer.hpp"
#include "hsd/training/config.hpp"
#include "hsd/training/loss.hpp"
#include "hsd/training/optim.hpp"

#include <fmt/format.h>

#include <deque>
#include <functional>
#include <numeric>

namespace hsd::training {

// A tokenised, labelled example set.
struct Encoded {
    std::vector<textprep::TokenSequence> inputs;
    std::vector<int> labels;
    std::vector<std::int64_t> row_ids;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

template <typename S>
Encoded encode_dataset(const models::Model<S> &m, const corpus::Dataset &ds) {
    Encoded e;
    e.inputs.reserve(ds.size());
    for (const auto &r : ds.rows) {
        e.inputs.push_back(m.encode(r.text));
        e.labels.push_back(r.label);
        e.row_ids.push_back(r.row_id);
    }
    return e;
}

struct EvalPass {
    double mean_loss = 0.0;  // unweighted mean cross-entropy
    double accuracy = 0.0;
    std::vector<int> predictions;
};

template <typename S>
EvalPass evaluate_pass(const models::Model<S> &m, const Encoded &data) {
    EvalPass r;
    if (data.size() == 0) {
        return r;
    }
    double loss = 0.0;
    std::size_t correct = 0;
    r.predictions.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto logits = m.logits(data.inputs[i]);
        const int y = data.labels[i];
        loss += weighted_cross_entropy(logits, std::span(&y, 1), uniform_weights);
        const int pred = models::predict_from_logits(logits).label;
        r.predictions.push_back(pred);
        correct += pred == y ? 1 : 0;
    }
    r.mean_loss = loss / static_cast<double>(data.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return r;
}

template <typename S>
struct TrainResult {
    models::Model<S> model;  // weights of the best validation epoch
    LearningCurves curves;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    ClassWeights class_weights = uniform_weights;
    std::size_t steps = 0;
};

using Logger = std::function<void(const std::string &)>;

// Fits an already-built model. Per step: forward, weighted loss, backward,
// optional global-norm clip, AdamW. Per epoch: a validation pass, a curve
// record, and a snapshot when validation loss strictly improves. The model
// is left holding the best snapshot.
template <typename S>
TrainResult<S> fit(models::Model<S> model, const Encoded &train_set, const Encoded &val_set, const TrainConfig &cfg,
                   const CheckpointPolicy &policy = {}, const Logger &log = {}) {
    cfg.validate();
    if (train_set.size() == 0 || val_set.size() == 0) {
        throw DataError("training and validation splits must be non-empty");
    }
    TrainResult<S> result{std::move(model)};
    auto &m = result.model;
    m.freeze_encoder(cfg.freeze_encoder);
    if (cfg.use_class_weights) {
        corpus::ClassCounts counts{};
        for (const int y : train_set.labels) {
            ++counts[static_cast<std::size_t>(y)];
        }
        result.class_weights = corpus::class_weights(counts);
    }

    AdamW<S> opt(*m.params, {.lr = cfg.effective_lr(m.spec.kind), .weight_decay = cfg.weight_decay});
    Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    Rng dropout_rng(cfg.seed + 1);
    nn::TrainContext ctx{&dropout_rng};

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<nn::Mat<S>> best;
    double best_loss = std::numeric_limits<double>::infinity();
    std::deque<double> history;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        order_rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto n = static_cast<Eigen::Index>(end - start);
            m.params->zero_grad();
            std::vector<std::unique_ptr<models::Tape>> tapes(static_cast<std::size_t>(n));
            nn::Mat<S> logits(n, num_classes);
            std::vector<int> labels(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::size_t ex = order[start + static_cast<std::size_t>(i)];
                logits.row(i) = m.net->forward(train_set.inputs[ex].real_ids(), &ctx, &tapes[static_cast<std::size_t>(i)]);
                labels[static_cast<std::size_t>(i)] = train_set.labels[ex];
            }
            nn::Mat<S> dlogits;
            const double loss = weighted_cross_entropy(logits, labels, result.class_weights, &dlogits);
            if (!std::isfinite(loss)) {
                std::string ids;
                for (std::size_t i = start; i < end; ++i) {
                    ids += (i > start ? "," : "") + std::to_string(train_set.row_ids[order[i]]);
                }
                std::string hist;
                for (const double h : history) {
                    hist += fmt::format("{}{:.6g}", hist.empty() ? "" : ",", h);
                }
                throw TrainingError(fmt::format("non-finite loss {} at epoch {} step {}; batch row ids [{}]; "
                                                "recent losses [{}]",
                                                loss, epoch, result.steps + 1, ids, hist));
            }
            history.push_back(loss);
            if (history.size() > 20) {
                history.pop_front();
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                m.net->backward(*tapes[static_cast<std::size_t>(i)], dlogits.row(i));
                correct += models::predict_from_logits(logits.row(i)).label == labels[static_cast<std::size_t>(i)];
            }
            if (cfg.grad_clip_norm) {
                clip_gradients(*m.params, *cfg.grad_clip_norm);
            }
            opt.step();
            ++result.steps;
            loss_sum += loss * static_cast<double>(n);
        }
        const auto val = evaluate_pass(m, val_set);
        EpochRecord rec{epoch, loss_sum / static_cast<double>(train_set.size()),
                        static_cast<double>(correct) / static_cast<double>(train_set.size()), val.mean_loss,
                        val.accuracy};
        result.curves.epochs.push_back(rec);
        const bool improved = val.mean_loss < best_loss;
        if (log) {
            log(fmt::format("epoch {}/{}: train_loss {:.4f} train_acc {:.4f} val_loss {:.4f} val_acc {:.4f}{}", epoch,
                            cfg.epochs, rec.train_loss, rec.train_accuracy, rec.val_loss, rec.val_accuracy,
                            improved ? " *" : ""));
        }
        if (improved) {
            best_loss = val.mean_loss;
            result.best_epoch = epoch;
            best.clear();
            for (const auto &p : *m.params) {
                best.push_back(p->value);
            }
            if (!policy.path.empty()) {
                models::save_checkpoint(m, policy.path);
            }
        }
    }
    if (!best.empty()) {
        std::size_t i = 0;
        for (auto &p : *m.params) {
            p->value = best[i++];
        }
    }
    result.best_val_loss = best_loss;
    return result;
}

// Tokenizer for a baseline: the one ModelSpec names, or a WordPiece vocabulary built from
// the cleaned training texts.
inline textprep::TokenizerAdapter baseline_tokenizer(const models::ModelSpec &spec, const corpus::Dataset &train,
                                                     const TrainConfig &cfg) {
    if (!spec.tokenizer.empty()) {
        return models::resolve_tokenizer(spec.tokenizer);
    }
    std::vector<textprep::CleanText> texts;
    texts.reserve(train.size());
    for (const auto &r : train.rows) {
        texts.push_back(textprep::clean_text(r.text));
    }
    return textprep::TokenizerAdapter(
        textprep::build_wordpiece_vocab(texts, static_cast<std::size_t>(cfg.vocab_max_size)));
}

template <typename S = float>
TrainResult<S> train(const models::ModelSpec &spec, const corpus::Dataset &train_split,
                     const corpus::Dataset &val_split, const TrainConfig &cfg, const CheckpointPolicy &policy = {},
                     const Logger &log = {}) {
    spec.validate();
    cfg.validate();
    if (train_split.empty() || val_split.empty()) {
        throw DataError("training and validation splits must be non-empty");
    }
    models::Model<S> m = models::uses_encoder(spec.kind)
                             ? models::build_model<S>(spec, cfg.seed)
                             : models::build_model<S>(spec, cfg.seed, baseline_tokenizer(spec, train_split, cfg));
    const auto tr = encode_dataset(m, train_split);
    const auto va = encode_dataset(m, val_split);
    return fit(std::move(m), tr, va, cfg, policy, log);
}

}  // namespace hsd::training
