#pragma once

#include "hsd/models/spec.hpp"
#include "hsd/nn/layers.hpp"
#include "hsd/nn/transformer.hpp"

#include <functional>
#include <memory>
#include <type_traits>
#include <span>

namespace hsd::models {

using nn::Mat;
using nn::TrainContext;

// Opaque per-example record of a training forward pass.
struct Tape {
    virtual ~Tape() = default;
};

// One example in, a 1 x 3 row of logits out. `ids` is the unmasked prefix.
template <typename S>
class Classifier {
  public:
    virtual ~Classifier() = default;

    virtual Mat<S> forward(std::span<const std::int32_t> ids, TrainContext *ctx, std::unique_ptr<Tape> *tape) const = 0;
    virtual void backward(const Tape &tape, const Mat<S> &dlogits) const = 0;
    // width of the representation fed to the output layer
    [[nodiscard]] virtual Eigen::Index feature_width() const = 0;
    [[nodiscard]] virtual nn::TransformerEncoder<S> *encoder() { return nullptr; }
    // Seeded initialisation; the encoder of encoder kinds is skipped unless
    // `include_encoder` (it normally comes from a pretrained checkpoint).
    virtual void init(Rng &rng, bool include_encoder) = 0;
};

namespace detail {

// Produces per-position features: a trainable embedding table or a pretrained encoder.
template <typename S>
struct EmbeddingSource {
    nn::Parameter<S> *table = nullptr;
    std::int32_t pad_id = 0;

    struct SourceTape {
        std::vector<std::int32_t> ids;
    };

    EmbeddingSource(nn::ParameterSet<S> &ps, int vocab, int dim, std::int32_t pad)
        : table(&ps.add("embedding.weight", {vocab, dim})), pad_id(pad) {}

    void init(Rng &rng) {
        nn::init_normal(*table, 1.0, rng);
        if (pad_id >= 0 && pad_id < table->value.rows()) {
            table->value.row(pad_id).setZero();
        }
    }

    [[nodiscard]] Eigen::Index width() const { return table->value.cols(); }

    Mat<S> forward(std::span<const std::int32_t> ids, TrainContext *, SourceTape *t) const {
        if (t) {
            t->ids.assign(ids.begin(), ids.end());
        }
        return nn::gather_rows(*table, ids);
    }

    void backward(const SourceTape &t, const Mat<S> &dx) const {
        if (!table->trainable) {
            return;
        }
        for (std::size_t i = 0; i < t.ids.size(); ++i) {
            // the padding row stays the zero vector
            if (t.ids[i] != pad_id) {
                table->grad.row(t.ids[i]) += dx.row(static_cast<Eigen::Index>(i));
            }
        }
    }
};

template <typename S>
struct EncoderSource {
    std::unique_ptr<nn::TransformerEncoder<S>> enc;
    using SourceTape = typename nn::TransformerEncoder<S>::Tape;

    EncoderSource(nn::ParameterSet<S> &ps, const nn::EncoderConfig &cfg, bool pooler)
        : enc(std::make_unique<nn::TransformerEncoder<S>>(ps, cfg, "encoder.", pooler)) {}

    [[nodiscard]] Eigen::Index width() const { return enc->config().hidden; }

    Mat<S> forward(std::span<const std::int32_t> ids, TrainContext *ctx, SourceTape *t) const {
        if (ids.empty()) {
            throw ConfigError("encoder models need at least one unmasked token");
        }
        // a frozen encoder runs without dropout and records nothing
        if (!enc->trainable()) {
            return enc->forward(ids, nullptr, nullptr);
        }
        return enc->forward(ids, ctx, t);
    }

    void backward(const SourceTape &t, const Mat<S> &dx) const {
        if (enc->trainable()) {
            enc->backward(t, dx);
        }
    }
};

// Heads: features (L x D) -> logits (1 x 3).
template <typename S>
struct CnnHead {
    std::vector<nn::ConvMaxPool<S>> convs;
    nn::Dropout<S> drop;
    nn::Linear<S> fc;

    struct HeadTape {
        std::vector<typename nn::ConvMaxPool<S>::Tape> convs;
        Mat<S> mask, pooled;
        Eigen::Index rows = 0;
    };

    CnnHead(nn::ParameterSet<S> &ps, Eigen::Index in, const ModelSpec &spec) : drop{spec.dropout} {
        for (std::size_t i = 0; i < spec.kernel_sizes.size(); ++i) {
            convs.push_back(nn::ConvMaxPool<S>::make(ps, "convs." + std::to_string(i), in, spec.conv_filters,
                                                     spec.kernel_sizes[i]));
        }
        fc = nn::Linear<S>::make(ps, "fc", static_cast<Eigen::Index>(spec.conv_filters * spec.kernel_sizes.size()),
                                 num_classes);
    }

    void init(Rng &rng) {
        for (const auto &c : convs) {
            c.init(rng);
        }
        fc.init(rng);
    }

    [[nodiscard]] Eigen::Index width() const { return fc.in_features(); }

    Mat<S> forward(const Mat<S> &x, TrainContext *ctx, HeadTape *t) const {
        Mat<S> pooled(1, width());
        if (t) {
            t->convs.assign(convs.size(), {});
            t->rows = x.rows();
        }
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            const Mat<S> p = convs[i].forward(x, t ? &t->convs[i] : nullptr);
            pooled.middleCols(at, p.cols()) = p;
            at += p.cols();
        }
        Mat<S> scratch;
        Mat<S> h = drop.forward(pooled, ctx, t ? &t->mask : &scratch);
        if (t) {
            t->pooled = h;
        }
        return fc.forward(h);
    }

    Mat<S> backward(const HeadTape &t, const Mat<S> &dlogits, bool need_dx) const {
        const Mat<S> dh = nn::Dropout<S>::backward(t.mask, fc.backward(t.pooled, dlogits));
        Mat<S> dx = need_dx ? Mat<S>::Zero(t.rows, convs.front().in_channels) : Mat<S>{};
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            const Eigen::Index f = convs[i].filters();
            const Mat<S> part = convs[i].backward(t.convs[i], dh.middleCols(at, f), need_dx);
            if (need_dx) {
                dx += part;
            }
            at += f;
        }
        return dx;
    }
};

template <typename S>
struct LstmHead {
    nn::Lstm<S> lstm;
    nn::Dropout<S> drop;
    nn::Linear<S> fc;

    struct HeadTape {
        typename nn::Lstm<S>::Tape lstm;
        Mat<S> mask, state;
    };

    LstmHead(nn::ParameterSet<S> &ps, Eigen::Index in, const ModelSpec &spec, bool bidirectional)
        : lstm(nn::Lstm<S>::make(ps, "lstm", in, spec.lstm_hidden, spec.lstm_layers, bidirectional)),
          drop{spec.dropout} {
        fc = nn::Linear<S>::make(ps, "fc", lstm.output_width(), num_classes);
    }

    void init(Rng &rng) {
        lstm.init(rng);
        fc.init(rng);
    }

    [[nodiscard]] Eigen::Index width() const { return lstm.output_width(); }

    Mat<S> forward(const Mat<S> &x, TrainContext *ctx, HeadTape *t) const {
        const Mat<S> state = lstm.forward(x, t ? &t->lstm : nullptr);
        Mat<S> scratch;
        Mat<S> h = drop.forward(state, ctx, t ? &t->mask : &scratch);
        if (t) {
            t->state = h;
        }
        return fc.forward(h);
    }

    Mat<S> backward(const HeadTape &t, const Mat<S> &dlogits, bool need_dx) const {
        const Mat<S> dh = nn::Dropout<S>::backward(t.mask, fc.backward(t.state, dlogits));
        return lstm.backward(t.lstm, dh, need_dx);
    }
};

// Sequence-classification heads of the two encoder families: BERT pools the
// first position through its pooler; DistilBERT uses pre_classifier + ReLU.
template <typename S>
struct ClsHead {
    nn::TransformerEncoder<S> *enc = nullptr;
    nn::Linear<S> pre;  // distilbert only
    nn::Dropout<S> drop;
    nn::Linear<S> classifier;

    struct HeadTape {
        typename nn::TransformerEncoder<S>::Tape pool;
        Mat<S> h0, pre_out, mask, feat;
        Eigen::Index rows = 0;
    };

    ClsHead(nn::ParameterSet<S> &ps, nn::TransformerEncoder<S> *encoder, const ModelSpec &spec)
        : enc(encoder), drop{spec.dropout} {
        const Eigen::Index h = encoder->config().hidden;
        if (!encoder->config().is_bert()) {
            pre = nn::Linear<S>::make(ps, "pre_classifier", h, h);
        }
        classifier = nn::Linear<S>::make(ps, "classifier", h, num_classes);
    }

    void init(Rng &rng) {
        if (pre.w) {
            pre.init(rng);
        }
        classifier.init(rng);
    }

    [[nodiscard]] Eigen::Index width() const { return classifier.in_features(); }

    Mat<S> forward(const Mat<S> &x, TrainContext *ctx, HeadTape *t) const {
        Mat<S> feat;
        if (enc->has_pooler()) {
            feat = enc->pool(x, t ? &t->pool : nullptr);
        } else {
            const Mat<S> h0 = x.topRows(1);
            feat = pre.forward(h0).cwiseMax(S(0));
            if (t) {
                t->h0 = h0;
                t->pre_out = feat;
            }
        }
        Mat<S> scratch;
        feat = drop.forward(feat, ctx, t ? &t->mask : &scratch);
        if (t) {
            t->feat = feat;
            t->rows = x.rows();
        }
        return classifier.forward(feat);
    }

    Mat<S> backward(const HeadTape &t, const Mat<S> &dlogits, bool need_dx) const {
        const Mat<S> dfeat = nn::Dropout<S>::backward(t.mask, classifier.backward(t.feat, dlogits));
        if (enc->has_pooler()) {
            if (!need_dx) {
                return {};
            }
            return enc->pool_backward(t.pool, dfeat, t.rows);
        }
        const Mat<S> dz = (t.pre_out.array() > S(0)).select(dfeat, Mat<S>::Zero(1, dfeat.cols()));
        Mat<S> dh0 = pre.backward(t.h0, dz, need_dx);
        if (!need_dx) {
            return {};
        }
        Mat<S> dx = Mat<S>::Zero(t.rows, dfeat.cols());
        dx.topRows(1) = dh0;
        return dx;
    }
};

template <typename S, typename Source, typename Head>
class Composite final : public Classifier<S> {
  public:
    struct CompositeTape final : Tape {
        typename Source::SourceTape source;
        typename Head::HeadTape head;
    };

    Composite(Source source, std::function<Head(Source &)> make_head)
        : source_(std::move(source)), head_(make_head(source_)) {}

    Source &source() { return source_; }
    Head &head() { return head_; }

    Mat<S> forward(std::span<const std::int32_t> ids, TrainContext *ctx, std::unique_ptr<Tape> *tape) const override {
        CompositeTape *t = nullptr;
        if (tape) {
            auto owned = std::make_unique<CompositeTape>();
            t = owned.get();
            *tape = std::move(owned);
        }
        const Mat<S> x = source_.forward(ids, ctx, t ? &t->source : nullptr);
        return head_.forward(x, ctx, t ? &t->head : nullptr);
    }

    void backward(const Tape &tape, const Mat<S> &dlogits) const override {
        const auto &t = static_cast<const CompositeTape &>(tape);
        const bool source_trainable = source_trains();
        Mat<S> dx = head_.backward(t.head, dlogits, source_trainable);
        if (source_trainable) {
            source_.backward(t.source, dx);
        }
    }

    [[nodiscard]] Eigen::Index feature_width() const override { return head_.width(); }

    void init(Rng &rng, bool include_encoder) override {
        if constexpr (std::is_same_v<Source, EncoderSource<S>>) {
            if (include_encoder) {
                source_.enc->init(rng);
            }
        } else {
            source_.init(rng);
        }
        head_.init(rng);
    }

    nn::TransformerEncoder<S> *encoder() override {
        if constexpr (std::is_same_v<Source, EncoderSource<S>>) {
            return source_.enc.get();
        } else {
            return nullptr;
        }
    }

  private:
    [[nodiscard]] bool source_trains() const {
        if constexpr (std::is_same_v<Source, EncoderSource<S>>) {
            return source_.enc->trainable();
        } else {
            return source_.table->trainable;
        }
    }

    Source source_;
    Head head_;
};

}  // namespace detail

// Registers every parameter for `spec` and wires the network; values are
// left for the caller to initialise or load.
template <typename S>
std::unique_ptr<Classifier<S>> make_classifier(nn::ParameterSet<S> &ps, const ModelSpec &spec, int vocab_size,
                                               std::int32_t pad_id, const nn::EncoderConfig *encoder) {
    using namespace detail;
    switch (spec.kind) {
    case Kind::cnn:
        return std::make_unique<Composite<S, EmbeddingSource<S>, CnnHead<S>>>(
            EmbeddingSource<S>(ps, vocab_size, spec.embed_dim, pad_id),
            [&](EmbeddingSource<S> &src) { return CnnHead<S>(ps, src.width(), spec); });
    case Kind::lstm:
    case Kind::bilstm:
        return std::make_unique<Composite<S, EmbeddingSource<S>, LstmHead<S>>>(
            EmbeddingSource<S>(ps, vocab_size, spec.embed_dim, pad_id), [&](EmbeddingSource<S> &src) {
                return LstmHead<S>(ps, src.width(), spec, spec.kind == Kind::bilstm);
            });
    case Kind::encoder:
        return std::make_unique<Composite<S, EncoderSource<S>, ClsHead<S>>>(
            EncoderSource<S>(ps, *encoder, encoder->is_bert()),
            [&](EncoderSource<S> &src) { return ClsHead<S>(ps, src.enc.get(), spec); });
    case Kind::encoder_cnn:
        return std::make_unique<Composite<S, EncoderSource<S>, CnnHead<S>>>(
            EncoderSource<S>(ps, *encoder, false),
            [&](EncoderSource<S> &src) { return CnnHead<S>(ps, src.width(), spec); });
    case Kind::encoder_bilstm:
        return std::make_unique<Composite<S, EncoderSource<S>, LstmHead<S>>>(
            EncoderSource<S>(ps, *encoder, false),
            [&](EncoderSource<S> &src) { return LstmHead<S>(ps, src.width(), spec, true); });
    }
    throw SpecError("unhandled model kind");
}

}  // namespace hsd::models
