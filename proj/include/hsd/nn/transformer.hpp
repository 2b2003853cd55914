#pragma once

#include "hsd/core/error.hpp"
#include "hsd/nn/layers.hpp"
#include "hsd/nn/safetensors.hpp"

#include "json.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hsd::nn {

// Architecture of a pretrained BERT-family encoder, read from a Hugging Face
// config.json. Only the two post-LayerNorm families used here are accepted.
struct EncoderConfig {
    std::string model_type;  // "bert" or "distilbert"
    int vocab_size = 0;
    int hidden = 0;
    int layers = 0;
    int heads = 0;
    int intermediate = 0;
    int max_positions = 0;
    int type_vocab_size = 0;  // bert only
    double layer_norm_eps = 1e-12;
    double hidden_dropout = 0.1;
    double attention_dropout = 0.1;

    [[nodiscard]] bool is_bert() const { return model_type == "bert"; }

    void validate() const {
        if (model_type != "bert" && model_type != "distilbert") {
            throw CheckpointError("unsupported encoder model_type '" + model_type + "'");
        }
        if (hidden <= 0 || layers <= 0 || heads <= 0 || intermediate <= 0 || max_positions <= 0 || vocab_size <= 0) {
            throw CheckpointError("encoder config has non-positive dimensions");
        }
        if (hidden % heads != 0) {
            throw CheckpointError("hidden size " + std::to_string(hidden) + " not divisible by " +
                                  std::to_string(heads) + " heads");
        }
        if (is_bert() && type_vocab_size <= 0) {
            throw CheckpointError("bert config needs type_vocab_size >= 1");
        }
    }

    static EncoderConfig from_hf(const nlohmann::json &j) {
        EncoderConfig c;
        try {
            c.model_type = j.at("model_type").get<std::string>();
            if (c.model_type == "bert") {
                c.vocab_size = j.at("vocab_size").get<int>();
                c.hidden = j.at("hidden_size").get<int>();
                c.layers = j.at("num_hidden_layers").get<int>();
                c.heads = j.at("num_attention_heads").get<int>();
                c.intermediate = j.at("intermediate_size").get<int>();
                c.max_positions = j.at("max_position_embeddings").get<int>();
                c.type_vocab_size = j.value("type_vocab_size", 2);
                c.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
                c.hidden_dropout = j.value("hidden_dropout_prob", 0.1);
                c.attention_dropout = j.value("attention_probs_dropout_prob", 0.1);
                const auto act = j.value("hidden_act", std::string("gelu"));
                if (act != "gelu") {
                    throw CheckpointError("unsupported activation " + act);
                }
                const auto pos = j.value("position_embedding_type", std::string("absolute"));
                if (pos != "absolute") {
                    throw CheckpointError("unsupported position_embedding_type " + pos);
                }
            } else if (c.model_type == "distilbert") {
                c.vocab_size = j.at("vocab_size").get<int>();
                c.hidden = j.at("dim").get<int>();
                c.layers = j.at("n_layers").get<int>();
                c.heads = j.at("n_heads").get<int>();
                c.intermediate = j.at("hidden_dim").get<int>();
                c.max_positions = j.at("max_position_embeddings").get<int>();
                c.hidden_dropout = j.value("dropout", 0.1);
                c.attention_dropout = j.value("attention_dropout", 0.1);
                const auto act = j.value("activation", std::string("gelu"));
                if (act != "gelu") {
                    throw CheckpointError("unsupported activation " + act);
                }
            }
        } catch (const nlohmann::json::exception &e) {
            throw CheckpointError(std::string("bad encoder config: ") + e.what());
        }
        c.validate();
        return c;
    }

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"model_type", model_type},       {"vocab_size", vocab_size},
                {"hidden", hidden},               {"layers", layers},
                {"heads", heads},                 {"intermediate", intermediate},
                {"max_positions", max_positions}, {"type_vocab_size", type_vocab_size},
                {"layer_norm_eps", layer_norm_eps}, {"hidden_dropout", hidden_dropout},
                {"attention_dropout", attention_dropout}};
    }

    static EncoderConfig from_json(const nlohmann::json &j) {
        EncoderConfig c;
        try {
            c.model_type = j.at("model_type").get<std::string>();
            c.vocab_size = j.at("vocab_size").get<int>();
            c.hidden = j.at("hidden").get<int>();
            c.layers = j.at("layers").get<int>();
            c.heads = j.at("heads").get<int>();
            c.intermediate = j.at("intermediate").get<int>();
            c.max_positions = j.at("max_positions").get<int>();
            c.type_vocab_size = j.at("type_vocab_size").get<int>();
            c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
            c.hidden_dropout = j.at("hidden_dropout").get<double>();
            c.attention_dropout = j.at("attention_dropout").get<double>();
        } catch (const nlohmann::json::exception &e) {
            throw CheckpointError(std::string("bad encoder config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

// Post-LN transformer encoder (BERT / DistilBERT) with hand-written backward.
// Parameters are registered under `prefix` with the Hugging Face names, minus
// the "bert." / "distilbert." model prefix.
template <typename S>
class TransformerEncoder {
  public:
    struct Layer {
        Linear<S> q, k, v, o, ff1, ff2;
        LayerNorm<S> ln1, ln2;
    };

    struct LayerTape {
        Mat<S> x, q, k, v, ctx;
        std::vector<Mat<S>> probs, prob_masks;
        Mat<S> attn_mask;
        typename LayerNorm<S>::Tape ln1;
        Mat<S> h1, f1, g;
        Mat<S> ff_mask;
        typename LayerNorm<S>::Tape ln2;
    };

    struct Tape {
        std::vector<std::int32_t> ids;
        typename LayerNorm<S>::Tape emb_ln;
        Mat<S> emb_mask;
        std::vector<LayerTape> layers;
        Mat<S> cls;           // pooler input (1 x H)
        Mat<S> pooled;        // tanh output
    };

    TransformerEncoder(ParameterSet<S> &ps, const EncoderConfig &cfg, const std::string &prefix, bool with_pooler)
        : cfg_(cfg), prefix_(prefix) {
        const Eigen::Index h = cfg.hidden;
        const std::string e = prefix + "embeddings.";
        word_ = &ps.add(e + "word_embeddings.weight", {cfg.vocab_size, h});
        pos_ = &ps.add(e + "position_embeddings.weight", {cfg.max_positions, h});
        if (cfg.is_bert()) {
            type_ = &ps.add(e + "token_type_embeddings.weight", {cfg.type_vocab_size, h});
        }
        emb_ln_ = LayerNorm<S>::make(ps, e + "LayerNorm", h, cfg.layer_norm_eps);
        for (int i = 0; i < cfg.layers; ++i) {
            Layer l;
            if (cfg.is_bert()) {
                const std::string p = prefix + "encoder.layer." + std::to_string(i) + ".";
                l.q = Linear<S>::make(ps, p + "attention.self.query", h, h);
                l.k = Linear<S>::make(ps, p + "attention.self.key", h, h);
                l.v = Linear<S>::make(ps, p + "attention.self.value", h, h);
                l.o = Linear<S>::make(ps, p + "attention.output.dense", h, h);
                l.ln1 = LayerNorm<S>::make(ps, p + "attention.output.LayerNorm", h, cfg.layer_norm_eps);
                l.ff1 = Linear<S>::make(ps, p + "intermediate.dense", h, cfg.intermediate);
                l.ff2 = Linear<S>::make(ps, p + "output.dense", cfg.intermediate, h);
                l.ln2 = LayerNorm<S>::make(ps, p + "output.LayerNorm", h, cfg.layer_norm_eps);
            } else {
                const std::string p = prefix + "transformer.layer." + std::to_string(i) + ".";
                l.q = Linear<S>::make(ps, p + "attention.q_lin", h, h);
                l.k = Linear<S>::make(ps, p + "attention.k_lin", h, h);
                l.v = Linear<S>::make(ps, p + "attention.v_lin", h, h);
                l.o = Linear<S>::make(ps, p + "attention.out_lin", h, h);
                l.ln1 = LayerNorm<S>::make(ps, p + "sa_layer_norm", h, cfg.layer_norm_eps);
                l.ff1 = Linear<S>::make(ps, p + "ffn.lin1", h, cfg.intermediate);
                l.ff2 = Linear<S>::make(ps, p + "ffn.lin2", cfg.intermediate, h);
                l.ln2 = LayerNorm<S>::make(ps, p + "output_layer_norm", h, cfg.layer_norm_eps);
            }
            layers_.push_back(l);
        }
        if (with_pooler) {
            if (!cfg.is_bert()) {
                throw SpecError("only bert encoders carry a pooler");
            }
            pooler_ = Linear<S>::make(ps, prefix + "pooler.dense", h, h);
        }
        for (auto &p : ps) {
            if (p->name.starts_with(prefix)) {
                owned_.push_back(p.get());
            }
        }
    }

    [[nodiscard]] const EncoderConfig &config() const noexcept { return cfg_; }
    [[nodiscard]] bool has_pooler() const noexcept { return pooler_.w != nullptr; }
    [[nodiscard]] const std::vector<Parameter<S> *> &parameters() const noexcept { return owned_; }

    [[nodiscard]] std::size_t numel() const {
        std::size_t n = 0;
        for (const auto *p : owned_) {
            n += p->numel();
        }
        return n;
    }

    void set_trainable(bool on) {
        for (auto *p : owned_) {
            p->trainable = on;
        }
    }
    [[nodiscard]] bool trainable() const { return !owned_.empty() && owned_.front()->trainable; }

    // Random init as in BERT pre-training: N(0, 0.02), zero biases, unit LayerNorm.
    void init(Rng &rng) {
        for (auto *p : owned_) {
            if (p->name.ends_with("LayerNorm.weight") || p->name.ends_with("layer_norm.weight")) {
                p->value.setOnes();
            } else if (p->name.ends_with(".bias")) {
                p->value.setZero();
            } else {
                init_normal(*p, 0.02, rng);
            }
        }
    }

    // Copies every encoder tensor from a Hugging Face checkpoint. Keys may carry
    // the "bert." / "distilbert." model prefix and LayerNorm gamma/beta aliases.
    void load_pretrained(const SafetensorsFile &f) {
        const std::string model_prefix = cfg_.is_bert() ? "bert." : "distilbert.";
        for (auto *p : owned_) {
            const std::string hf = p->name.substr(prefix_.size());
            std::vector<std::string> candidates = {model_prefix + hf, hf};
            if (hf.ends_with(".weight") && hf.find("LayerNorm") != std::string::npos) {
                const std::string alias = hf.substr(0, hf.size() - 6) + "gamma";
                candidates.push_back(model_prefix + alias);
                candidates.push_back(alias);
            } else if (hf.ends_with(".bias") && hf.find("LayerNorm") != std::string::npos) {
                const std::string alias = hf.substr(0, hf.size() - 4) + "beta";
                candidates.push_back(model_prefix + alias);
                candidates.push_back(alias);
            }
            bool found = false;
            for (const auto &c : candidates) {
                if (f.contains(c)) {
                    f.copy_to(c, *p);
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw CheckpointError(f.origin() + ": pretrained encoder is missing " + model_prefix + hf);
            }
        }
    }

    // Last hidden states for the given (unpadded) ids: L x H.
    Mat<S> forward(std::span<const std::int32_t> ids, TrainContext *ctx = nullptr, Tape *tape = nullptr) const {
        const auto len = static_cast<Eigen::Index>(ids.size());
        if (len == 0) {
            throw ConfigError("encoder input must contain at least one token");
        }
        if (len > cfg_.max_positions) {
            throw SpecError("sequence of " + std::to_string(len) + " tokens exceeds encoder maximum " +
                            std::to_string(cfg_.max_positions));
        }
        Mat<S> x = gather_rows(*word_, ids);
        x += pos_->value.topRows(len);
        if (type_) {
            x.rowwise() += type_->value.row(0);
        }
        x = emb_ln_.forward(x, tape ? &tape->emb_ln : nullptr);
        const Dropout<S> hid{cfg_.hidden_dropout};
        Mat<S> scratch;
        x = hid.forward(x, ctx, tape ? &tape->emb_mask : &scratch);
        if (tape) {
            tape->ids.assign(ids.begin(), ids.end());
            tape->layers.assign(layers_.size(), {});
        }
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            x = layer_forward(layers_[i], x, ctx, tape ? &tape->layers[i] : nullptr);
        }
        return x;
    }

    // Pooler on the first position: tanh(W h_0 + b), 1 x H.
    Mat<S> pool(const Mat<S> &hidden, Tape *tape = nullptr) const {
        Mat<S> cls = hidden.topRows(1);
        Mat<S> pooled = pooler_.forward(cls).array().tanh().matrix();
        if (tape) {
            tape->cls = cls;
            tape->pooled = pooled;
        }
        return pooled;
    }

    // Returns gradient w.r.t. the last hidden state contribution of the pooler.
    Mat<S> pool_backward(const Tape &t, const Mat<S> &dpooled, Eigen::Index len) const {
        const Mat<S> dz = (dpooled.array() * (S(1) - t.pooled.array().square())).matrix();
        Mat<S> dh = Mat<S>::Zero(len, cfg_.hidden);
        dh.topRows(1) = pooler_.backward(t.cls, dz);
        return dh;
    }

    void backward(const Tape &t, Mat<S> dx) const {
        for (std::size_t i = layers_.size(); i-- > 0;) {
            dx = layer_backward(layers_[i], t.layers[i], dx);
        }
        dx = Dropout<S>::backward(t.emb_mask, dx);
        dx = emb_ln_.backward(t.emb_ln, dx);
        scatter_rows(*word_, t.ids, dx);
        if (pos_->trainable) {
            pos_->grad.topRows(dx.rows()) += dx;
        }
        if (type_ && type_->trainable) {
            type_->grad.row(0) += dx.colwise().sum();
        }
    }

  private:
    Mat<S> layer_forward(const Layer &l, const Mat<S> &x, TrainContext *ctx, LayerTape *t) const {
        const Eigen::Index heads = cfg_.heads;
        const Eigen::Index dh = cfg_.hidden / heads;
        const S scale = S(1) / std::sqrt(static_cast<S>(dh));
        Mat<S> q = l.q.forward(x);
        Mat<S> k = l.k.forward(x);
        Mat<S> v = l.v.forward(x);
        Mat<S> ctx_out(x.rows(), cfg_.hidden);
        if (t) {
            t->probs.resize(static_cast<std::size_t>(heads));
            t->prob_masks.resize(static_cast<std::size_t>(heads));
        }
        const Dropout<S> attn_drop{cfg_.attention_dropout};
        for (Eigen::Index h = 0; h < heads; ++h) {
            Mat<S> scores = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
            Mat<S> p = softmax_rows(scores);
            Mat<S> mask;
            const Mat<S> pd = attn_drop.forward(p, ctx, &mask);
            ctx_out.middleCols(h * dh, dh) = pd * v.middleCols(h * dh, dh);
            if (t) {
                t->probs[static_cast<std::size_t>(h)] = std::move(p);
                t->prob_masks[static_cast<std::size_t>(h)] = std::move(mask);
            }
        }
        Mat<S> a = l.o.forward(ctx_out);
        Mat<S> amask;
        if (cfg_.is_bert()) {
            a = Dropout<S>{cfg_.hidden_dropout}.forward(a, ctx, &amask);
        }
        Mat<S> h1 = l.ln1.forward(a + x, t ? &t->ln1 : nullptr);
        Mat<S> f1 = l.ff1.forward(h1);
        Mat<S> g = f1.unaryExpr([](S z) { return gelu(z); });
        Mat<S> f2 = l.ff2.forward(g);
        Mat<S> fmask;
        f2 = Dropout<S>{cfg_.hidden_dropout}.forward(f2, ctx, &fmask);
        Mat<S> out = l.ln2.forward(f2 + h1, t ? &t->ln2 : nullptr);
        if (t) {
            t->x = x;
            t->q = std::move(q);
            t->k = std::move(k);
            t->v = std::move(v);
            t->ctx = std::move(ctx_out);
            t->attn_mask = std::move(amask);
            t->h1 = std::move(h1);
            t->f1 = std::move(f1);
            t->g = std::move(g);
            t->ff_mask = std::move(fmask);
        }
        return out;
    }

    Mat<S> layer_backward(const Layer &l, const LayerTape &t, const Mat<S> &dout) const {
        const Eigen::Index heads = cfg_.heads;
        const Eigen::Index dh = cfg_.hidden / heads;
        const S scale = S(1) / std::sqrt(static_cast<S>(dh));

        const Mat<S> dsum2 = l.ln2.backward(t.ln2, dout);
        const Mat<S> df2 = Dropout<S>::backward(t.ff_mask, dsum2);
        const Mat<S> dg = l.ff2.backward(t.g, df2);
        const Mat<S> gd = t.f1.unaryExpr([](S z) { return gelu_grad(z); });
        const Mat<S> df1 = dg.cwiseProduct(gd);
        Mat<S> dh1 = dsum2 + l.ff1.backward(t.h1, df1);

        const Mat<S> dsum1 = l.ln1.backward(t.ln1, dh1);
        const Mat<S> da = Dropout<S>::backward(t.attn_mask, dsum1);
        const Mat<S> dctx = l.o.backward(t.ctx, da);

        Mat<S> dq(t.x.rows(), cfg_.hidden);
        Mat<S> dk(t.x.rows(), cfg_.hidden);
        Mat<S> dv(t.x.rows(), cfg_.hidden);
        for (Eigen::Index h = 0; h < heads; ++h) {
            const auto &p = t.probs[static_cast<std::size_t>(h)];
            const auto &mask = t.prob_masks[static_cast<std::size_t>(h)];
            const Mat<S> pd = mask.size() == 0 ? p : Mat<S>(p.cwiseProduct(mask));
            const Mat<S> dctx_h = dctx.middleCols(h * dh, dh);
            dv.middleCols(h * dh, dh) = pd.transpose() * dctx_h;
            const Mat<S> dpd = dctx_h * t.v.middleCols(h * dh, dh).transpose();
            const Mat<S> dp = Dropout<S>::backward(mask, dpd);
            Mat<S> ds(p.rows(), p.cols());
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                const S dot = dp.row(r).dot(p.row(r));
                ds.row(r) = (p.row(r).array() * (dp.row(r).array() - dot)).matrix();
            }
            ds *= scale;
            dq.middleCols(h * dh, dh) = ds * t.k.middleCols(h * dh, dh);
            dk.middleCols(h * dh, dh) = ds.transpose() * t.q.middleCols(h * dh, dh);
        }
        Mat<S> dx = dsum1;
        dx += l.q.backward(t.x, dq);
        dx += l.k.backward(t.x, dk);
        dx += l.v.backward(t.x, dv);
        return dx;
    }

    EncoderConfig cfg_;
    std::string prefix_;
    Parameter<S> *word_ = nullptr;
    Parameter<S> *pos_ = nullptr;
    Parameter<S> *type_ = nullptr;
    LayerNorm<S> emb_ln_;
    std::vector<Layer> layers_;
    Linear<S> pooler_;
    std::vector<Parameter<S> *> owned_;
};

}  // namespace hsd::nn
