#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/hash.hpp"
#include "hsd/core/io.hpp"
#include "hsd/models/classifier.hpp"
#include "hsd/models/spec.hpp"
#include "hsd/nn/safetensors.hpp"
#include "hsd/nn/transformer.hpp"
#include "hsd/textprep/clean_text.hpp"
#include "hsd/textprep/tokenizer.hpp"

#include "json.hpp"

#include <array>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>

namespace hsd::models {

inline constexpr std::string_view checkpoint_format = "hsd-checkpoint";
inline constexpr int checkpoint_format_version = 1;

struct Prediction {
    int label = 0;
    std::array<double, num_classes> probabilities{};
};

// Softmax in double; argmax ties resolve to the lowest class index.
template <typename Row>
Prediction predict_from_logits(const Row &logits) {
    Prediction p;
    double m = static_cast<double>(logits(0, 0));
    for (int c = 1; c < num_classes; ++c) {
        m = std::max(m, static_cast<double>(logits(0, c)));
    }
    double z = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        p.probabilities[static_cast<std::size_t>(c)] = std::exp(static_cast<double>(logits(0, c)) - m);
        z += p.probabilities[static_cast<std::size_t>(c)];
    }
    for (auto &v : p.probabilities) {
        v /= z;
    }
    for (int c = 1; c < num_classes; ++c) {
        if (logits(0, c) > logits(0, p.label)) {
            p.label = c;
        }
    }
    return p;
}

template <typename S>
class Model {
  public:
    ModelSpec spec;
    textprep::TokenizerAdapter tokenizer;
    std::optional<nn::EncoderConfig> encoder_config;
    std::unique_ptr<nn::ParameterSet<S>> params;
    std::unique_ptr<Classifier<S>> net;

    [[nodiscard]] std::size_t parameter_count() const { return params->numel(); }

    [[nodiscard]] nn::TransformerEncoder<S> *encoder() const { return net->encoder(); }

    void freeze_encoder(bool frozen) {
        if (auto *e = encoder()) {
            e->set_trainable(!frozen);
        }
    }

    // Evaluation-mode logits (1 x 3) for one tokenised example.
    [[nodiscard]] Mat<S> logits(const textprep::TokenSequence &seq) const {
        return net->forward(seq.real_ids(), nullptr, nullptr);
    }

    [[nodiscard]] Prediction predict(const textprep::TokenSequence &seq) const {
        return predict_from_logits(logits(seq));
    }

    // raw text -> clean_text -> tokenizer
    [[nodiscard]] textprep::TokenSequence encode(std::string_view raw) const {
        if (!tokenizer.loaded()) {
            throw ConfigError("model has no tokenizer; it can only score pre-tokenised input");
        }
        return textprep::tokenize(textprep::clean_text(raw), tokenizer, static_cast<std::size_t>(spec.max_len));
    }
};

using ModelHandle = Model<float>;

struct EncoderAssets {
    std::filesystem::path dir;
    nn::EncoderConfig config;
    textprep::TokenizerAdapter tokenizer;
};

// An encoder name is a directory, or a directory name under $HSD_ENCODER_HOME.
inline std::filesystem::path resolve_encoder_dir(const std::string &name) {
    namespace fs = std::filesystem;
    if (fs::is_directory(name)) {
        return name;
    }
    if (const char *home = std::getenv("HSD_ENCODER_HOME"); home != nullptr && *home != '\0') {
        const fs::path p = fs::path(home) / name;
        if (fs::is_directory(p)) {
            return p;
        }
        throw CheckpointError("encoder '" + name + "' not found under HSD_ENCODER_HOME=" + home);
    }
    throw CheckpointError("encoder '" + name + "' is not a directory and HSD_ENCODER_HOME is unset");
}

inline EncoderAssets load_encoder_assets(const std::string &name) {
    EncoderAssets a;
    a.dir = resolve_encoder_dir(name);
    const auto cfg_path = a.dir / "config.json";
    if (!std::filesystem::exists(cfg_path)) {
        throw CheckpointError("missing " + cfg_path.string());
    }
    try {
        a.config = nn::EncoderConfig::from_hf(nlohmann::json::parse(read_file(cfg_path)));
    } catch (const nlohmann::json::exception &e) {
        throw CheckpointError(cfg_path.string() + ": " + e.what());
    }
    bool lowercase = true;
    if (const auto tc = a.dir / "tokenizer_config.json"; std::filesystem::exists(tc)) {
        const auto j = nlohmann::json::parse(read_file(tc), nullptr, false);
        if (!j.is_discarded()) {
            lowercase = j.value("do_lower_case", true);
        }
    }
    const auto vocab = a.dir / "vocab.txt";
    if (!std::filesystem::exists(vocab)) {
        throw CheckpointError("missing " + vocab.string());
    }
    a.tokenizer = textprep::TokenizerAdapter::from_vocab_file(vocab, lowercase);
    if (static_cast<int>(a.tokenizer.vocab_size()) != a.config.vocab_size) {
        throw CheckpointError(vocab.string() + " has " + std::to_string(a.tokenizer.vocab_size()) +
                              " tokens but the encoder expects " + std::to_string(a.config.vocab_size));
    }
    return a;
}

// Baseline tokenizer from spec.tokenizer: a vocab file, or an encoder directory/name.
inline textprep::TokenizerAdapter resolve_tokenizer(const std::string &ref) {
    namespace fs = std::filesystem;
    if (fs::is_regular_file(ref)) {
        return textprep::TokenizerAdapter::from_vocab_file(ref);
    }
    const auto dir = resolve_encoder_dir(ref);
    return textprep::TokenizerAdapter::from_vocab_file(dir / "vocab.txt");
}

namespace detail {

template <typename S>
Model<S> assemble(ModelSpec spec, std::optional<nn::EncoderConfig> enc, textprep::TokenizerAdapter tok) {
    spec.validate();
    Model<S> m;
    std::int32_t pad = 0;
    if (uses_encoder(spec.kind)) {
        if (!enc) {
            throw SpecError("encoder kind without an encoder config");
        }
        if (spec.max_len > enc->max_positions) {
            throw SpecError("max_len " + std::to_string(spec.max_len) + " exceeds the encoder's " +
                            std::to_string(enc->max_positions) + " positions");
        }
        if (tok.loaded() && static_cast<int>(tok.vocab_size()) != enc->vocab_size) {
            throw SpecError("tokenizer vocabulary does not match the encoder");
        }
        spec.vocab_size = enc->vocab_size;
    } else {
        if (tok.loaded()) {
            const int v = static_cast<int>(tok.vocab_size());
            if (spec.vocab_size != 0 && spec.vocab_size != v) {
                throw SpecError("vocab_size " + std::to_string(spec.vocab_size) + " disagrees with tokenizer size " +
                                std::to_string(v));
            }
            spec.vocab_size = v;
            pad = tok.pad_id();
        } else if (spec.vocab_size < 1) {
            throw SpecError("vocab_size is required when no tokenizer is given");
        }
    }
    m.params = std::make_unique<nn::ParameterSet<S>>();
    m.net = make_classifier<S>(*m.params, spec, spec.vocab_size, pad, enc ? &*enc : nullptr);
    m.spec = std::move(spec);
    m.encoder_config = std::move(enc);
    m.tokenizer = std::move(tok);
    return m;
}

}  // namespace detail

// Build with seeded initialisation. Encoder kinds load their encoder from the
// pretrained checkpoint named by spec.encoder_name; only the head is random.
template <typename S = float>
Model<S> build_model(const ModelSpec &spec, std::uint64_t seed,
                     std::optional<textprep::TokenizerAdapter> tokenizer = std::nullopt) {
    spec.validate();
    Rng rng(seed);
    if (uses_encoder(spec.kind)) {
        auto assets = load_encoder_assets(spec.encoder_name);
        auto m = detail::assemble<S>(spec, assets.config, assets.tokenizer);
        m.net->init(rng, false);
        const auto weights = assets.dir / "model.safetensors";
        if (!std::filesystem::exists(weights)) {
            throw CheckpointError("missing " + weights.string());
        }
        m.encoder()->load_pretrained(nn::SafetensorsFile::load(weights));
        return m;
    }
    textprep::TokenizerAdapter tok;
    if (tokenizer) {
        tok = *tokenizer;
    } else if (!spec.tokenizer.empty()) {
        tok = resolve_tokenizer(spec.tokenizer);
    }
    auto m = detail::assemble<S>(spec, std::nullopt, tok);
    m.net->init(rng, true);
    return m;
}

// Encoder kinds with a randomly initialised encoder of the given shape, for
// tests and parameter accounting when no pretrained weights are at hand.
template <typename S = float>
Model<S> build_model_random_encoder(ModelSpec spec, const nn::EncoderConfig &cfg, std::uint64_t seed,
                                    textprep::TokenizerAdapter tokenizer = {}) {
    if (spec.encoder_name.empty()) {
        spec.encoder_name = "random-" + cfg.model_type;
    }
    Rng rng(seed);
    auto m = detail::assemble<S>(spec, cfg, std::move(tokenizer));
    m.net->init(rng, true);
    return m;
}

template <typename S>
std::string serialize_checkpoint(const Model<S> &m) {
    std::map<std::string, std::string> meta;
    meta["format"] = std::string(checkpoint_format);
    meta["format_version"] = std::to_string(checkpoint_format_version);
    meta["model_spec"] = m.spec.to_json().dump();
    if (m.encoder_config) {
        meta["encoder_config"] = m.encoder_config->to_json().dump();
    }
    if (m.tokenizer.loaded()) {
        meta["vocab"] = m.tokenizer.vocab_text();
        meta["tokenizer_lowercase"] = m.tokenizer.lowercase() ? "true" : "false";
    }
    std::vector<nn::SafetensorsFile::Item<S>> items;
    for (const auto &p : *m.params) {
        items.push_back({p->name, p->shape, p->value.data()});
    }
    return nn::SafetensorsFile::serialize(items, meta);
}

template <typename S>
void save_checkpoint(const Model<S> &m, const std::filesystem::path &path) {
    write_file(path, serialize_checkpoint(m));
}

// Restores a model written by save_checkpoint. The parameter set must match
// the embedded spec exactly: missing, extra or reshaped tensors are errors.
template <typename S = float>
Model<S> load_checkpoint_bytes(std::string bytes, const std::string &origin) {
    const auto f = nn::SafetensorsFile::parse(std::move(bytes), origin);
    const auto &meta = f.metadata();
    const auto get = [&](const std::string &k) -> const std::string & {
        const auto it = meta.find(k);
        if (it == meta.end()) {
            throw CheckpointError(origin + ": not an hsd checkpoint (missing '" + k + "' metadata)");
        }
        return it->second;
    };
    if (get("format") != checkpoint_format) {
        throw CheckpointError(origin + ": unexpected format '" + get("format") + "'");
    }
    if (get("format_version") != std::to_string(checkpoint_format_version)) {
        throw CheckpointError(origin + ": unsupported format_version " + get("format_version"));
    }
    ModelSpec spec;
    std::optional<nn::EncoderConfig> enc;
    try {
        spec = ModelSpec::from_json(nlohmann::json::parse(get("model_spec")));
        if (meta.contains("encoder_config")) {
            enc = nn::EncoderConfig::from_json(nlohmann::json::parse(meta.at("encoder_config")));
        }
    } catch (const nlohmann::json::exception &e) {
        throw CheckpointError(origin + ": bad embedded config: " + e.what());
    } catch (const ConfigError &e) {
        throw CheckpointError(origin + ": " + e.what());
    }
    textprep::TokenizerAdapter tok;
    if (meta.contains("vocab")) {
        const auto lc = meta.contains("tokenizer_lowercase") ? meta.at("tokenizer_lowercase") == "true" : true;
        tok = textprep::TokenizerAdapter(textprep::TokenizerAdapter::parse_vocab(meta.at("vocab")), lc);
    }
    auto m = detail::assemble<S>(spec, enc, tok);
    std::set<std::string> expected;
    for (auto &p : *m.params) {
        expected.insert(p->name);
        f.copy_to(p->name, *p);
    }
    for (const auto &[name, _] : f.entries()) {
        if (!expected.contains(name)) {
            throw CheckpointError(origin + ": unexpected tensor " + name + " for a " +
                                  std::string(kind_name(spec.kind)) + " model");
        }
    }
    return m;
}

template <typename S = float>
Model<S> load_checkpoint(const std::filesystem::path &path) {
    if (!std::filesystem::exists(path)) {
        throw CheckpointError("checkpoint " + path.string() + " does not exist");
    }
    return load_checkpoint_bytes<S>(read_file(path), path.string());
}

}  // namespace hsd::models
