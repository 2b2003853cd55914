#pragma once

#include "hsd/models/spec.hpp"
#include "hsd/training/config.hpp"

#include <string>
#include <vector>

namespace hsd::training {

// The ten comparison configurations. Encoder names resolve under
// $HSD_ENCODER_HOME unless overridden.
struct Preset {
    std::string name;
    std::string title;  // row label in comparison tables
    models::ModelSpec spec;
    TrainConfig train;
};

inline std::vector<Preset> presets(const std::string &bert = "bert-base-uncased",
                                   const std::string &distilbert = "distilbert-base-uncased") {
    using models::Kind;
    const auto make = [](std::string name, std::string title, Kind kind, std::string encoder) {
        Preset p{std::move(name), std::move(title), {}, {}};
        p.spec.kind = kind;
        p.spec.encoder_name = std::move(encoder);
        return p;
    };
    std::vector<Preset> out;
    out.push_back(make("cnn", "CNN", Kind::cnn, ""));
    out.push_back(make("lstm", "LSTM", Kind::lstm, ""));
    out.push_back(make("bilstm", "Bi-LSTM", Kind::bilstm, ""));
    out.push_back(make("bert", "BERT", Kind::encoder, bert));
    out.push_back(make("distilbert", "DistilBERT", Kind::encoder, distilbert));

    auto bert_cnn = make("bert_cnn", "BERT+CNN", Kind::encoder_cnn, bert);
    bert_cnn.train.grad_clip_norm.reset();  // clipping arrives with the updated variant
    out.push_back(bert_cnn);

    auto updated = make("updated_bert_cnn", "UPDATED BERT+CNN", Kind::encoder_cnn, bert);
    updated.spec.kernel_sizes = {3};
    updated.train.use_class_weights = true;
    updated.train.grad_clip_norm = 1.0;
    out.push_back(updated);

    out.push_back(make("distilbert_cnn", "DISTILBERT+CNN", Kind::encoder_cnn, distilbert));
    out.push_back(make("bert_bilstm", "BERT+BI-LSTM", Kind::encoder_bilstm, bert));
    out.push_back(make("distilbert_bilstm", "DISTILBERT+BI-LSTM", Kind::encoder_bilstm, distilbert));
    return out;
}

inline Preset find_preset(const std::string &name, const std::string &bert = "bert-base-uncased",
                          const std::string &distilbert = "distilbert-base-uncased") {
    for (auto &p : presets(bert, distilbert)) {
        if (p.name == name) {
            return p;
        }
    }
    throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace hsd::training
