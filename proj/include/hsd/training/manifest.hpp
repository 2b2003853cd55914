#pragma once

#include "hsd/core/hash.hpp"
#include "hsd/models/spec.hpp"
#include "hsd/training/config.hpp"

#include "json.hpp"

#include <string>

namespace hsd::training {

// Hash of a split manifest as written to disk (compact dump), so a run can be
// tied to the exact partition it trained on.
inline std::string split_manifest_hash(const nlohmann::json &split_manifest) {
    return sha256_hex(split_manifest.dump());
}

struct RunSummary {
    models::ModelSpec spec;
    TrainConfig config;
    std::string split_hash;
    std::string checkpoint;  // path, may be empty
    int best_epoch = 0;
    double best_val_loss = 0.0;
    nlohmann::json final_metrics = nlohmann::json::object();
};

inline nlohmann::json run_manifest(const RunSummary &r) {
    return {{"schema", "hsd.run"},
            {"version", 1},
            {"spec", r.spec.to_json()},
            {"config", r.config.to_json()},
            {"seed", r.config.seed},
            {"split_manifest_sha256", r.split_hash},
            {"checkpoint", r.checkpoint},
            {"best_epoch", r.best_epoch},
            {"best_val_loss", r.best_val_loss},
            {"final_metrics", r.final_metrics}};
}

}  // namespace hsd::training
