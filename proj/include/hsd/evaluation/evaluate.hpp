#pragma once

#include "hsd/corpus/dataset.hpp"
#include "hsd/evaluation/report.hpp"
#include "hsd/training/trainer.hpp"

namespace hsd::evaluation {

template <typename S>
EvalReport evaluate(const models::Model<S> &m, const training::Encoded &data, std::string name = {},
                    std::optional<int> epochs = std::nullopt) {
    if (data.size() == 0) {
        throw DataError("evaluation set is empty");
    }
    const auto pass = training::evaluate_pass(m, data);
    return make_report(pass.predictions, data.labels, pass.mean_loss, std::move(name), epochs);
}

template <typename S>
EvalReport evaluate(const models::Model<S> &m, const corpus::Dataset &ds, std::string name = {},
                    std::optional<int> epochs = std::nullopt) {
    return evaluate(m, training::encode_dataset(m, ds), std::move(name), epochs);
}

}  // namespace hsd::evaluation
