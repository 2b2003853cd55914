#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/labels.hpp"
#include "hsd/nn/tensor.hpp"

#include <array>
#include <cmath>
#include <span>

namespace hsd::training {

using ClassWeights = std::array<double, num_classes>;
inline constexpr ClassWeights uniform_weights = {1.0, 1.0, 1.0};

// Weighted cross-entropy over a batch of logits (n x 3):
//   sum_i w[y_i] * -log softmax(z_i)[y_i]  /  sum_i w[y_i]
// With `dlogits` set, also writes d loss / d logits = w[y_i] (p_i - onehot_i) / sum w.
template <typename S>
double weighted_cross_entropy(const nn::Mat<S> &logits, std::span<const int> labels, const ClassWeights &weights,
                              nn::Mat<S> *dlogits = nullptr) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size() || logits.cols() != num_classes) {
        throw ConfigError("logits/labels shape mismatch");
    }
    double wsum = 0.0;
    for (const int y : labels) {
        if (!is_valid_class(y)) {
            throw ConfigError("label " + std::to_string(y) + " outside {0,1,2}");
        }
        wsum += weights[static_cast<std::size_t>(y)];
    }
    if (dlogits) {
        dlogits->resize(logits.rows(), num_classes);
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        const double w = weights[static_cast<std::size_t>(y)];
        double m = static_cast<double>(logits(i, 0));
        for (int c = 1; c < num_classes; ++c) {
            m = std::max(m, static_cast<double>(logits(i, c)));
        }
        double z = 0.0;
        for (int c = 0; c < num_classes; ++c) {
            z += std::exp(static_cast<double>(logits(i, c)) - m);
        }
        const double log_z = m + std::log(z);
        total += w * (log_z - static_cast<double>(logits(i, y)));
        if (dlogits) {
            for (int c = 0; c < num_classes; ++c) {
                const double p = std::exp(static_cast<double>(logits(i, c)) - log_z);
                (*dlogits)(i, c) = static_cast<S>(w * (p - (c == y ? 1.0 : 0.0)) / wsum);
            }
        }
    }
    return total / wsum;
}

}  // namespace hsd::training
