#pragma once

#include "hsd/nn/tensor.hpp"

#include <cmath>
#include <vector>

namespace hsd::training {

template <typename S>
double grad_norm(const nn::ParameterSet<S> &ps) {
    double sq = 0.0;
    for (const auto &p : ps) {
        if (p->trainable) {
            sq += p->grad.template cast<double>().squaredNorm();
        }
    }
    return std::sqrt(sq);
}

// Global-norm clipping over the trainable parameters. Returns the norm before
// clipping; afterwards the norm is min(before, max_norm).
template <typename S>
double clip_gradients(nn::ParameterSet<S> &ps, double max_norm) {
    const double norm = grad_norm(ps);
    if (norm > max_norm && norm > 0.0) {
        const auto scale = static_cast<S>(max_norm / norm);
        for (auto &p : ps) {
            if (p->trainable) {
                p->grad *= scale;
            }
        }
    }
    return norm;
}

// Adam with decoupled weight decay, same update order as torch.optim.AdamW:
// decay, moment updates, bias-corrected step.
template <typename S>
class AdamW {
  public:
    struct Options {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW(nn::ParameterSet<S> &ps, Options opt) : ps_(ps), opt_(opt) {
        for (auto &p : ps_) {
            m_.push_back(nn::Mat<S>::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(nn::Mat<S>::Zero(p->value.rows(), p->value.cols()));
        }
    }

    [[nodiscard]] long steps() const noexcept { return t_; }
    [[nodiscard]] const Options &options() const noexcept { return opt_; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
        const auto b1 = static_cast<S>(opt_.beta1);
        const auto b2 = static_cast<S>(opt_.beta2);
        const auto step_size = static_cast<S>(opt_.lr / bc1);
        const auto sqrt_bc2 = static_cast<S>(std::sqrt(bc2));
        const auto eps = static_cast<S>(opt_.eps);
        const auto decay = static_cast<S>(1.0 - opt_.lr * opt_.weight_decay);
        std::size_t i = 0;
        for (auto &p : ps_) {
            auto &m = m_[i];
            auto &v = v_[i];
            ++i;
            if (!p->trainable) {
                continue;
            }
            p->value *= decay;
            m = b1 * m + (S(1) - b1) * p->grad;
            v = b2 * v + (S(1) - b2) * p->grad.cwiseAbs2();
            p->value.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_bc2 + eps);
        }
    }

  private:
    nn::ParameterSet<S> &ps_;
    Options opt_;
    std::vector<nn::Mat<S>> m_;
    std::vector<nn::Mat<S>> v_;
    long t_ = 0;
};

}  // namespace hsd::training
