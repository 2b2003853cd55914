#pragma once

#include "hsd/core/error.hpp"
#include "hsd/core/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

namespace hsd::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Shape = std::vector<std::int64_t>;

inline std::string shape_str(const Shape &s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += (i ? ", " : "") + std::to_string(s[i]);
    }
    return out + ")";
}

// A named tensor. 1-D tensors live in a 1 x n matrix; N-D tensors keep their
// leading dimension as rows and flatten the rest row-major, which is the same
// memory order as a contiguous torch tensor of that shape.
template <typename S>
struct Parameter {
    std::string name;
    Shape shape;
    Mat<S> value;
    Mat<S> grad;
    bool trainable = true;

    [[nodiscard]] std::size_t numel() const noexcept { return static_cast<std::size_t>(value.size()); }
    [[nodiscard]] auto row0() const { return value.row(0); }
};

inline std::pair<Eigen::Index, Eigen::Index> matrix_dims(const Shape &shape) {
    if (shape.empty()) {
        return {1, 1};
    }
    if (shape.size() == 1) {
        return {1, shape[0]};
    }
    const auto rest = std::accumulate(shape.begin() + 1, shape.end(), std::int64_t{1}, std::multiplies<>());
    return {shape[0], rest};
}

// Ordered parameter collection with stable addresses; layers hold raw pointers
// into it, so a ParameterSet is neither copied nor moved once layers bind to it.
template <typename S>
class ParameterSet {
  public:
    ParameterSet() = default;
    ParameterSet(const ParameterSet &) = delete;
    ParameterSet &operator=(const ParameterSet &) = delete;

    Parameter<S> &add(const std::string &name, Shape shape) {
        if (index_.contains(name)) {
            throw SpecError("duplicate parameter " + name);
        }
        auto p = std::make_unique<Parameter<S>>();
        p->name = name;
        p->shape = std::move(shape);
        const auto [r, c] = matrix_dims(p->shape);
        p->value = Mat<S>::Zero(r, c);
        p->grad = Mat<S>::Zero(r, c);
        index_.emplace(name, params_.size());
        params_.push_back(std::move(p));
        return *params_.back();
    }

    [[nodiscard]] Parameter<S> *find(const std::string &name) {
        const auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second].get();
    }
    [[nodiscard]] const Parameter<S> *find(const std::string &name) const {
        const auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second].get();
    }
    Parameter<S> &at(const std::string &name) {
        auto *p = find(name);
        if (p == nullptr) {
            throw CheckpointError("no parameter named " + name);
        }
        return *p;
    }

    [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }
    [[nodiscard]] std::size_t numel() const noexcept {
        std::size_t n = 0;
        for (const auto &p : params_) {
            n += p->numel();
        }
        return n;
    }

    void zero_grad() {
        for (auto &p : params_) {
            p->grad.setZero();
        }
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

  private:
    std::vector<std::unique_ptr<Parameter<S>>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

// torch-style default initialisations
template <typename S>
void init_uniform(Parameter<S> &p, double bound, Rng &rng) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        p.value.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
    }
}

template <typename S>
void init_normal(Parameter<S> &p, double sd, Rng &rng) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        p.value.data()[i] = static_cast<S>(rng.normal(0.0, sd));
    }
}

// Inverted dropout mask: 0 with probability p, else 1/(1-p).
template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng &rng) {
    Mat<S> m(rows, cols);
    const S keep = static_cast<S>(1.0 / (1.0 - p));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.uniform() < p ? S(0) : keep;
    }
    return m;
}

// Training-time context for one forward/backward pass. Without it layers run
// in evaluation mode: no dropout and nothing recorded.
struct TrainContext {
    Rng *rng = nullptr;
};

}  // namespace hsd::nn
