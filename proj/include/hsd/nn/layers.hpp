#pragma once

#include "hsd/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace hsd::nn {

// Every layer works on one example at a time: rows are sequence positions
// (only the real, unmasked prefix), columns are features. Backward passes
// accumulate into Parameter::grad and return the gradient of the input.

template <typename S>
struct Linear {
    Parameter<S> *w = nullptr;  // out x in
    Parameter<S> *b = nullptr;  // 1 x out

    static Linear make(ParameterSet<S> &ps, const std::string &prefix, Eigen::Index in, Eigen::Index out) {
        return {&ps.add(prefix + ".weight", {out, in}), &ps.add(prefix + ".bias", {out})};
    }

    void init(Rng &rng) const {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w->value.cols()));
        init_uniform(*w, bound, rng);
        init_uniform(*b, bound, rng);
    }

    [[nodiscard]] Eigen::Index in_features() const { return w->value.cols(); }
    [[nodiscard]] Eigen::Index out_features() const { return w->value.rows(); }

    [[nodiscard]] Mat<S> forward(const Mat<S> &x) const {
        Mat<S> y = x * w->value.transpose();
        y.rowwise() += b->value.row(0);
        return y;
    }

    Mat<S> backward(const Mat<S> &x, const Mat<S> &dy, bool need_dx = true) const {
        if (w->trainable) {
            w->grad.noalias() += dy.transpose() * x;
            b->grad.row(0) += dy.colwise().sum();
        }
        if (!need_dx) {
            return {};
        }
        return dy * w->value;
    }
};

template <typename S>
struct LayerNorm {
    Parameter<S> *gamma = nullptr;
    Parameter<S> *beta = nullptr;
    double eps = 1e-12;

    struct Tape {
        Mat<S> xhat;
        std::vector<S> inv_std;
    };

    static LayerNorm make(ParameterSet<S> &ps, const std::string &prefix, Eigen::Index n, double eps) {
        LayerNorm ln{&ps.add(prefix + ".weight", {n}), &ps.add(prefix + ".bias", {n}), eps};
        ln.gamma->value.setOnes();
        return ln;
    }

    Mat<S> forward(const Mat<S> &x, Tape *tape = nullptr) const {
        const Eigen::Index n = x.cols();
        Mat<S> xhat(x.rows(), n);
        if (tape) {
            tape->inv_std.resize(static_cast<std::size_t>(x.rows()));
        }
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const S mean = x.row(r).mean();
            const S var = (x.row(r).array() - mean).square().sum() / static_cast<S>(n);
            const S inv = S(1) / std::sqrt(var + static_cast<S>(eps));
            xhat.row(r) = (x.row(r).array() - mean) * inv;
            if (tape) {
                tape->inv_std[static_cast<std::size_t>(r)] = inv;
            }
        }
        Mat<S> y = (xhat.array().rowwise() * gamma->value.row(0).array()).matrix();
        y.rowwise() += beta->value.row(0);
        if (tape) {
            tape->xhat = std::move(xhat);
        }
        return y;
    }

    Mat<S> backward(const Tape &t, const Mat<S> &dy) const {
        if (gamma->trainable) {
            gamma->grad.row(0) += (dy.array() * t.xhat.array()).colwise().sum().matrix();
            beta->grad.row(0) += dy.colwise().sum();
        }
        const auto n = static_cast<S>(dy.cols());
        Mat<S> dxhat = (dy.array().rowwise() * gamma->value.row(0).array()).matrix();
        Mat<S> dx(dy.rows(), dy.cols());
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            const S sum = dxhat.row(r).sum();
            const S dot = dxhat.row(r).dot(t.xhat.row(r));
            dx.row(r) = (t.inv_std[static_cast<std::size_t>(r)] / n) *
                        (n * dxhat.row(r).array() - sum - t.xhat.row(r).array() * dot).matrix();
        }
        return dx;
    }
};

template <typename S>
Mat<S> gather_rows(const Parameter<S> &table, std::span<const std::int32_t> ids) {
    Mat<S> out(static_cast<Eigen::Index>(ids.size()), table.value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto id = ids[i];
        if (id < 0 || id >= table.value.rows()) {
            throw ConfigError("token id " + std::to_string(id) + " outside embedding table " + table.name + " of " +
                              std::to_string(table.value.rows()) + " rows");
        }
        out.row(static_cast<Eigen::Index>(i)) = table.value.row(id);
    }
    return out;
}

template <typename S>
void scatter_rows(Parameter<S> &table, std::span<const std::int32_t> ids, const Mat<S> &d) {
    if (!table.trainable) {
        return;
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        table.grad.row(ids[i]) += d.row(static_cast<Eigen::Index>(i));
    }
}

// Inverted dropout; the mask is kept for backward when training.
template <typename S>
struct Dropout {
    double p = 0.0;

    Mat<S> forward(const Mat<S> &x, TrainContext *ctx, Mat<S> *mask) const {
        if (ctx == nullptr || p <= 0.0) {
            if (mask) {
                mask->resize(0, 0);
            }
            return x;
        }
        *mask = dropout_mask<S>(x.rows(), x.cols(), p, *ctx->rng);
        return x.cwiseProduct(*mask);
    }

    static Mat<S> backward(const Mat<S> &mask, const Mat<S> &dy) {
        return mask.size() == 0 ? dy : Mat<S>(dy.cwiseProduct(mask));
    }
};

template <typename S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
}

template <typename S>
S gelu_grad(S x) {
    const S cdf = S(0.5) * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
    const S pdf = std::exp(S(-0.5) * x * x) / std::sqrt(S(2) * std::numbers::pi_v<S>);
    return cdf + x * pdf;
}

template <typename S>
S sigmoid(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

// Row-wise softmax, max-shifted.
template <typename S>
Mat<S> softmax_rows(const Mat<S> &x) {
    Mat<S> y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const S m = x.row(r).maxCoeff();
        y.row(r) = (x.row(r).array() - m).exp();
        y.row(r) /= y.row(r).sum();
    }
    return y;
}

// 1-D convolution over positions with ReLU and global max pooling, torch
// Conv1d layout (filters, in_channels, kernel). Inputs shorter than the
// kernel are right-padded with zero rows so every sequence yields a feature.
template <typename S>
struct ConvMaxPool {
    Parameter<S> *w = nullptr;  // F x (E*K)
    Parameter<S> *b = nullptr;  // 1 x F
    Eigen::Index in_channels = 0;
    Eigen::Index kernel = 0;

    struct Tape {
        Mat<S> cols;                      // windows x (E*K)
        std::vector<Eigen::Index> argmax;  // per filter
        std::vector<bool> active;          // relu passed at argmax
        Eigen::Index input_rows = 0;
    };

    static ConvMaxPool make(ParameterSet<S> &ps, const std::string &prefix, Eigen::Index in, Eigen::Index filters,
                            Eigen::Index k) {
        return {&ps.add(prefix + ".weight", {filters, in, k}), &ps.add(prefix + ".bias", {filters}), in, k};
    }

    void init(Rng &rng) const {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel));
        init_uniform(*w, bound, rng);
        init_uniform(*b, bound, rng);
    }

    [[nodiscard]] Eigen::Index filters() const { return w->value.rows(); }

    [[nodiscard]] Mat<S> im2col(const Mat<S> &x) const {
        const Eigen::Index len = std::max(x.rows(), kernel);
        const Eigen::Index windows = len - kernel + 1;
        Mat<S> cols = Mat<S>::Zero(windows, in_channels * kernel);
        for (Eigen::Index t = 0; t < windows; ++t) {
            for (Eigen::Index k = 0; k < kernel; ++k) {
                if (t + k >= x.rows()) {
                    break;
                }
                for (Eigen::Index e = 0; e < in_channels; ++e) {
                    cols(t, e * kernel + k) = x(t + k, e);
                }
            }
        }
        return cols;
    }

    // returns 1 x F pooled features
    Mat<S> forward(const Mat<S> &x, Tape *tape = nullptr) const {
        Mat<S> cols = im2col(x);
        Mat<S> y = cols * w->value.transpose();
        y.rowwise() += b->value.row(0);
        const Eigen::Index f = filters();
        Mat<S> pooled(1, f);
        std::vector<Eigen::Index> arg(static_cast<std::size_t>(f));
        for (Eigen::Index j = 0; j < f; ++j) {
            Eigen::Index best = 0;
            for (Eigen::Index t = 1; t < y.rows(); ++t) {
                if (y(t, j) > y(best, j)) {
                    best = t;
                }
            }
            arg[static_cast<std::size_t>(j)] = best;
            pooled(0, j) = std::max(y(best, j), S(0));
        }
        if (tape) {
            tape->active.assign(static_cast<std::size_t>(f), false);
            for (Eigen::Index j = 0; j < f; ++j) {
                tape->active[static_cast<std::size_t>(j)] = y(arg[static_cast<std::size_t>(j)], j) > S(0);
            }
            tape->cols = std::move(cols);
            tape->argmax = std::move(arg);
            tape->input_rows = x.rows();
        }
        return pooled;
    }

    Mat<S> backward(const Tape &t, const Mat<S> &dpooled, bool need_dx = true) const {
        const Eigen::Index f = filters();
        Mat<S> dy = Mat<S>::Zero(t.cols.rows(), f);
        for (Eigen::Index j = 0; j < f; ++j) {
            if (t.active[static_cast<std::size_t>(j)]) {
                dy(t.argmax[static_cast<std::size_t>(j)], j) = dpooled(0, j);
            }
        }
        if (w->trainable) {
            w->grad.noalias() += dy.transpose() * t.cols;
            b->grad.row(0) += dy.colwise().sum();
        }
        if (!need_dx) {
            return {};
        }
        const Mat<S> dcols = dy * w->value;
        Mat<S> dx = Mat<S>::Zero(t.input_rows, in_channels);
        for (Eigen::Index r = 0; r < dcols.rows(); ++r) {
            for (Eigen::Index k = 0; k < kernel; ++k) {
                if (r + k >= t.input_rows) {
                    break;
                }
                for (Eigen::Index e = 0; e < in_channels; ++e) {
                    dx(r + k, e) += dcols(r, e * kernel + k);
                }
            }
        }
        return dx;
    }
};

// One direction of one LSTM layer, torch parameter names and gate order (i, f, g, o).
template <typename S>
struct LstmDirection {
    Parameter<S> *w_ih = nullptr;  // 4H x in
    Parameter<S> *w_hh = nullptr;  // 4H x H
    Parameter<S> *b_ih = nullptr;
    Parameter<S> *b_hh = nullptr;
    Eigen::Index hidden = 0;
    bool reverse = false;

    struct Tape {
        Mat<S> x;
        Mat<S> gates;  // T x 4H after activations
        Mat<S> c;      // T x H
        Mat<S> tanh_c;
        Mat<S> h;
    };

    static LstmDirection make(ParameterSet<S> &ps, const std::string &prefix, const std::string &suffix,
                              Eigen::Index in, Eigen::Index hidden, bool reverse) {
        return {&ps.add(prefix + ".weight_ih_" + suffix, {4 * hidden, in}),
                &ps.add(prefix + ".weight_hh_" + suffix, {4 * hidden, hidden}),
                &ps.add(prefix + ".bias_ih_" + suffix, {4 * hidden}),
                &ps.add(prefix + ".bias_hh_" + suffix, {4 * hidden}),
                hidden,
                reverse};
    }

    void init(Rng &rng) const {
        const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (auto *p : {w_ih, w_hh, b_ih, b_hh}) {
            init_uniform(*p, bound, rng);
        }
    }

    // Hidden states for every position (in input order); T x H.
    Mat<S> forward(const Mat<S> &x, Tape *tape = nullptr) const {
        const Eigen::Index len = x.rows();
        const Eigen::Index h4 = 4 * hidden;
        Mat<S> xw = x * w_ih->value.transpose();
        xw.rowwise() += b_ih->value.row(0) + b_hh->value.row(0);
        Mat<S> gates(len, h4);
        Mat<S> cs(len, hidden);
        Mat<S> tcs(len, hidden);
        Mat<S> hs(len, hidden);
        RowVec<S> h = RowVec<S>::Zero(hidden);
        RowVec<S> c = RowVec<S>::Zero(hidden);
        for (Eigen::Index s = 0; s < len; ++s) {
            const Eigen::Index t = reverse ? len - 1 - s : s;
            RowVec<S> z = xw.row(t) + h * w_hh->value.transpose();
            for (Eigen::Index j = 0; j < hidden; ++j) {
                z(j) = sigmoid(z(j));
                z(hidden + j) = sigmoid(z(hidden + j));
                z(2 * hidden + j) = std::tanh(z(2 * hidden + j));
                z(3 * hidden + j) = sigmoid(z(3 * hidden + j));
            }
            c = z.segment(hidden, hidden).cwiseProduct(c) +
                z.segment(0, hidden).cwiseProduct(z.segment(2 * hidden, hidden));
            const RowVec<S> tc = c.array().tanh().matrix();
            h = z.segment(3 * hidden, hidden).cwiseProduct(tc);
            gates.row(t) = z;
            cs.row(t) = c;
            tcs.row(t) = tc;
            hs.row(t) = h;
        }
        if (tape) {
            tape->x = x;
            tape->gates = std::move(gates);
            tape->c = std::move(cs);
            tape->tanh_c = std::move(tcs);
            tape->h = hs;
        }
        return hs;
    }

    // Position holding the final state in input order (0 for the reverse direction).
    [[nodiscard]] Eigen::Index final_position(Eigen::Index len) const { return reverse ? 0 : len - 1; }

    Mat<S> backward(const Tape &t, const Mat<S> &dh_seq, bool need_dx = true) const {
        const Eigen::Index len = t.x.rows();
        const Eigen::Index h4 = 4 * hidden;
        Mat<S> dz_all(len, h4);
        RowVec<S> dh_next = RowVec<S>::Zero(hidden);
        RowVec<S> dc_next = RowVec<S>::Zero(hidden);
        for (Eigen::Index s = len - 1; s >= 0; --s) {
            const Eigen::Index t_pos = reverse ? len - 1 - s : s;
            const Eigen::Index prev = reverse ? t_pos + 1 : t_pos - 1;
            const bool has_prev = s > 0;
            const auto g = t.gates.row(t_pos);
            const auto i_g = g.segment(0, hidden).array();
            const auto f_g = g.segment(hidden, hidden).array();
            const auto g_g = g.segment(2 * hidden, hidden).array();
            const auto o_g = g.segment(3 * hidden, hidden).array();
            const auto tc = t.tanh_c.row(t_pos).array();
            const RowVec<S> dh = dh_seq.row(t_pos) + dh_next;
            const RowVec<S> dc = (dc_next.array() + dh.array() * o_g * (S(1) - tc * tc)).matrix();
            RowVec<S> c_prev = has_prev ? RowVec<S>(t.c.row(prev)) : RowVec<S>::Zero(hidden);
            RowVec<S> dz(h4);
            dz.segment(0, hidden) = (dc.array() * g_g * i_g * (S(1) - i_g)).matrix();
            dz.segment(hidden, hidden) = (dc.array() * c_prev.array() * f_g * (S(1) - f_g)).matrix();
            dz.segment(2 * hidden, hidden) = (dc.array() * i_g * (S(1) - g_g * g_g)).matrix();
            dz.segment(3 * hidden, hidden) = (dh.array() * tc * o_g * (S(1) - o_g)).matrix();
            dc_next = (dc.array() * f_g).matrix();
            if (has_prev) {
                if (w_hh->trainable) {
                    w_hh->grad.noalias() += dz.transpose() * t.h.row(prev);
                }
                dh_next = dz * w_hh->value;
            } else {
                dh_next.setZero();
            }
            dz_all.row(t_pos) = dz;
        }
        if (w_ih->trainable) {
            w_ih->grad.noalias() += dz_all.transpose() * t.x;
            const RowVec<S> db = dz_all.colwise().sum();
            b_ih->grad.row(0) += db;
            b_hh->grad.row(0) += db;
        }
        if (!need_dx) {
            return {};
        }
        return dz_all * w_ih->value;
    }
};

// Stacked (optionally bidirectional) LSTM returning the final hidden state(s):
// last layer, forward final then backward final, like torch's h_n.
template <typename S>
struct Lstm {
    std::vector<LstmDirection<S>> dirs;  // layer-major, forward then reverse
    Eigen::Index hidden = 0;
    int layers = 1;
    bool bidirectional = false;

    struct Tape {
        std::vector<typename LstmDirection<S>::Tape> dirs;
        Eigen::Index len = 0;
    };

    static Lstm make(ParameterSet<S> &ps, const std::string &prefix, Eigen::Index in, Eigen::Index hidden, int layers,
                     bool bidirectional) {
        Lstm l;
        l.hidden = hidden;
        l.layers = layers;
        l.bidirectional = bidirectional;
        Eigen::Index width = in;
        for (int k = 0; k < layers; ++k) {
            const std::string suffix = "l" + std::to_string(k);
            l.dirs.push_back(LstmDirection<S>::make(ps, prefix, suffix, width, hidden, false));
            if (bidirectional) {
                l.dirs.push_back(LstmDirection<S>::make(ps, prefix, suffix + "_reverse", width, hidden, true));
            }
            width = bidirectional ? 2 * hidden : hidden;
        }
        return l;
    }

    void init(Rng &rng) const {
        for (const auto &d : dirs) {
            d.init(rng);
        }
    }

    [[nodiscard]] Eigen::Index output_width() const { return bidirectional ? 2 * hidden : hidden; }
    [[nodiscard]] int num_dirs() const { return bidirectional ? 2 : 1; }

    // 1 x output_width. An empty sequence yields the zero state.
    Mat<S> forward(const Mat<S> &x, Tape *tape = nullptr) const {
        const Eigen::Index len = x.rows();
        if (tape) {
            tape->dirs.assign(dirs.size(), {});
            tape->len = len;
        }
        Mat<S> out = Mat<S>::Zero(1, output_width());
        if (len == 0) {
            return out;
        }
        Mat<S> input = x;
        for (int k = 0; k < layers; ++k) {
            Mat<S> next(len, output_width());
            for (int d = 0; d < num_dirs(); ++d) {
                const auto idx = static_cast<std::size_t>(k * num_dirs() + d);
                const Mat<S> hs = dirs[idx].forward(input, tape ? &tape->dirs[idx] : nullptr);
                next.middleCols(d * hidden, hidden) = hs;
                if (k == layers - 1) {
                    out.middleCols(d * hidden, hidden) = hs.row(dirs[idx].final_position(len));
                }
            }
            input = std::move(next);
        }
        return out;
    }

    Mat<S> backward(const Tape &t, const Mat<S> &dout, bool need_dx = true) const {
        const Eigen::Index len = t.len;
        if (len == 0) {
            return need_dx ? Mat<S>(0, dirs.front().w_ih->value.cols()) : Mat<S>{};
        }
        Mat<S> dseq = Mat<S>::Zero(len, output_width());
        for (int d = 0; d < num_dirs(); ++d) {
            const auto &dir = dirs[static_cast<std::size_t>((layers - 1) * num_dirs() + d)];
            dseq.block(dir.final_position(len), d * hidden, 1, hidden) += dout.middleCols(d * hidden, hidden);
        }
        for (int k = layers - 1; k >= 0; --k) {
            const bool want_dx = need_dx || k > 0;
            Mat<S> dinput;
            for (int d = 0; d < num_dirs(); ++d) {
                const auto idx = static_cast<std::size_t>(k * num_dirs() + d);
                Mat<S> dx = dirs[idx].backward(t.dirs[idx], dseq.middleCols(d * hidden, hidden), want_dx);
                if (want_dx) {
                    dinput = dinput.size() == 0 ? std::move(dx) : Mat<S>(dinput + dx);
                }
            }
            dseq = std::move(dinput);
        }
        return dseq;
    }
};

}  // namespace hsd::nn
