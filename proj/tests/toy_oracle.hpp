#pragma once

// Straight-line forward pass and objective of the toy model, written from the
// model equations without the library's caches. Templated on the scalar so
// finite differences can run in long double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "air/toy_model.hpp"

namespace air::oracle {

template <typename T>
class ToyWeights {
public:
    ToyWeights(const toy::Params& p) : dims_(p.dims()), w_(p.values().begin(), p.values().end())
    {
        std::size_t off = 0;
        for (std::size_t i = 0; i < toy::kNumBlocks; ++i) {
            offset_.push_back(off);
            const auto s = toy::block_shape(static_cast<toy::Block>(i), dims_);
            cols_.push_back(s.cols);
            off += s.rows * s.cols;
        }
    }

    T at(toy::Block b, std::size_t r, std::size_t c = 0) const
    {
        const auto i = static_cast<std::size_t>(b);
        return w_[offset_[i] + r * cols_[i] + c];
    }

    T& flat(std::size_t i) { return w_[i]; }
    const toy::Dims& dims() const { return dims_; }

private:
    toy::Dims dims_;
    std::vector<T> w_;
    std::vector<std::size_t> offset_;
    std::vector<std::size_t> cols_;
};

template <typename T>
std::vector<T> softmax_of(const std::vector<T>& z)
{
    T mx = z[0];
    for (const T& v : z) {
        mx = std::max(mx, v);
    }
    std::vector<T> e(z.size());
    T s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        e[i] = std::exp(z[i] - mx);
        s += e[i];
    }
    for (T& v : e) {
        v /= s;
    }
    return e;
}

template <typename T>
struct ToyTrace {
    std::vector<std::vector<T>> r, alpha;
    std::vector<T> alpha_r, answer;
};

/// Unrolls `steps` steps from h0 = Wq q and x1 = 0; alpha^r averages the first `kept` steps.
template <typename T>
ToyTrace<T> toy_forward(const ToyWeights<T>& W, const toy::Sample& s, std::size_t steps, std::size_t kept)
{
    using toy::Block;
    const auto& d = W.dims();
    auto sig = [](T x) { return T(1) / (T(1) + std::exp(-x)); };

    std::vector<T> h(d.h, T(0));
    for (std::size_t i = 0; i < d.h; ++i) {
        for (std::size_t j = 0; j < d.dq; ++j) {
            h[i] += W.at(Block::Wq, i, j) * T(s.q[j]);
        }
    }
    std::vector<T> x(d.e, T(0));
    ToyTrace<T> out;
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<T> hn(d.h);
        for (std::size_t i = 0; i < d.h; ++i) {
            T az = W.at(Block::Bz, i), ar = W.at(Block::Br, i), an = W.at(Block::Bn, i), whn = 0;
            for (std::size_t j = 0; j < d.e; ++j) {
                az += W.at(Block::Wxz, i, j) * x[j];
                ar += W.at(Block::Wxr, i, j) * x[j];
                an += W.at(Block::Wxn, i, j) * x[j];
            }
            for (std::size_t j = 0; j < d.h; ++j) {
                az += W.at(Block::Whz, i, j) * h[j];
                ar += W.at(Block::Whr, i, j) * h[j];
                whn += W.at(Block::Whn, i, j) * h[j];
            }
            const T z = sig(az);
            const T n = std::tanh(an + sig(ar) * whn);
            hn[i] = (T(1) - z) * n + z * h[i];
        }
        h = hn;

        std::vector<T> rl(d.r, T(0));
        for (std::size_t i = 0; i < d.r; ++i) {
            for (std::size_t j = 0; j < d.h; ++j) {
                rl[i] += W.at(Block::Wr, i, j) * h[j];
            }
        }
        out.r.push_back(softmax_of(rl));

        std::vector<T> scores(d.k, T(0));
        for (std::size_t i = 0; i < d.hp; ++i) {
            T g = 0;
            for (std::size_t j = 0; j < d.h; ++j) {
                g += W.at(Block::Wh, i, j) * h[j];
            }
            for (std::size_t k = 0; k < d.k; ++k) {
                T u = 0;
                for (std::size_t j = 0; j < d.d; ++j) {
                    u += W.at(Block::Wv, i, j) * T(s.v[k * d.d + j]);
                }
                scores[k] += W.at(Block::Walpha, 0, i) * u * g;
            }
        }
        out.alpha.push_back(softmax_of(scores));

        std::vector<T> nx(d.e, T(0));
        for (std::size_t i = 0; i < d.e; ++i) {
            for (std::size_t j = 0; j < d.r; ++j) {
                nx[i] += W.at(Block::Wop, i, j) * out.r.back()[j];
            }
        }
        x = nx;
    }

    out.alpha_r.assign(d.k, T(0));
    for (std::size_t t = 0; t < kept; ++t) {
        for (std::size_t k = 0; k < d.k; ++k) {
            out.alpha_r[k] += out.alpha[t][k] / T(kept);
        }
    }
    std::vector<T> in(d.d + d.dq, T(0));
    for (std::size_t j = 0; j < d.d; ++j) {
        for (std::size_t k = 0; k < d.k; ++k) {
            in[j] += out.alpha_r[k] * T(s.v[k * d.d + j]);
        }
    }
    for (std::size_t j = 0; j < d.dq; ++j) {
        in[d.d + j] = T(s.q[j]);
    }
    std::vector<T> logits(d.a);
    for (std::size_t c = 0; c < d.a; ++c) {
        logits[c] = W.at(Block::B2, c);
    }
    for (std::size_t i = 0; i < d.g; ++i) {
        T a = W.at(Block::B1, i);
        for (std::size_t j = 0; j < in.size(); ++j) {
            a += W.at(Block::W1, i, j) * in[j];
        }
        const T hid = std::tanh(a);
        for (std::size_t c = 0; c < d.a; ++c) {
            logits[c] += W.at(Block::W2, c, i) * hid;
        }
    }
    out.answer = softmax_of(logits);
    return out;
}

/// Training objective of one sample: answer CE + theta * sum KL + phi * sum op CE + w * L-.
template <typename T>
T toy_loss(const ToyWeights<T>& W, const toy::Sample& s, const toy::ObjectiveConfig& cfg)
{
    const auto& d = W.dims();
    const std::size_t steps = std::min(s.ops.size() + 1, d.t_max);
    const std::size_t len = std::min(s.ops.size(), steps);
    const auto tr = toy_forward(W, s, steps, len);
    const T eps = T(1e-12);
    auto lg = [&](T p) { return std::log(std::max(p, eps)); };

    T loss = -lg(tr.answer[s.answer]);
    for (std::size_t t = 0; t < steps; ++t) {
        const std::size_t label = t < s.ops.size() ? s.ops[t] : toy::kEndToken;
        loss -= T(cfg.loss.phi) * lg(tr.r[t][label]);
        if (t < len && !s.targets[t].empty()) {
            for (std::size_t k = 0; k < d.k; ++k) {
                const T tk = T(s.targets[t][k]);
                if (tk > 0) {
                    loss += T(cfg.loss.theta) * tk * (std::log(tk) - lg(tr.alpha[t][k]));
                }
            }
        }
    }
    for (std::size_t k = 0; k < s.negative.size(); ++k) {
        if (s.negative[k] != 0.0) {
            loss += T(cfg.neg_weight) * T(s.negative[k]) * lg(tr.alpha_r[k]);
        }
    }
    return loss;
}

} // namespace air::oracle
