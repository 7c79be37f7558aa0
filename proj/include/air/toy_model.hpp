#pragma once

// Desk-scale progressive reasoning-attention model: a GRU controller predicts
// one operation and one attention distribution over region proposals per
// step, and a small answer head reads the step-averaged attention.
//
// All arithmetic is in double. Gradients are hand-derived reverse mode.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "air/error.hpp"
#include "air/program.hpp"
#include "air/random.hpp"
#include "air/supervision.hpp"

namespace air::toy {

/// Index of the end-of-program token in the operation vocabulary.
inline constexpr std::size_t kEndToken = kNumOps;

struct Dims {
    std::size_t dq = 22; ///< question vector
    std::size_t d = 14;  ///< proposal feature
    std::size_t h = 24;  ///< recurrent state
    std::size_t hp = 16; ///< attention projection (H')
    std::size_t r = kNumOps + 1;
    std::size_t e = 12; ///< cell input
    std::size_t a = 4;  ///< answer classes
    std::size_t k = 8;  ///< proposals
    std::size_t g = 16; ///< answer-head hidden units
    std::size_t t_max = 9;

    bool operator==(const Dims&) const = default;
};

enum class Block : std::size_t {
    Wq, Wr, Walpha, Wv, Wh, Wop,
    Wxz, Whz, Bz, Wxr, Whr, Br, Wxn, Whn, Bn,
    W1, B1, W2, B2,
    Count
};

inline constexpr std::size_t kNumBlocks = static_cast<std::size_t>(Block::Count);

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t fan_in = 0;
};

inline Shape block_shape(Block b, const Dims& d)
{
    switch (b) {
    case Block::Wq: return {d.h, d.dq, d.dq};
    case Block::Wr: return {d.r, d.h, d.h};
    // Attention logits are per proposal: W_alpha maps H' -> 1.
    case Block::Walpha: return {1, d.hp, d.hp};
    case Block::Wv: return {d.hp, d.d, d.d};
    case Block::Wh: return {d.hp, d.h, d.h};
    case Block::Wop: return {d.e, d.r, d.r};
    case Block::Wxz:
    case Block::Wxr:
    case Block::Wxn: return {d.h, d.e, d.e};
    case Block::Whz:
    case Block::Whr:
    case Block::Whn: return {d.h, d.h, d.h};
    case Block::Bz:
    case Block::Br:
    case Block::Bn: return {d.h, 1, d.h};
    case Block::W1: return {d.g, d.d + d.dq, d.d + d.dq};
    case Block::B1: return {d.g, 1, d.d + d.dq};
    case Block::W2: return {d.a, d.g, d.g};
    case Block::B2: return {d.a, 1, d.g};
    case Block::Count: break;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown parameter block");
}

template <typename T>
struct MatrixView {
    T* data;
    std::size_t rows;
    std::size_t cols;

    T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    T& operator[](std::size_t i) const { return data[i]; }
};

/// Flat parameter storage, blocks laid out in Block order.
class Params {
public:
    Params() = default;

    explicit Params(const Dims& dims) : dims_(dims)
    {
        std::size_t offset = 0;
        for (std::size_t i = 0; i < kNumBlocks; ++i) {
            const Shape s = block_shape(static_cast<Block>(i), dims);
            offsets_[i] = offset;
            offset += s.rows * s.cols;
        }
        offsets_[kNumBlocks] = offset;
        data_.assign(offset, 0.0);
    }

    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per block.
    static Params init(const Dims& dims, std::uint64_t seed)
    {
        Params p(dims);
        Rng rng(seed);
        for (std::size_t i = 0; i < kNumBlocks; ++i) {
            const Shape s = block_shape(static_cast<Block>(i), dims);
            const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
            for (double& v : p.block(static_cast<Block>(i))) {
                v = rng.uniform(-bound, bound);
            }
        }
        return p;
    }

    const Dims& dims() const noexcept { return dims_; }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> block(Block b)
    {
        const auto i = static_cast<std::size_t>(b);
        return {data_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    std::span<const double> block(Block b) const
    {
        const auto i = static_cast<std::size_t>(b);
        return {data_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }

    MatrixView<double> mat(Block b)
    {
        const Shape s = block_shape(b, dims_);
        return {block(b).data(), s.rows, s.cols};
    }
    MatrixView<const double> mat(Block b) const
    {
        const Shape s = block_shape(b, dims_);
        return {block(b).data(), s.rows, s.cols};
    }

    bool finite() const
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    bool operator==(const Params& o) const { return dims_ == o.dims_ && data_ == o.data_; }

private:
    Dims dims_{};
    std::array<std::size_t, kNumBlocks + 1> offsets_{};
    std::vector<double> data_;
};

namespace detail {

inline std::vector<double> matvec(MatrixView<const double> m, std::span<const double> x)
{
    std::vector<double> y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) {
            acc += m(r, c) * x[c];
        }
        y[r] = acc;
    }
    return y;
}

/// y += m^T x
inline void matvec_t_add(MatrixView<const double> m, std::span<const double> x, std::span<double> y)
{
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            y[c] += m(r, c) * x[r];
        }
    }
}

/// m += a b^T
inline void outer_add(MatrixView<double> m, std::span<const double> a, std::span<const double> b)
{
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            m(r, c) += a[r] * b[c];
        }
    }
}

inline std::vector<double> softmax(std::span<const double> z)
{
    const double mx = *std::max_element(z.begin(), z.end());
    std::vector<double> out(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - mx);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

/// Gradient w.r.t. softmax logits given the gradient w.r.t. its output.
inline std::vector<double> softmax_backward(std::span<const double> p, std::span<const double> dp)
{
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        dot += p[i] * dp[i];
    }
    std::vector<double> dz(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        dz[i] = p[i] * (dp[i] - dot);
    }
    return dz;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::size_t argmax(std::span<const double> v)
{
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

} // namespace detail

struct ReasoningState {
    std::vector<double> h;
    std::size_t step = 0;
    std::vector<std::vector<double>> r_history;
    std::vector<std::vector<double>> alpha_history;
};

/// h_0 = W_q q, with empty histories. The first cell input is the zero vector.
inline ReasoningState init_state(std::span<const double> q, const Params& p)
{
    if (q.size() != p.dims().dq) {
        throw Error(ErrorKind::ShapeMismatch, "question vector has the wrong length");
    }
    return {detail::matvec(p.mat(Block::Wq), q), 0, {}, {}};
}

/// Intermediate values of one step, kept for the backward pass.
struct StepCache {
    std::vector<double> x, h_prev, z, rg, hn, n, h, r, g, alpha;
};

namespace detail {

inline void check_features(std::span<const double> v, const Dims& d)
{
    if (v.size() != d.k * d.d) {
        throw Error(ErrorKind::ShapeMismatch, "proposal features must be K x D");
    }
}

/// u_k = W_v v_k for every proposal, K x H' row-major.
inline std::vector<double> project_features(std::span<const double> v, const Params& p)
{
    const Dims& d = p.dims();
    const auto wv = p.mat(Block::Wv);
    std::vector<double> u(d.k * d.hp, 0.0);
    for (std::size_t k = 0; k < d.k; ++k) {
        for (std::size_t i = 0; i < d.hp; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d.d; ++j) {
                acc += wv(i, j) * v[k * d.d + j];
            }
            u[k * d.hp + i] = acc;
        }
    }
    return u;
}

inline StepCache forward_step(std::span<const double> x, std::span<const double> h_prev,
                              std::span<const double> u, const Params& p)
{
    const Dims& d = p.dims();
    StepCache c;
    c.x.assign(x.begin(), x.end());
    c.h_prev.assign(h_prev.begin(), h_prev.end());

    const auto xz = matvec(p.mat(Block::Wxz), x);
    const auto hz = matvec(p.mat(Block::Whz), h_prev);
    const auto xr = matvec(p.mat(Block::Wxr), x);
    const auto hr = matvec(p.mat(Block::Whr), h_prev);
    const auto xn = matvec(p.mat(Block::Wxn), x);
    c.hn = matvec(p.mat(Block::Whn), h_prev);
    const auto bz = p.block(Block::Bz);
    const auto br = p.block(Block::Br);
    const auto bn = p.block(Block::Bn);

    c.z.resize(d.h);
    c.rg.resize(d.h);
    c.n.resize(d.h);
    c.h.resize(d.h);
    for (std::size_t i = 0; i < d.h; ++i) {
        c.z[i] = sigmoid(xz[i] + hz[i] + bz[i]);
        c.rg[i] = sigmoid(xr[i] + hr[i] + br[i]);
        c.n[i] = std::tanh(xn[i] + c.rg[i] * c.hn[i] + bn[i]);
        c.h[i] = (1.0 - c.z[i]) * c.n[i] + c.z[i] * h_prev[i];
    }

    c.r = softmax(matvec(p.mat(Block::Wr), c.h));

    c.g = matvec(p.mat(Block::Wh), c.h);
    const auto wa = p.block(Block::Walpha);
    std::vector<double> scores(d.k, 0.0);
    for (std::size_t k = 0; k < d.k; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < d.hp; ++i) {
            s += wa[i] * u[k * d.hp + i] * c.g[i];
        }
        scores[k] = s;
    }
    c.alpha = softmax(scores);
    return c;
}

} // namespace detail

/// One reasoning step: GRU update from (x_t, h_{t-1}), operation and
/// attention distributions, next input x_{t+1} = W_op r_t.
inline ReasoningState step(const ReasoningState& state, std::span<const double> v, const Params& p)
{
    const Dims& d = p.dims();
    if (state.step >= d.t_max) {
        throw Error(ErrorKind::MaxStepsExceeded, "reasoning already ran " + std::to_string(d.t_max) + " steps");
    }
    detail::check_features(v, d);
    const std::vector<double> x =
        state.r_history.empty() ? std::vector<double>(d.e, 0.0) : detail::matvec(p.mat(Block::Wop), state.r_history.back());
    const auto u = detail::project_features(v, p);
    StepCache c = detail::forward_step(x, state.h, u, p);
    ReasoningState next = state;
    next.h = std::move(c.h);
    next.step += 1;
    next.r_history.push_back(std::move(c.r));
    next.alpha_history.push_back(std::move(c.alpha));
    return next;
}

/// alpha^r = mean of the per-step attention distributions.
inline std::vector<double> aggregate_attention(const ReasoningState& state)
{
    if (state.alpha_history.empty()) {
        throw Error(ErrorKind::NoSteps, "no reasoning steps to aggregate");
    }
    std::vector<double> out(state.alpha_history.front().size(), 0.0);
    for (const auto& a : state.alpha_history) {
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] += a[k];
        }
    }
    for (double& v : out) {
        v /= static_cast<double>(state.alpha_history.size());
    }
    return out;
}

struct AnswerCache {
    std::vector<double> input, hidden, probs;
};

namespace detail {

inline AnswerCache answer_forward(std::span<const double> alpha_r, std::span<const double> v,
                                  std::span<const double> q, const Params& p)
{
    const Dims& d = p.dims();
    AnswerCache c;
    c.input.assign(d.d + d.dq, 0.0);
    for (std::size_t k = 0; k < d.k; ++k) {
        for (std::size_t j = 0; j < d.d; ++j) {
            c.input[j] += alpha_r[k] * v[k * d.d + j];
        }
    }
    std::copy(q.begin(), q.end(), c.input.begin() + static_cast<std::ptrdiff_t>(d.d));
    c.hidden = matvec(p.mat(Block::W1), c.input);
    const auto b1 = p.block(Block::B1);
    for (std::size_t i = 0; i < d.g; ++i) {
        c.hidden[i] = std::tanh(c.hidden[i] + b1[i]);
    }
    auto logits = matvec(p.mat(Block::W2), c.hidden);
    const auto b2 = p.block(Block::B2);
    for (std::size_t i = 0; i < d.a; ++i) {
        logits[i] += b2[i];
    }
    c.probs = softmax(logits);
    return c;
}

} // namespace detail

/// Answer distribution from the context sum_k alpha^r_k v_k concatenated
/// with q, through tanh hidden layer and softmax output.
inline std::vector<double> predict_answer(std::span<const double> alpha_r, std::span<const double> v,
                                          std::span<const double> q, const Params& p)
{
    const Dims& d = p.dims();
    detail::check_features(v, d);
    if (alpha_r.size() != d.k || q.size() != d.dq) {
        throw Error(ErrorKind::ShapeMismatch, "answer head inputs have the wrong length");
    }
    return detail::answer_forward(alpha_r, v, q, p).probs;
}

// ---------------------------------------------------------------------------
// Training objective

struct Sample {
    std::vector<double> q;                    ///< Dq
    std::vector<double> v;                    ///< K x D row-major
    std::size_t answer = 0;                   ///< class index
    std::vector<std::size_t> ops;             ///< operation index per program step
    std::vector<std::vector<double>> targets; ///< per program step; empty = no supervision
    std::vector<double> negative;             ///< proposal-indexed negative map; empty = none
};

struct ObjectiveConfig {
    LossConfig loss;          ///< theta: attention KL, phi: operation CE
    double neg_weight = 0.0;  ///< weight of the negative cross-entropy on alpha^r
};

struct LossBreakdown {
    double total = 0.0;
    double answer = 0.0;
    double attention = 0.0; ///< sum of step KL terms
    double operation = 0.0; ///< sum of step CE terms
    double negative = 0.0;
};

struct LossAndGrads {
    LossBreakdown loss;
    Params grads;
};

inline std::size_t unroll_length(const Sample& s, const Dims& d) { return std::min(s.ops.size() + 1, d.t_max); }

namespace detail {

inline void check_sample(const Sample& s, const Dims& d)
{
    if (s.q.size() != d.dq || s.v.size() != d.k * d.d || s.answer >= d.a || s.ops.empty() ||
        s.targets.size() != s.ops.size() || (!s.negative.empty() && s.negative.size() != d.k)) {
        throw Error(ErrorKind::ShapeMismatch, "toy sample does not match the model dimensions");
    }
    for (std::size_t op : s.ops) {
        if (op >= d.r) {
            throw Error(ErrorKind::ShapeMismatch, "operation label out of range");
        }
    }
    for (const auto& t : s.targets) {
        if (!t.empty() && t.size() != d.k) {
            throw Error(ErrorKind::ShapeMismatch, "attention target length differs from K");
        }
    }
}

/// Loss of one sample; gradients accumulated into `grads`.
inline LossBreakdown accumulate(const Sample& s, const Params& p, const ObjectiveConfig& cfg, Params& grads)
{
    const Dims& d = p.dims();
    check_sample(s, d);
    const std::size_t steps = unroll_length(s, d);
    const std::size_t program_len = std::min(s.ops.size(), steps);
    const auto len = static_cast<double>(program_len);

    // Forward
    const auto u = project_features(s.v, p);
    std::vector<double> h0 = matvec(p.mat(Block::Wq), s.q);
    std::vector<StepCache> caches;
    caches.reserve(steps);
    std::vector<double> x(d.e, 0.0);
    std::vector<double> h = h0;
    for (std::size_t t = 0; t < steps; ++t) {
        caches.push_back(forward_step(x, h, u, p));
        h = caches.back().h;
        x = matvec(p.mat(Block::Wop), caches.back().r);
    }
    std::vector<double> alpha_r(d.k, 0.0);
    for (std::size_t t = 0; t < program_len; ++t) {
        for (std::size_t k = 0; k < d.k; ++k) {
            alpha_r[k] += caches[t].alpha[k] / len;
        }
    }
    const AnswerCache ans = answer_forward(alpha_r, s.v, s.q, p);

    LossBreakdown L;
    L.answer = -std::log(std::max(ans.probs[s.answer], kProbabilityClamp));
    for (std::size_t t = 0; t < steps; ++t) {
        const std::size_t label = t < s.ops.size() ? s.ops[t] : kEndToken;
        L.operation -= std::log(std::max(caches[t].r[label], kProbabilityClamp));
        if (t < program_len && !s.targets[t].empty()) {
            L.attention += kl_attention_loss(s.targets[t], caches[t].alpha);
        }
    }
    if (!s.negative.empty()) {
        L.negative = neg_ce_loss(s.negative, alpha_r);
    }
    L.total = airm_total_loss(L.answer, std::span<const double>(&L.attention, 1),
                              std::span<const double>(&L.operation, 1), cfg.loss) +
              cfg.neg_weight * L.negative;

    // Backward: answer head
    std::vector<double> dlogits = ans.probs;
    dlogits[s.answer] -= 1.0;
    outer_add(grads.mat(Block::W2), dlogits, ans.hidden);
    for (std::size_t i = 0; i < d.a; ++i) {
        grads.block(Block::B2)[i] += dlogits[i];
    }
    std::vector<double> dhidden(d.g, 0.0);
    matvec_t_add(p.mat(Block::W2), dlogits, dhidden);
    for (std::size_t i = 0; i < d.g; ++i) {
        dhidden[i] *= 1.0 - ans.hidden[i] * ans.hidden[i];
        grads.block(Block::B1)[i] += dhidden[i];
    }
    outer_add(grads.mat(Block::W1), dhidden, ans.input);
    std::vector<double> dinput(d.d + d.dq, 0.0);
    matvec_t_add(p.mat(Block::W1), dhidden, dinput);

    std::vector<double> dalpha_r(d.k, 0.0);
    for (std::size_t k = 0; k < d.k; ++k) {
        for (std::size_t j = 0; j < d.d; ++j) {
            dalpha_r[k] += dinput[j] * s.v[k * d.d + j];
        }
        if (!s.negative.empty() && alpha_r[k] > kProbabilityClamp) {
            dalpha_r[k] += cfg.neg_weight * s.negative[k] / alpha_r[k];
        }
    }

    // Backward: recurrent steps
    const double theta = cfg.loss.theta;
    const double phi = cfg.loss.phi;
    const auto wa = p.block(Block::Walpha);
    auto dwa = grads.block(Block::Walpha);
    std::vector<double> du(d.k * d.hp, 0.0);
    std::vector<double> dh(d.h, 0.0);
    std::vector<double> dx_next(d.e, 0.0);
    for (std::size_t ti = steps; ti-- > 0;) {
        const StepCache& c = caches[ti];

        // Operation distribution: CE term plus the path into x_{t+1}.
        std::vector<double> dr(d.r, 0.0);
        matvec_t_add(p.mat(Block::Wop), dx_next, dr);
        outer_add(grads.mat(Block::Wop), dx_next, c.r);
        std::vector<double> dlogit_r = softmax_backward(c.r, dr);
        const std::size_t label = ti < s.ops.size() ? s.ops[ti] : kEndToken;
        for (std::size_t i = 0; i < d.r; ++i) {
            dlogit_r[i] += phi * (c.r[i] - (i == label ? 1.0 : 0.0));
        }
        outer_add(grads.mat(Block::Wr), dlogit_r, c.h);
        std::vector<double> dh_total = dh;
        matvec_t_add(p.mat(Block::Wr), dlogit_r, dh_total);

        // Attention distribution: KL term plus the path into alpha^r.
        std::vector<double> dscores(d.k, 0.0);
        if (ti < program_len) {
            std::vector<double> dalpha(d.k);
            for (std::size_t k = 0; k < d.k; ++k) {
                dalpha[k] = dalpha_r[k] / len;
            }
            dscores = softmax_backward(c.alpha, dalpha);
            if (!s.targets[ti].empty()) {
                for (std::size_t k = 0; k < d.k; ++k) {
                    dscores[k] += theta * (c.alpha[k] - s.targets[ti][k]);
                }
            }
        }
        std::vector<double> dg(d.hp, 0.0);
        for (std::size_t k = 0; k < d.k; ++k) {
            if (dscores[k] == 0.0) {
                continue;
            }
            for (std::size_t i = 0; i < d.hp; ++i) {
                const double uk = u[k * d.hp + i];
                dwa[i] += dscores[k] * uk * c.g[i];
                du[k * d.hp + i] += dscores[k] * wa[i] * c.g[i];
                dg[i] += dscores[k] * wa[i] * uk;
            }
        }
        outer_add(grads.mat(Block::Wh), dg, c.h);
        matvec_t_add(p.mat(Block::Wh), dg, dh_total);

        // GRU cell
        std::vector<double> dh_prev(d.h, 0.0);
        std::vector<double> da_n(d.h), da_z(d.h), da_r(d.h), dhn(d.h);
        for (std::size_t i = 0; i < d.h; ++i) {
            const double dn = dh_total[i] * (1.0 - c.z[i]);
            const double dz = dh_total[i] * (c.h_prev[i] - c.n[i]);
            dh_prev[i] = dh_total[i] * c.z[i];
            da_n[i] = dn * (1.0 - c.n[i] * c.n[i]);
            dhn[i] = da_n[i] * c.rg[i];
            da_r[i] = da_n[i] * c.hn[i] * c.rg[i] * (1.0 - c.rg[i]);
            da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
            grads.block(Block::Bn)[i] += da_n[i];
            grads.block(Block::Bz)[i] += da_z[i];
            grads.block(Block::Br)[i] += da_r[i];
        }
        outer_add(grads.mat(Block::Wxn), da_n, c.x);
        outer_add(grads.mat(Block::Whn), dhn, c.h_prev);
        outer_add(grads.mat(Block::Wxz), da_z, c.x);
        outer_add(grads.mat(Block::Whz), da_z, c.h_prev);
        outer_add(grads.mat(Block::Wxr), da_r, c.x);
        outer_add(grads.mat(Block::Whr), da_r, c.h_prev);
        matvec_t_add(p.mat(Block::Whn), dhn, dh_prev);
        matvec_t_add(p.mat(Block::Whz), da_z, dh_prev);
        matvec_t_add(p.mat(Block::Whr), da_r, dh_prev);

        std::fill(dx_next.begin(), dx_next.end(), 0.0);
        matvec_t_add(p.mat(Block::Wxn), da_n, dx_next);
        matvec_t_add(p.mat(Block::Wxz), da_z, dx_next);
        matvec_t_add(p.mat(Block::Wxr), da_r, dx_next);
        dh = std::move(dh_prev);
    }
    outer_add(grads.mat(Block::Wq), dh, s.q);

    auto dwv = grads.mat(Block::Wv);
    for (std::size_t k = 0; k < d.k; ++k) {
        for (std::size_t i = 0; i < d.hp; ++i) {
            const double g = du[k * d.hp + i];
            if (g == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < d.d; ++j) {
                dwv(i, j) += g * s.v[k * d.d + j];
            }
        }
    }
    return L;
}

} // namespace detail

/// Summed loss and gradients over a batch. Operation labels are padded with
/// the end token; the unroll covers the program plus one end step, capped at
/// T_max. Steps with an empty target carry no attention loss.
inline LossAndGrads loss_and_grads(std::span<const Sample> batch, const Params& p, const ObjectiveConfig& cfg)
{
    LossAndGrads out{{}, Params(p.dims())};
    for (const auto& s : batch) {
        const LossBreakdown l = detail::accumulate(s, p, cfg, out.grads);
        out.loss.total += l.total;
        out.loss.answer += l.answer;
        out.loss.attention += l.attention;
        out.loss.operation += l.operation;
        out.loss.negative += l.negative;
    }
    return out;
}

inline double loss_only(std::span<const Sample> batch, const Params& p, const ObjectiveConfig& cfg)
{
    return loss_and_grads(batch, p, cfg).loss.total;
}

// ---------------------------------------------------------------------------
// Inference

struct Inference {
    ReasoningState state;
    std::vector<std::size_t> ops;  ///< predicted operations before the end token
    std::vector<double> alpha_r;
    std::vector<double> answer;
};

/// Runs until the predicted operation is the end token or T_max steps;
/// alpha^r averages the steps before the end token (at least one).
inline Inference infer(const Sample& s, const Params& p)
{
    Inference out;
    out.state = init_state(s.q, p);
    std::size_t used = 0;
    while (out.state.step < p.dims().t_max) {
        out.state = step(out.state, s.v, p);
        const std::size_t op = detail::argmax(out.state.r_history.back());
        if (op == kEndToken) {
            break;
        }
        out.ops.push_back(op);
        ++used;
    }
    ReasoningState kept = out.state;
    kept.alpha_history.resize(std::max<std::size_t>(used, 1));
    kept.step = kept.alpha_history.size();
    out.alpha_r = aggregate_attention(kept);
    out.answer = predict_answer(out.alpha_r, s.v, s.q, p);
    return out;
}

// ---------------------------------------------------------------------------
// Parameter blob: "AIRPAR01", u32 dimension count, u32 dims, f64 values.

inline constexpr char kParamsMagic[8] = {'A', 'I', 'R', 'P', 'A', 'R', '0', '1'};

inline void write_params(std::ostream& out, const Params& p)
{
    const auto put_u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            out.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
        }
    };
    out.write(kParamsMagic, 8);
    const Dims& d = p.dims();
    const std::array<std::size_t, 10> dims = {d.dq, d.d, d.h, d.hp, d.r, d.e, d.a, d.k, d.g, d.t_max};
    put_u32(static_cast<std::uint32_t>(dims.size()));
    for (std::size_t v : dims) {
        put_u32(static_cast<std::uint32_t>(v));
    }
    for (double v : p.values()) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            out.put(static_cast<char>((bits >> (8 * i)) & 0xFFu));
        }
    }
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing parameter blob");
    }
}

inline Params read_params(std::istream& in)
{
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kParamsMagic, 8) != 0) {
        throw Error(ErrorKind::SchemaViolation, "not an AIRPAR01 parameter blob");
    }
    const auto get = [&](int bytes) {
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            const int c = in.get();
            if (c == EOF) {
                throw Error(ErrorKind::SchemaViolation, "truncated parameter blob");
            }
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
        }
        return v;
    };
    if (get(4) != 10) {
        throw Error(ErrorKind::SchemaViolation, "unexpected parameter dimension count");
    }
    Dims d;
    for (std::size_t* f : {&d.dq, &d.d, &d.h, &d.hp, &d.r, &d.e, &d.a, &d.k, &d.g, &d.t_max}) {
        *f = static_cast<std::size_t>(get(4));
    }
    if (d.r != kNumOps + 1) {
        throw Error(ErrorKind::SchemaViolation, "operation vocabulary must have 9 entries");
    }
    Params p(d);
    for (double& v : p.values()) {
        v = std::bit_cast<double>(get(8));
    }
    return p;
}

inline void save_params(const std::filesystem::path& path, const Params& p)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    write_params(out, p);
}

inline Params load_params(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    return read_params(in);
}

} // namespace air::toy
