#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "framesel/errors.hpp"
#include "framesel/rng.hpp"
#include "framesel/tape.hpp"
#include "framesel/tensor.hpp"

namespace framesel {

enum class Activation { relu, tanh, sigmoid };

inline Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    throw ConfigError("unknown activation: " + s);
}

template <typename T>
inline Var apply_activation(Tape<T>& tape, Var x, Activation act) {
    switch (act) {
        case Activation::relu: return tape.relu(x);
        case Activation::tanh: return tape.tanh(x);
        case Activation::sigmoid: return tape.sigmoid(x);
    }
    throw ConfigError("bad activation");
}

// Glorot-uniform fill for input weight matrices.
template <typename T>
inline void init_glorot(Tensor<T>& w, Rng& rng) {
    double fan_in = static_cast<double>(w.cols());
    double fan_out = static_cast<double>(w.rows());
    double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : w.data) v = static_cast<T>(rng.uniform(-s, s));
}

// Recurrent-weight clip bound keeping a T_max-step unroll stable.
inline double u_clip_bound(std::size_t t_max) {
    return std::pow(2.0, 1.0 / static_cast<double>(t_max));
}

// ---------------------------------------------------------------------------
// IndRNN: h_t = act(W x_t + u (*) h_{t-1} + b), with per-neuron recurrent
// weights (u is a vector, never a matrix).
// ---------------------------------------------------------------------------

template <typename T>
struct IndRnnParams {
    Tensor<T> w; // hidden x input
    Tensor<T> u; // hidden
    Tensor<T> b; // hidden
    Activation act = Activation::relu;

    std::size_t hidden() const { return u.size(); }
    std::size_t input() const { return w.cols(); }
};

struct IndRnnVars {
    Var w, u, b;
    Activation act = Activation::relu;
};

template <typename T>
inline IndRnnParams<T> init_indrnn(std::size_t hidden, std::size_t input, Rng& rng,
                                   Activation act = Activation::relu) {
    IndRnnParams<T> p;
    p.w = Tensor<T>::mat(hidden, input);
    init_glorot(p.w, rng);
    p.u = Tensor<T>::vec(hidden);
    for (auto& v : p.u.data) v = static_cast<T>(rng.uniform(0.0, 1.0));
    p.b = Tensor<T>::vec(hidden);
    p.act = act;
    return p;
}

template <typename T>
inline IndRnnVars bind(Tape<T>& tape, const IndRnnParams<T>& p) {
    return IndRnnVars{tape.leaf(p.w), tape.leaf(p.u), tape.leaf(p.b), p.act};
}

template <typename T>
inline Var indrnn_step(Tape<T>& tape, const IndRnnVars& v, Var x, Var h_prev) {
    Var pre = tape.add(tape.add(tape.matvec(v.w, x), tape.mul(v.u, h_prev)), v.b);
    return apply_activation(tape, pre, v.act);
}

template <typename T>
inline std::vector<Var> unroll_indrnn(Tape<T>& tape, const IndRnnVars& v, std::span<const Var> xs,
                                      Var h0) {
    std::vector<Var> hs;
    hs.reserve(xs.size());
    Var h = h0;
    for (Var x : xs) {
        h = indrnn_step(tape, v, x, h);
        hs.push_back(h);
    }
    return hs;
}

// Clamp |u_j| <= bound after an optimizer step.
template <typename T>
inline void clip_recurrent(IndRnnParams<T>& p, T bound) {
    for (auto& v : p.u.data) {
        if (v > bound) v = bound;
        if (v < -bound) v = -bound;
    }
}

// ---------------------------------------------------------------------------
// Skip IndRNN: per-neuron update/copy gating over the IndRNN candidate.
//   u_t        = binarize(u~_t)                        (straight-through)
//   h_t        = u_t (*) h^_t + (1 - u_t) (*) h_{t-1}  (exact copy branch)
//   du~_t      = sigmoid(w_p (*) h_t + b_p)
//   u~_{t+1}   = u_t (*) du~_t + (1 - u_t) (*) (u~_t + min(du~_t, 1 - u~_t))
// The gate weights are vectors (Hadamard), preserving neuron independence.
// ---------------------------------------------------------------------------

template <typename T>
struct SkipIndRnnParams {
    IndRnnParams<T> base;
    Tensor<T> w_p; // hidden
    Tensor<T> b_p; // hidden
};

struct SkipIndRnnVars {
    IndRnnVars base;
    Var w_p, b_p;
};

// h and the accumulator u~ carried between steps; u~ components stay in [0,1].
struct SkipStateVars {
    Var h;
    Var u_tilde;
};

// Records binarized gate decisions (and the accumulator values they were
// thresholded from) on the first pass and replays them on subsequent passes:
// the fixed-decision convention for gradient checks.
template <typename T>
struct SkipDecisionLog {
    struct Entry {
        Tensor<T> decision;
        Tensor<T> base;
    };
    std::vector<Entry> steps;
    bool replay = false;
    std::size_t cursor = 0;

    void rewind() { cursor = 0; }
};

template <typename T>
inline SkipIndRnnParams<T> init_skip_indrnn(std::size_t hidden, std::size_t input, Rng& rng,
                                            Activation act = Activation::relu) {
    SkipIndRnnParams<T> p;
    p.base = init_indrnn<T>(hidden, input, rng, act);
    p.w_p = Tensor<T>::vec(hidden);
    double s = std::sqrt(6.0 / (2.0 * static_cast<double>(hidden)));
    for (auto& v : p.w_p.data) v = static_cast<T>(rng.uniform(-s, s));
    p.b_p = Tensor<T>::vec(hidden);
    return p;
}

template <typename T>
inline SkipIndRnnVars bind(Tape<T>& tape, const SkipIndRnnParams<T>& p) {
    return SkipIndRnnVars{bind(tape, p.base), tape.leaf(p.w_p), tape.leaf(p.b_p)};
}

struct SkipStepResult {
    Var h;
    Var u_tilde_next;
    Var update_gate; // binary u_t
};

template <typename T>
inline SkipStepResult skip_indrnn_step(Tape<T>& tape, const SkipIndRnnVars& v, Var x,
                                       const SkipStateVars& state,
                                       SkipDecisionLog<T>* log = nullptr) {
    Var h_cand = indrnn_step(tape, v.base, x, state.h);

    Var u;
    const Tensor<T>* frozen = nullptr;
    if (log && log->replay) {
        if (log->cursor >= log->steps.size())
            throw ShapeError("skip decision log exhausted during replay");
        const auto& entry = log->steps[log->cursor++];
        u = tape.binarize_st(state.u_tilde, &entry.decision, &entry.base);
        frozen = &entry.decision;
    } else {
        u = tape.binarize_st(state.u_tilde);
        if (log) log->steps.push_back({tape.value(u), tape.value(state.u_tilde)});
    }

    Var h = tape.gate_mix(u, h_cand, state.h, frozen);
    Var delta = tape.sigmoid(tape.add(tape.mul(v.w_p, h), v.b_p));
    Var copied = tape.copy_accumulate(state.u_tilde, delta);
    Var u_next = tape.gate_mix(u, delta, copied, frozen);
    return SkipStepResult{h, u_next, u};
}

// Fresh start-of-sequence state: h = 0, u~ = 1 (first frame always updates).
template <typename T>
inline SkipStateVars skip_initial_state(Tape<T>& tape, std::size_t hidden) {
    return SkipStateVars{tape.leaf_vec(hidden, T(0)), tape.leaf_vec(hidden, T(1))};
}

struct SkipUnroll {
    std::vector<Var> h;
    std::vector<Var> gates;
    Var final_u_tilde;
};

template <typename T>
inline SkipUnroll unroll_skip_indrnn(Tape<T>& tape, const SkipIndRnnVars& v, std::span<const Var> xs,
                                     SkipStateVars state, SkipDecisionLog<T>* log = nullptr) {
    SkipUnroll out;
    out.h.reserve(xs.size());
    out.gates.reserve(xs.size());
    for (Var x : xs) {
        SkipStepResult r = skip_indrnn_step(tape, v, x, state, log);
        out.h.push_back(r.h);
        out.gates.push_back(r.update_gate);
        state = SkipStateVars{r.h, r.u_tilde_next};
    }
    out.final_u_tilde = state.u_tilde;
    return out;
}

// ---------------------------------------------------------------------------
// GRU (gated recurrent unit), the classification cell:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   c = tanh(Wh x + Uh (r (*) h) + bh)
//   h' = (1 - z) (*) h + z (*) c
// ---------------------------------------------------------------------------

template <typename T>
struct GruParams {
    Tensor<T> wz, uz, bz;
    Tensor<T> wr, ur, br;
    Tensor<T> wh, uh, bh;

    std::size_t hidden() const { return bz.size(); }
    std::size_t input() const { return wz.cols(); }
};

struct GruVars {
    Var wz, uz, bz;
    Var wr, ur, br;
    Var wh, uh, bh;
};

template <typename T>
inline GruParams<T> init_gru(std::size_t hidden, std::size_t input, Rng& rng) {
    GruParams<T> p;
    auto gate = [&](Tensor<T>& w, Tensor<T>& u, Tensor<T>& b) {
        w = Tensor<T>::mat(hidden, input);
        init_glorot(w, rng);
        u = Tensor<T>::mat(hidden, hidden);
        init_glorot(u, rng);
        b = Tensor<T>::vec(hidden);
    };
    gate(p.wz, p.uz, p.bz);
    gate(p.wr, p.ur, p.br);
    gate(p.wh, p.uh, p.bh);
    return p;
}

template <typename T>
inline GruVars bind(Tape<T>& tape, const GruParams<T>& p) {
    return GruVars{tape.leaf(p.wz), tape.leaf(p.uz), tape.leaf(p.bz),
                   tape.leaf(p.wr), tape.leaf(p.ur), tape.leaf(p.br),
                   tape.leaf(p.wh), tape.leaf(p.uh), tape.leaf(p.bh)};
}

template <typename T>
inline Var gru_step(Tape<T>& tape, const GruVars& v, Var x, Var h_prev) {
    Var z = tape.sigmoid(tape.add(tape.add(tape.matvec(v.wz, x), tape.matvec(v.uz, h_prev)), v.bz));
    Var r = tape.sigmoid(tape.add(tape.add(tape.matvec(v.wr, x), tape.matvec(v.ur, h_prev)), v.br));
    Var cand = tape.tanh(
        tape.add(tape.add(tape.matvec(v.wh, x), tape.matvec(v.uh, tape.mul(r, h_prev))), v.bh));
    return tape.add(tape.mul(tape.one_minus(z), h_prev), tape.mul(z, cand));
}

template <typename T>
inline std::vector<Var> unroll_gru(Tape<T>& tape, const GruVars& v, std::span<const Var> xs,
                                   Var h0) {
    std::vector<Var> hs;
    hs.reserve(xs.size());
    Var h = h0;
    for (Var x : xs) {
        h = gru_step(tape, v, x, h);
        hs.push_back(h);
    }
    return hs;
}

} // namespace framesel
