#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "framesel/cells.hpp"
#include "framesel/errors.hpp"
#include "framesel/rng.hpp"
#include "framesel/tape.hpp"
#include "framesel/tensor.hpp"

namespace framesel {

enum class SelectorVariant { rnn_plus, srnn_plus };

inline SelectorVariant parse_selector_variant(const std::string& s) {
    if (s == "rnn_plus") return SelectorVariant::rnn_plus;
    if (s == "srnn_plus") return SelectorVariant::srnn_plus;
    throw ConfigError("unknown selector variant: " + s);
}

// Frame-importance head: a 2-layer recurrent stack (plain IndRNN for RNN+,
// Skip IndRNN for SRNN+) followed by FC -> relu -> FC -> sigmoid, one keep
// probability per frame.
struct SelectorConfig {
    SelectorVariant variant = SelectorVariant::rnn_plus;
    std::size_t hidden = 250;
    std::size_t fc1 = 50;
    std::size_t fc2 = 1;
    double m_r = 0.25;
    double lambda = 4.0;
    // Initial score bias. A positive value starts training near keep-all, so
    // the classifier learns on whole sequences while the reducing loss ramps
    // selection down; frames the classification gradient supports stay kept.
    double init_keep_bias = 2.2;

    void validate() const {
        if (!(m_r > 0.0 && m_r < 1.0)) throw ConfigError("m_r must be in (0,1)");
        if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
        if (hidden < 1 || fc1 < 1 || fc2 != 1) throw ConfigError("bad selector layer sizes");
    }
};

// Per-frame keep probabilities and decisions plus derived usage counts.
struct SelectionTrace {
    std::vector<double> p;
    std::vector<std::uint8_t> y;
    std::size_t kept = 0;
    bool fallback = false;

    std::size_t total() const { return p.size(); }
    double usage_pct() const {
        return total() == 0 ? 0.0 : 100.0 * static_cast<double>(kept) / static_cast<double>(total());
    }
};

template <typename T>
struct SelectorModel {
    SelectorConfig cfg;
    SkipIndRnnParams<T> l1; // w_p/b_p unused for rnn_plus
    SkipIndRnnParams<T> l2;
    Tensor<T> fc1_w, fc1_b;
    Tensor<T> fc2_w, fc2_b;

    bool skip() const { return cfg.variant == SelectorVariant::srnn_plus; }

    std::vector<std::pair<std::string, Tensor<T>*>> params(const std::string& prefix) {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        auto layer = [&](SkipIndRnnParams<T>& l, const std::string& name) {
            out.emplace_back(prefix + name + ".w", &l.base.w);
            out.emplace_back(prefix + name + ".u", &l.base.u);
            out.emplace_back(prefix + name + ".b", &l.base.b);
            if (skip()) {
                out.emplace_back(prefix + name + ".w_p", &l.w_p);
                out.emplace_back(prefix + name + ".b_p", &l.b_p);
            }
        };
        layer(l1, "l1");
        layer(l2, "l2");
        out.emplace_back(prefix + "fc1.w", &fc1_w);
        out.emplace_back(prefix + "fc1.b", &fc1_b);
        out.emplace_back(prefix + "fc2.w", &fc2_w);
        out.emplace_back(prefix + "fc2.b", &fc2_b);
        return out;
    }
};

template <typename T>
inline SelectorModel<T> init_selector(const SelectorConfig& cfg, std::size_t input_dim, Rng& rng) {
    cfg.validate();
    SelectorModel<T> m;
    m.cfg = cfg;
    m.l1 = init_skip_indrnn<T>(cfg.hidden, input_dim, rng);
    m.l2 = init_skip_indrnn<T>(cfg.hidden, cfg.hidden, rng);
    m.fc1_w = Tensor<T>::mat(cfg.fc1, cfg.hidden);
    init_glorot(m.fc1_w, rng);
    m.fc1_b = Tensor<T>::vec(cfg.fc1);
    m.fc2_w = Tensor<T>::mat(1, cfg.fc1);
    init_glorot(m.fc2_w, rng);
    m.fc2_b = Tensor<T>::vec(1, static_cast<T>(cfg.init_keep_bias));
    return m;
}

template <typename T>
struct SelectorVars {
    SkipIndRnnVars l1, l2;
    Var fc1_w, fc1_b, fc2_w, fc2_b;
    SelectorVariant variant;
};

template <typename T>
inline SelectorVars<T> bind(Tape<T>& tape, const SelectorModel<T>& m) {
    SelectorVars<T> v{bind(tape, m.l1),      bind(tape, m.l2),      tape.leaf(m.fc1_w),
                      tape.leaf(m.fc1_b),    tape.leaf(m.fc2_w),    tape.leaf(m.fc2_b),
                      m.cfg.variant};
    return v;
}

// Decision logs for the two recurrent layers (SRNN+ only); needed whenever a
// gradient check has to replay the same binary gates.
template <typename T>
struct SelectorLogs {
    SkipDecisionLog<T> l1, l2;
    void rewind() {
        l1.rewind();
        l2.rewind();
    }
    void freeze() {
        l1.replay = true;
        l2.replay = true;
    }
};

// One keep probability per frame. Deterministic given parameters.
template <typename T>
inline std::vector<Var> score_frames(Tape<T>& tape, const SelectorVars<T>& v,
                                     std::span<const Var> frames, std::size_t hidden,
                                     SelectorLogs<T>* logs = nullptr) {
    if (frames.empty()) throw ShapeError("score_frames: empty sequence");

    std::vector<Var> h1, h2;
    if (v.variant == SelectorVariant::srnn_plus) {
        auto o1 = unroll_skip_indrnn(tape, v.l1, frames, skip_initial_state(tape, hidden),
                                     logs ? &logs->l1 : nullptr);
        auto o2 = unroll_skip_indrnn(tape, v.l2, o1.h, skip_initial_state(tape, hidden),
                                     logs ? &logs->l2 : nullptr);
        h2 = std::move(o2.h);
    } else {
        Var h0 = tape.leaf_vec(hidden, T(0));
        h1 = unroll_indrnn(tape, v.l1.base, frames, h0);
        Var h0b = tape.leaf_vec(hidden, T(0));
        h2 = unroll_indrnn(tape, v.l2.base, h1, h0b);
    }

    std::vector<Var> p;
    p.reserve(h2.size());
    for (Var h : h2) {
        Var a = tape.relu(tape.add(tape.matvec(v.fc1_w, h), v.fc1_b));
        Var s = tape.add(tape.matvec(v.fc2_w, a), v.fc2_b);
        p.push_back(tape.sigmoid(s));
    }
    return p;
}

// Threshold rule: keep iff p >= 0.5. If nothing clears the threshold, keep the
// single argmax-p frame (first index on ties) so the classifier never sees an
// empty input.
inline SelectionTrace make_trace(std::span<const double> p) {
    if (p.empty()) throw ShapeError("make_trace: empty probabilities");
    SelectionTrace trace;
    trace.p.assign(p.begin(), p.end());
    trace.y.assign(p.size(), 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] >= 0.5) {
            trace.y[i] = 1;
            ++trace.kept;
        }
    }
    if (trace.kept == 0) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < p.size(); ++i)
            if (p[i] > p[best]) best = i;
        trace.y[best] = 1;
        trace.kept = 1;
        trace.fallback = true;
    }
    return trace;
}

template <typename T>
inline SelectionTrace make_trace(Tape<T>& tape, std::span<const Var> p) {
    std::vector<double> vals;
    vals.reserve(p.size());
    for (Var v : p) vals.push_back(static_cast<double>(tape.scalar_value(v)));
    return make_trace(vals);
}

inline std::vector<std::size_t> kept_indices(const SelectionTrace& trace) {
    std::vector<std::size_t> idx;
    idx.reserve(trace.kept);
    for (std::size_t i = 0; i < trace.y.size(); ++i)
        if (trace.y[i]) idx.push_back(i);
    return idx;
}

// Reducing Regularization: |mean(p) - m_R|, subgradient 0 at the kink.
template <typename T>
inline Var reducing_loss(Tape<T>& tape, std::span<const Var> p, T m_r) {
    if (p.empty()) throw ShapeError("reducing_loss: empty probabilities");
    return tape.abs_dev(tape.mean(tape.stack(p)), m_r);
}

template <typename T>
inline T reducing_loss(std::span<const T> p, T m_r) {
    if (p.empty()) throw ShapeError("reducing_loss: empty probabilities");
    T acc = T(0);
    for (T v : p) acc += v;
    T d = acc / static_cast<T>(p.size()) - m_r;
    return d < T(0) ? -d : d;
}

// Combined loss L = L_C + lambda * L_R.
template <typename T>
inline Var rnn_total_loss(Tape<T>& tape, Var l_c, Var l_r, T lambda) {
    return tape.add(l_c, tape.scale(l_r, lambda));
}

template <typename T>
inline T rnn_total_loss(T l_c, T l_r, T lambda) {
    return l_c + lambda * l_r;
}

// Hand-off of kept frames to the classifier. Each kept frame is scaled by a
// straight-through gate (forward value exactly 1, backward adjoint routed to
// its keep probability); deleted frames contribute nothing and receive zero
// classifier gradient. The trace's probabilities serve as the gate's base
// point, so a replayed graph under a frozen trace exposes the gate slope to
// finite differences while live passes multiply by exactly 1.
template <typename T>
inline std::vector<Var> gated_forward(Tape<T>& tape, const SelectionTrace& trace,
                                      std::span<const Var> p, std::span<const Var> frames) {
    if (trace.total() != p.size() || p.size() != frames.size())
        throw ShapeError("gated_forward: trace/probability/frame length mismatch");
    std::vector<Var> kept;
    kept.reserve(trace.kept);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!trace.y[i]) continue;
        Var gate = tape.st_gate(p[i], static_cast<T>(trace.p[i]));
        kept.push_back(tape.mul_scalar(frames[i], gate));
    }
    return kept;
}

// Data-path compaction: kept frames in original temporal order.
template <typename Seq>
inline Seq select_frames(const SelectionTrace& trace, const Seq& seq) {
    if (trace.total() != seq.n) throw ShapeError("select: trace length != sequence length");
    return seq.subset(kept_indices(trace));
}

} // namespace framesel
