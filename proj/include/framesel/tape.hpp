#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "framesel/errors.hpp"
#include "framesel/tensor.hpp"

namespace framesel {

// Handle into a Tape. Only meaningful for the tape that produced it.
struct Var {
    std::uint32_t idx = 0xffffffffu;
    bool valid() const { return idx != 0xffffffffu; }
};

// Reverse-mode gradient tape over Tensor-valued nodes.
//
// Operations append nodes in execution order; backward() walks them in exact
// reverse order, accumulating adjoints. One tape is single-writer: build a
// graph, call backward, read adjoints, reset. reset() keeps slot storage so
// repeated per-example graphs reuse their buffers instead of reallocating.
//
// Every operation validates shapes and checks its output for NaN/Inf; a
// non-finite value raises NumericError rather than propagating silently.
template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void reset() {
        n_ = 0;
        extras_.clear();
    }

    std::size_t node_count() const { return n_; }

    const Tensor<T>& value(Var v) const { return values_[check(v)]; }
    T scalar_value(Var v) const {
        const Tensor<T>& t = values_[check(v)];
        if (!t.is_scalar()) throw ShapeError("scalar_value: node is not scalar " + t.shape_str());
        return t.data[0];
    }
    const Tensor<T>& adjoint(Var v) const { return adjoints_[check(v)]; }

    // ---- graph construction -------------------------------------------------

    Var leaf(const Tensor<T>& t) {
        auto [id, out] = fresh(Op::leaf, NOVAR, NOVAR);
        out->assign_like(t);
        out->data = t.data;
        return finish(id, "leaf");
    }

    Var leaf_scalar(T v) { return leaf(Tensor<T>::scalar(v)); }

    Var leaf_vec(std::size_t n, T fill) { return leaf(Tensor<T>::vec(n, fill)); }

    // w: [m x n] matrix, x: [n] vector -> [m] vector
    Var matvec(Var w, Var x) {
        const Tensor<T>& vw = values_[check(w)];
        const Tensor<T>& vx = values_[check(x)];
        if (vw.rank != 2) throw ShapeError("matvec: weight is not a matrix " + vw.shape_str());
        if (vw.cols() != vx.size())
            throw ShapeError("matvec: dimension mismatch " + vw.shape_str() + " * " + vx.shape_str());
        std::size_t m = vw.rows(); // fresh() may reallocate; vw dangles after it
        auto [id, out] = fresh(Op::matvec, w.idx, x.idx);
        out->assign_vec(m);
        const Tensor<T>& W = values_[w.idx];
        const Tensor<T>& X = values_[x.idx];
        for (std::size_t i = 0; i < W.rows(); ++i) {
            const T* row = W.row_ptr(i);
            T acc = T(0);
            for (std::size_t j = 0; j < X.size(); ++j) acc += row[j] * X.data[j];
            out->data[i] = acc;
        }
        return finish(id, "matvec");
    }

    Var add(Var a, Var b) { return binary_elemwise(Op::add, a, b, "add"); }
    Var sub(Var a, Var b) { return binary_elemwise(Op::sub, a, b, "sub"); }
    Var mul(Var a, Var b) { return binary_elemwise(Op::mul, a, b, "mul"); }

    Var scale(Var a, T c) {
        auto [id, out] = unary(Op::scale, a);
        nodes_[id].s0 = c;
        const Tensor<T>& va = values_[a.idx];
        for (std::size_t i = 0; i < va.size(); ++i) out->data[i] = c * va.data[i];
        return finish(id, "scale");
    }

    Var one_minus(Var a) {
        auto [id, out] = unary(Op::one_minus, a);
        const Tensor<T>& va = values_[a.idx];
        for (std::size_t i = 0; i < va.size(); ++i) out->data[i] = T(1) - va.data[i];
        return finish(id, "one_minus");
    }

    Var relu(Var a) {
        auto [id, out] = unary(Op::relu_, a);
        const Tensor<T>& va = values_[a.idx];
        for (std::size_t i = 0; i < va.size(); ++i) out->data[i] = va.data[i] > T(0) ? va.data[i] : T(0);
        return finish(id, "relu");
    }

    Var sigmoid(Var a) {
        auto [id, out] = unary(Op::sigmoid_, a);
        const Tensor<T>& va = values_[a.idx];
        for (std::size_t i = 0; i < va.size(); ++i) out->data[i] = T(1) / (T(1) + std::exp(-va.data[i]));
        return finish(id, "sigmoid");
    }

    Var tanh(Var a) {
        auto [id, out] = unary(Op::tanh_, a);
        const Tensor<T>& va = values_[a.idx];
        for (std::size_t i = 0; i < va.size(); ++i) out->data[i] = std::tanh(va.data[i]);
        return finish(id, "tanh");
    }

    // natural log; inputs must be strictly positive (clamp upstream)
    Var log(Var a) {
        const Tensor<T>& vin = values_[check(a)];
        for (T v : vin.data)
            if (!(v > T(0))) throw NumericError("log: non-positive input");
        auto [id, out] = unary(Op::log_, a);
        const Tensor<T>& va = values_[a.idx];
        for (std::size_t i = 0; i < va.size(); ++i) out->data[i] = std::log(va.data[i]);
        return finish(id, "log");
    }

    Var clamp(Var a, T lo, T hi) {
        auto [id, out] = unary(Op::clamp_, a);
        nodes_[id].s0 = lo;
        nodes_[id].s1 = hi;
        const Tensor<T>& va = values_[a.idx];
        for (std::size_t i = 0; i < va.size(); ++i) {
            T v = va.data[i];
            out->data[i] = v < lo ? lo : (v > hi ? hi : v);
        }
        return finish(id, "clamp");
    }

    // Step function at 0.5 with a straight-through backward (adjoint passes
    // unchanged). Inputs must lie in [0,1] up to 1e-6.
    //
    // When `frozen_decision`/`frozen_base` are given (fixed-decision gradient
    // checks), the op is replaced by its straight-through linearization around
    // the recorded base point: out = input + (decision - base_input). At the
    // base point this reproduces the recorded decision exactly, and central
    // differences of the replayed graph see the same unit slope the backward
    // pass claims. Replayed graphs are forward-only; call backward on the
    // recording pass, where outputs are exactly binary.
    Var binarize_st(Var a, const Tensor<T>* frozen_decision = nullptr,
                    const Tensor<T>* frozen_base = nullptr) {
        const Tensor<T>& vin = values_[check(a)];
        if (frozen_decision) {
            if (!frozen_base) throw ShapeError("binarize: frozen decision without base input");
            if (!frozen_decision->same_shape(vin) || !frozen_base->same_shape(vin))
                throw ShapeError("binarize: frozen decision shape mismatch");
        } else {
            for (T v : vin.data)
                if (v < T(-1e-6) || v > T(1) + T(1e-6))
                    throw NumericError("binarize: input outside [0,1]");
        }
        auto [id, out] = unary(Op::binarize, a);
        const Tensor<T>& va = values_[a.idx];
        if (frozen_decision) {
            for (std::size_t i = 0; i < va.size(); ++i)
                out->data[i] = va.data[i] + (frozen_decision->data[i] - frozen_base->data[i]);
        } else {
            for (std::size_t i = 0; i < va.size(); ++i)
                out->data[i] = va.data[i] >= T(0.5) ? T(1) : T(0);
        }
        return finish(id, "binarize");
    }

    // out[j] = on[j] if u[j]==1 else off[j]; u must be binary. The copy branch
    // is an exact copy, not an arithmetic blend. d/du = on - off.
    //
    // With `frozen` (replayed gradient checks, where u is a linearized gate
    // rather than exactly binary), the branch follows the recorded decision
    // and the value tracks u's deviation: out = selected + (u - D)(on - off).
    Var gate_mix(Var u, Var on, Var off, const Tensor<T>* frozen = nullptr) {
        const Tensor<T>& vu = values_[check(u)];
        const Tensor<T>& von = values_[check(on)];
        const Tensor<T>& voff = values_[check(off)];
        if (!vu.same_shape(von) || !vu.same_shape(voff))
            throw ShapeError("gate_mix: shape mismatch");
        if (frozen && !frozen->same_shape(vu)) throw ShapeError("gate_mix: frozen shape mismatch");
        auto [id, out] = fresh(Op::gate_mix, u.idx, on.idx);
        nodes_[id].c = off.idx;
        out->assign_like(values_[u.idx]);
        const Tensor<T>& U = values_[u.idx];
        const Tensor<T>& ON = values_[on.idx];
        const Tensor<T>& OFF = values_[off.idx];
        if (frozen) {
            for (std::size_t i = 0; i < U.size(); ++i) {
                T d = frozen->data[i];
                T sel = d == T(1) ? ON.data[i] : OFF.data[i];
                out->data[i] = sel + (U.data[i] - d) * (ON.data[i] - OFF.data[i]);
            }
        } else {
            for (std::size_t i = 0; i < U.size(); ++i)
                out->data[i] = U.data[i] == T(1) ? ON.data[i] : OFF.data[i];
        }
        return finish(id, "gate_mix");
    }

    // Accumulator advance for a copying skip neuron:
    //   out = u_tilde + min(delta, 1 - u_tilde), pinned to exactly 1 when the
    //   min clamps (so the invariant u_tilde <= 1 holds bit-exactly).
    // Gradient flows only on the unclamped branch.
    Var copy_accumulate(Var u_tilde, Var delta) {
        const Tensor<T>& vu = values_[check(u_tilde)];
        const Tensor<T>& vd = values_[check(delta)];
        if (!vu.same_shape(vd)) throw ShapeError("copy_accumulate: shape mismatch");
        auto [id, out] = fresh(Op::copy_accum, u_tilde.idx, delta.idx);
        out->assign_like(values_[u_tilde.idx]);
        const Tensor<T>& U = values_[u_tilde.idx];
        const Tensor<T>& D = values_[delta.idx];
        for (std::size_t i = 0; i < U.size(); ++i) {
            if (D.data[i] < T(1) - U.data[i]) {
                T v = U.data[i] + D.data[i];
                out->data[i] = v > T(1) ? T(1) : v;
            } else {
                out->data[i] = T(1);
            }
        }
        return finish(id, "copy_accumulate");
    }

    Var sum(Var a) {
        auto [id, out] = fresh(Op::sum_, a.idx, NOVAR);
        out->assign_vec(1);
        const Tensor<T>& va = values_[a.idx];
        T acc = T(0);
        for (T v : va.data) acc += v;
        out->data[0] = acc;
        return finish(id, "sum");
    }

    Var mean(Var a) {
        const Tensor<T>& vin = values_[check(a)];
        if (vin.size() == 0) throw ShapeError("mean: empty input");
        auto [id, out] = fresh(Op::mean_, a.idx, NOVAR);
        out->assign_vec(1);
        const Tensor<T>& va = values_[a.idx];
        T acc = T(0);
        for (T v : va.data) acc += v;
        out->data[0] = acc / static_cast<T>(va.size());
        return finish(id, "mean");
    }

    // Gathers k scalar nodes into a [k] vector.
    Var stack(std::span<const Var> scalars) {
        if (scalars.empty()) throw ShapeError("stack: empty input");
        for (Var s : scalars)
            if (!values_[check(s)].is_scalar()) throw ShapeError("stack: inputs must be scalars");
        auto [id, out] = fresh(Op::stack_, NOVAR, NOVAR);
        nodes_[id].ext_begin = static_cast<std::uint32_t>(extras_.size());
        nodes_[id].ext_count = static_cast<std::uint32_t>(scalars.size());
        for (Var s : scalars) extras_.push_back(s.idx);
        out->assign_vec(scalars.size());
        for (std::size_t i = 0; i < scalars.size(); ++i)
            out->data[i] = values_[scalars[i].idx].data[0];
        return finish(id, "stack");
    }

    // |a - target| for scalar a, subgradient 0 at the kink.
    Var abs_dev(Var a, T target) {
        if (!values_[check(a)].is_scalar()) throw ShapeError("abs_dev: input must be scalar");
        auto [id, out] = fresh(Op::abs_dev_, a.idx, NOVAR);
        nodes_[id].s0 = target;
        out->assign_vec(1);
        out->data[0] = std::abs(values_[a.idx].data[0] - target);
        return finish(id, "abs_dev");
    }

    // vector a scaled by a scalar node s
    Var mul_scalar(Var a, Var s) {
        if (!values_[check(s)].is_scalar()) throw ShapeError("mul_scalar: scale must be scalar");
        auto [id, out] = fresh(Op::mul_scalar_, a.idx, s.idx);
        out->assign_like(values_[a.idx]);
        const Tensor<T>& va = values_[a.idx];
        T sv = values_[s.idx].data[0];
        for (std::size_t i = 0; i < va.size(); ++i) out->data[i] = sv * va.data[i];
        return finish(id, "mul_scalar");
    }

    // Straight-through unit gate: forward value exactly 1 at the recorded base
    // probability, backward adjoint routed unchanged into the scalar
    // probability node. The value is 1 + (p - base), so a replayed graph with
    // a perturbed p exposes the unit slope to finite differences; whenever the
    // current p equals the base (every training pass), the forward value is
    // exactly 1.
    Var st_gate(Var p, T base) {
        if (!values_[check(p)].is_scalar()) throw ShapeError("st_gate: input must be scalar");
        auto [id, out] = fresh(Op::st_gate_, p.idx, NOVAR);
        out->assign_vec(1);
        T pv = values_[p.idx].data[0];
        out->data[0] = pv == base ? T(1) : T(1) + (pv - base);
        return finish(id, "st_gate");
    }

    Var softmax(Var a) {
        const Tensor<T>& vin = values_[check(a)];
        if (vin.size() == 0) throw ShapeError("softmax: empty input");
        require_finite(vin, "softmax input");
        auto [id, out] = fresh(Op::softmax_, a.idx, NOVAR);
        out->assign_like(values_[a.idx]);
        const Tensor<T>& va = values_[a.idx];
        T mx = va.data[0];
        for (T v : va.data) mx = v > mx ? v : mx;
        T denom = T(0);
        for (std::size_t i = 0; i < va.size(); ++i) {
            out->data[i] = std::exp(va.data[i] - mx);
            denom += out->data[i];
        }
        for (std::size_t i = 0; i < va.size(); ++i) out->data[i] /= denom;
        return finish(id, "softmax");
    }

    // -ln(probs[label]) with a 1e-12 probability floor.
    Var cross_entropy(Var probs, std::size_t label) {
        const Tensor<T>& vin = values_[check(probs)];
        if (label >= vin.size())
            throw ShapeError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                             vin.shape_str());
        auto [id, out] = fresh(Op::cross_entropy_, probs.idx, NOVAR);
        nodes_[id].label = static_cast<std::int32_t>(label);
        out->assign_vec(1);
        T p = values_[probs.idx].data[label];
        out->data[0] = -std::log(p > prob_floor() ? p : prob_floor());
        return finish(id, "cross_entropy");
    }

    static constexpr T prob_floor() { return T(1e-12); }

    // ---- backward -----------------------------------------------------------

    void backward(Var root) {
        std::size_t r = check(root);
        if (!values_[r].is_scalar()) throw ShapeError("backward: root must be scalar");
        if (adjoints_.size() < n_) adjoints_.resize(n_);
        for (std::size_t i = 0; i <= r; ++i) {
            adjoints_[i].assign_like(values_[i]);
            adjoints_[i].zero();
        }
        adjoints_[r].data[0] = T(1);
        for (std::size_t i = r + 1; i-- > 0;) propagate(i);
    }

private:
    enum class Op : std::uint8_t {
        leaf,
        matvec,
        add,
        sub,
        mul,
        scale,
        one_minus,
        relu_,
        sigmoid_,
        tanh_,
        log_,
        clamp_,
        binarize,
        gate_mix,
        copy_accum,
        sum_,
        mean_,
        stack_,
        abs_dev_,
        mul_scalar_,
        st_gate_,
        softmax_,
        cross_entropy_,
    };

    static constexpr std::uint32_t NOVAR = 0xffffffffu;

    struct Node {
        Op op;
        std::uint32_t a = NOVAR;
        std::uint32_t b = NOVAR;
        std::uint32_t c = NOVAR;
        T s0 = T(0);
        T s1 = T(0);
        std::int32_t label = 0;
        std::uint32_t ext_begin = 0;
        std::uint32_t ext_count = 0;
    };

    std::size_t check(Var v) const {
        if (!v.valid() || v.idx >= n_) throw ShapeError("invalid tape variable");
        return v.idx;
    }

    // Allocates the next node+value slot. Returns (node id, value slot). The
    // pointer stays valid until the next fresh() call.
    std::pair<std::uint32_t, Tensor<T>*> fresh(Op op, std::uint32_t a, std::uint32_t b) {
        std::uint32_t id = static_cast<std::uint32_t>(n_);
        if (n_ == nodes_.size()) {
            nodes_.emplace_back();
            values_.emplace_back();
        }
        ++n_;
        nodes_[id] = Node{};
        nodes_[id].op = op;
        nodes_[id].a = a;
        nodes_[id].b = b;
        return {id, &values_[id]};
    }

    std::pair<std::uint32_t, Tensor<T>*> unary(Op op, Var a) {
        check(a);
        auto r = fresh(op, a.idx, NOVAR);
        r.second->assign_like(values_[a.idx]);
        return r;
    }

    Var finish(std::uint32_t id, const char* what) {
        require_finite(values_[id], what);
        return Var{id};
    }

    Var binary_elemwise(Op op, Var a, Var b, const char* what) {
        const Tensor<T>& va = values_[check(a)];
        const Tensor<T>& vb = values_[check(b)];
        if (!va.same_shape(vb))
            throw ShapeError(std::string(what) + ": shape mismatch " + va.shape_str() + " vs " +
                             vb.shape_str());
        auto [id, out] = fresh(op, a.idx, b.idx);
        out->assign_like(values_[a.idx]);
        const Tensor<T>& A = values_[a.idx];
        const Tensor<T>& B = values_[b.idx];
        switch (op) {
            case Op::add:
                for (std::size_t i = 0; i < A.size(); ++i) out->data[i] = A.data[i] + B.data[i];
                break;
            case Op::sub:
                for (std::size_t i = 0; i < A.size(); ++i) out->data[i] = A.data[i] - B.data[i];
                break;
            case Op::mul:
                for (std::size_t i = 0; i < A.size(); ++i) out->data[i] = A.data[i] * B.data[i];
                break;
            default:
                break;
        }
        return finish(id, what);
    }

    void propagate(std::size_t i) {
        const Node& nd = nodes_[i];
        const Tensor<T>& g = adjoints_[i];
        switch (nd.op) {
            case Op::leaf:
                break;
            case Op::matvec: {
                Tensor<T>& dw = adjoints_[nd.a];
                Tensor<T>& dx = adjoints_[nd.b];
                const Tensor<T>& W = values_[nd.a];
                const Tensor<T>& X = values_[nd.b];
                for (std::size_t r = 0; r < W.rows(); ++r) {
                    T gr = g.data[r];
                    if (gr == T(0)) continue;
                    T* dwrow = dw.row_ptr(r);
                    const T* wrow = W.row_ptr(r);
                    for (std::size_t c = 0; c < W.cols(); ++c) {
                        dwrow[c] += gr * X.data[c];
                        dx.data[c] += gr * wrow[c];
                    }
                }
                break;
            }
            case Op::add: {
                accum(nd.a, g, T(1));
                accum(nd.b, g, T(1));
                break;
            }
            case Op::sub: {
                accum(nd.a, g, T(1));
                accum(nd.b, g, T(-1));
                break;
            }
            case Op::mul: {
                Tensor<T>& da = adjoints_[nd.a];
                Tensor<T>& db = adjoints_[nd.b];
                const Tensor<T>& A = values_[nd.a];
                const Tensor<T>& B = values_[nd.b];
                for (std::size_t k = 0; k < g.size(); ++k) {
                    da.data[k] += g.data[k] * B.data[k];
                    db.data[k] += g.data[k] * A.data[k];
                }
                break;
            }
            case Op::scale:
                accum(nd.a, g, nd.s0);
                break;
            case Op::one_minus:
                accum(nd.a, g, T(-1));
                break;
            case Op::relu_: {
                Tensor<T>& da = adjoints_[nd.a];
                const Tensor<T>& A = values_[nd.a];
                for (std::size_t k = 0; k < g.size(); ++k)
                    if (A.data[k] > T(0)) da.data[k] += g.data[k];
                break;
            }
            case Op::sigmoid_: {
                Tensor<T>& da = adjoints_[nd.a];
                const Tensor<T>& Y = values_[i];
                for (std::size_t k = 0; k < g.size(); ++k)
                    da.data[k] += g.data[k] * Y.data[k] * (T(1) - Y.data[k]);
                break;
            }
            case Op::tanh_: {
                Tensor<T>& da = adjoints_[nd.a];
                const Tensor<T>& Y = values_[i];
                for (std::size_t k = 0; k < g.size(); ++k)
                    da.data[k] += g.data[k] * (T(1) - Y.data[k] * Y.data[k]);
                break;
            }
            case Op::log_: {
                Tensor<T>& da = adjoints_[nd.a];
                const Tensor<T>& A = values_[nd.a];
                for (std::size_t k = 0; k < g.size(); ++k) da.data[k] += g.data[k] / A.data[k];
                break;
            }
            case Op::clamp_: {
                Tensor<T>& da = adjoints_[nd.a];
                const Tensor<T>& A = values_[nd.a];
                for (std::size_t k = 0; k < g.size(); ++k)
                    if (A.data[k] >= nd.s0 && A.data[k] <= nd.s1) da.data[k] += g.data[k];
                break;
            }
            case Op::binarize:
                accum(nd.a, g, T(1)); // straight-through
                break;
            case Op::gate_mix: {
                Tensor<T>& du = adjoints_[nd.a];
                Tensor<T>& don = adjoints_[nd.b];
                Tensor<T>& doff = adjoints_[nd.c];
                const Tensor<T>& U = values_[nd.a];
                const Tensor<T>& ON = values_[nd.b];
                const Tensor<T>& OFF = values_[nd.c];
                for (std::size_t k = 0; k < g.size(); ++k) {
                    if (U.data[k] == T(1))
                        don.data[k] += g.data[k];
                    else
                        doff.data[k] += g.data[k];
                    du.data[k] += g.data[k] * (ON.data[k] - OFF.data[k]);
                }
                break;
            }
            case Op::copy_accum: {
                Tensor<T>& du = adjoints_[nd.a];
                Tensor<T>& dd = adjoints_[nd.b];
                const Tensor<T>& U = values_[nd.a];
                const Tensor<T>& D = values_[nd.b];
                for (std::size_t k = 0; k < g.size(); ++k) {
                    if (D.data[k] < T(1) - U.data[k]) {
                        du.data[k] += g.data[k];
                        dd.data[k] += g.data[k];
                    }
                }
                break;
            }
            case Op::sum_:
                accum(nd.a, g.data[0]);
                break;
            case Op::mean_:
                accum(nd.a, g.data[0] / static_cast<T>(values_[nd.a].size()));
                break;
            case Op::stack_: {
                for (std::uint32_t k = 0; k < nd.ext_count; ++k)
                    adjoints_[extras_[nd.ext_begin + k]].data[0] += g.data[k];
                break;
            }
            case Op::abs_dev_: {
                T d = values_[nd.a].data[0] - nd.s0;
                if (d > T(0))
                    adjoints_[nd.a].data[0] += g.data[0];
                else if (d < T(0))
                    adjoints_[nd.a].data[0] -= g.data[0];
                break;
            }
            case Op::mul_scalar_: {
                Tensor<T>& da = adjoints_[nd.a];
                Tensor<T>& ds = adjoints_[nd.b];
                const Tensor<T>& A = values_[nd.a];
                T sv = values_[nd.b].data[0];
                T acc = T(0);
                for (std::size_t k = 0; k < g.size(); ++k) {
                    da.data[k] += g.data[k] * sv;
                    acc += g.data[k] * A.data[k];
                }
                ds.data[0] += acc;
                break;
            }
            case Op::st_gate_:
                adjoints_[nd.a].data[0] += g.data[0]; // straight-through
                break;
            case Op::softmax_: {
                Tensor<T>& da = adjoints_[nd.a];
                const Tensor<T>& Y = values_[i];
                T dot = T(0);
                for (std::size_t k = 0; k < g.size(); ++k) dot += g.data[k] * Y.data[k];
                for (std::size_t k = 0; k < g.size(); ++k)
                    da.data[k] += Y.data[k] * (g.data[k] - dot);
                break;
            }
            case Op::cross_entropy_: {
                std::size_t l = static_cast<std::size_t>(nd.label);
                T p = values_[nd.a].data[l];
                if (p >= prob_floor()) adjoints_[nd.a].data[l] -= g.data[0] / p;
                break;
            }
        }
    }

    void accum(std::uint32_t target, const Tensor<T>& g, T factor) {
        Tensor<T>& d = adjoints_[target];
        for (std::size_t k = 0; k < g.size(); ++k) d.data[k] += factor * g.data[k];
    }

    void accum(std::uint32_t target, T broadcast) {
        Tensor<T>& d = adjoints_[target];
        for (std::size_t k = 0; k < d.size(); ++k) d.data[k] += broadcast;
    }

    std::vector<Node> nodes_;
    std::vector<Tensor<T>> values_;
    std::vector<Tensor<T>> adjoints_;
    std::vector<std::uint32_t> extras_;
    std::size_t n_ = 0;
};

// Plain (non-tape) softmax, shared by evaluation paths and tests.
template <typename T>
inline Tensor<T> softmax_value(const Tensor<T>& logits) {
    if (logits.size() == 0) throw ShapeError("softmax: empty input");
    require_finite(logits, "softmax input");
    Tensor<T> out;
    out.assign_like(logits);
    T mx = logits.data[0];
    for (T v : logits.data) mx = v > mx ? v : mx;
    T denom = T(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.data[i] = std::exp(logits.data[i] - mx);
        denom += out.data[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i) out.data[i] /= denom;
    return out;
}

// Plain cross-entropy with the same 1e-12 floor as the tape op.
template <typename T>
inline T cross_entropy_value(const Tensor<T>& probs, std::size_t label) {
    if (label >= probs.size()) throw ShapeError("cross_entropy: label out of range");
    T p = probs.data[label];
    T floor = Tape<T>::prob_floor();
    return -std::log(p > floor ? p : floor);
}

} // namespace framesel
