#pragma once

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

enum class ClassifierCell { gru, indrnn };

inline ClassifierCell parse_classifier_cell(const std::string& s) {
    if (s == "gru") return ClassifierCell::gru;
    if (s == "indrnn") return ClassifierCell::indrnn;
    throw ConfigError("unknown classifier cell: " + s);
}

// Recognition head: recurrent cell over the (possibly compacted) sequence,
// then FC -> relu -> FC -> softmax on the final hidden state. Runs stand-alone
// as the no-selection baseline.
struct ClassifierConfig {
    ClassifierCell cell = ClassifierCell::gru;
    std::size_t hidden = 1024;
    std::size_t fc_hidden = 100;
    std::size_t n_classes = 0;

    void validate() const {
        if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
        if (hidden < 1 || fc_hidden < 1) throw ConfigError("classifier sizes must be >= 1");
    }
};

template <typename T>
struct ClassifierModel {
    ClassifierConfig cfg;
    GruParams<T> gru;    // used when cfg.cell == gru
    IndRnnParams<T> ind; // used when cfg.cell == indrnn
    Tensor<T> fc1_w, fc1_b;
    Tensor<T> fc2_w, fc2_b;

    std::vector<std::pair<std::string, Tensor<T>*>> params(const std::string& prefix) {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        if (cfg.cell == ClassifierCell::gru) {
            out.emplace_back(prefix + "gru.wz", &gru.wz);
            out.emplace_back(prefix + "gru.uz", &gru.uz);
            out.emplace_back(prefix + "gru.bz", &gru.bz);
            out.emplace_back(prefix + "gru.wr", &gru.wr);
            out.emplace_back(prefix + "gru.ur", &gru.ur);
            out.emplace_back(prefix + "gru.br", &gru.br);
            out.emplace_back(prefix + "gru.wh", &gru.wh);
            out.emplace_back(prefix + "gru.uh", &gru.uh);
            out.emplace_back(prefix + "gru.bh", &gru.bh);
        } else {
            out.emplace_back(prefix + "ind.w", &ind.w);
            out.emplace_back(prefix + "ind.u", &ind.u);
            out.emplace_back(prefix + "ind.b", &ind.b);
        }
        out.emplace_back(prefix + "fc1.w", &fc1_w);
        out.emplace_back(prefix + "fc1.b", &fc1_b);
        out.emplace_back(prefix + "fc2.w", &fc2_w);
        out.emplace_back(prefix + "fc2.b", &fc2_b);
        return out;
    }
};

template <typename T>
inline ClassifierModel<T> init_classifier(const ClassifierConfig& cfg, std::size_t input_dim,
                                          Rng& rng) {
    cfg.validate();
    ClassifierModel<T> m;
    m.cfg = cfg;
    if (cfg.cell == ClassifierCell::gru)
        m.gru = init_gru<T>(cfg.hidden, input_dim, rng);
    else
        m.ind = init_indrnn<T>(cfg.hidden, input_dim, rng);
    m.fc1_w = Tensor<T>::mat(cfg.fc_hidden, cfg.hidden);
    init_glorot(m.fc1_w, rng);
    m.fc1_b = Tensor<T>::vec(cfg.fc_hidden);
    m.fc2_w = Tensor<T>::mat(cfg.n_classes, cfg.fc_hidden);
    init_glorot(m.fc2_w, rng);
    m.fc2_b = Tensor<T>::vec(cfg.n_classes);
    return m;
}

template <typename T>
struct ClassifierVars {
    GruVars gru;
    IndRnnVars ind;
    Var fc1_w, fc1_b, fc2_w, fc2_b;
    ClassifierCell cell;
    std::size_t hidden;
};

template <typename T>
inline ClassifierVars<T> bind(Tape<T>& tape, const ClassifierModel<T>& m) {
    ClassifierVars<T> v;
    v.cell = m.cfg.cell;
    v.hidden = m.cfg.hidden;
    if (m.cfg.cell == ClassifierCell::gru)
        v.gru = bind(tape, m.gru);
    else
        v.ind = bind(tape, m.ind);
    v.fc1_w = tape.leaf(m.fc1_w);
    v.fc1_b = tape.leaf(m.fc1_b);
    v.fc2_w = tape.leaf(m.fc2_w);
    v.fc2_b = tape.leaf(m.fc2_b);
    return v;
}

// Probability distribution over classes. The initial hidden state is zero and
// the readout uses the final hidden state.
template <typename T>
inline Var classify(Tape<T>& tape, const ClassifierVars<T>& v, std::span<const Var> frames) {
    if (frames.empty()) throw ShapeError("classify: empty input sequence");
    Var h = tape.leaf_vec(v.hidden, T(0));
    if (v.cell == ClassifierCell::gru) {
        for (Var x : frames) h = gru_step(tape, v.gru, x, h);
    } else {
        for (Var x : frames) h = indrnn_step(tape, v.ind, x, h);
    }
    Var a = tape.relu(tape.add(tape.matvec(v.fc1_w, h), v.fc1_b));
    Var logits = tape.add(tape.matvec(v.fc2_w, a), v.fc2_b);
    return tape.softmax(logits);
}

// Argmax with first index winning ties.
template <typename T>
inline std::size_t predict(std::span<const T> probs) {
    if (probs.empty()) throw ShapeError("predict: empty distribution");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    return best;
}

template <typename T>
inline std::size_t predict(const Tensor<T>& probs) {
    return predict(std::span<const T>(probs.data.data(), probs.data.size()));
}

template <typename T>
inline std::size_t predict(const std::vector<T>& probs) {
    return predict(std::span<const T>(probs.data(), probs.size()));
}

} // namespace framesel
