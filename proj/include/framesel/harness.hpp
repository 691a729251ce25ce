#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "framesel/adam.hpp"
#include "framesel/checkpoint.hpp"
#include "framesel/classifier.hpp"
#include "framesel/config.hpp"
#include "framesel/errors.hpp"
#include "framesel/policy.hpp"
#include "framesel/rhythm.hpp"
#include "framesel/selector.hpp"
#include "framesel/tape.hpp"

namespace framesel {

// ---------------------------------------------------------------------------
// Pipeline assembly
// ---------------------------------------------------------------------------

template <typename T = float>
struct Pipeline {
    ExperimentConfig cfg;
    ClassifierModel<T> classifier;
    SelectorModel<T> selector;
    bool has_selector = false;

    ModelVariant variant() const { return cfg.model_variant(); }

    std::vector<std::pair<std::string, Tensor<T>*>> named_params() {
        auto out = classifier.params("classifier/");
        if (has_selector) {
            auto sel = selector.params("selector/");
            out.insert(out.end(), sel.begin(), sel.end());
        }
        return out;
    }
};

// Builds the models for cfg, with per-module seeded initialization so that a
// variant's classifier weights depend only on (seed, classifier config), not
// on whether a selector exists. cfg.n_classes and cfg.dim must be resolved.
template <typename T = float>
inline Pipeline<T> build_pipeline(const ExperimentConfig& cfg) {
    if (cfg.n_classes < 2 || cfg.dim < 1)
        throw ConfigError("build_pipeline: n_classes and dim must be resolved first");

    Pipeline<T> p;
    p.cfg = cfg;

    ClassifierConfig ccfg;
    ccfg.cell = parse_classifier_cell(cfg.cls_cell);
    ccfg.hidden = cfg.cls_hidden;
    ccfg.fc_hidden = cfg.cls_fc;
    ccfg.n_classes = cfg.n_classes;
    Rng cls_rng(mix_seed(cfg.seed, "init.classifier"));
    p.classifier = init_classifier<T>(ccfg, cfg.dim, cls_rng);

    ModelVariant v = cfg.model_variant();
    p.has_selector = v != ModelVariant::baseline;
    if (p.has_selector) {
        SelectorConfig scfg;
        // the RL+ policy network reuses the RNN+ scoring stack
        scfg.variant = v == ModelVariant::srnn_plus ? SelectorVariant::srnn_plus
                                                    : SelectorVariant::rnn_plus;
        scfg.hidden = cfg.sel_hidden;
        scfg.fc1 = cfg.sel_fc1;
        scfg.m_r = cfg.m_r;
        scfg.lambda = cfg.lambda;
        scfg.init_keep_bias = cfg.sel_keep_bias;
        Rng sel_rng(mix_seed(cfg.seed, "init.selector"));
        p.selector = init_selector<T>(scfg, cfg.dim, sel_rng);
    }
    return p;
}

template <typename T>
struct BoundPipeline {
    ClassifierVars<T> cls;
    SelectorVars<T> sel;
    bool has_sel = false;
    std::vector<Var> leaves; // aligned with Pipeline::named_params()
};

template <typename T>
inline BoundPipeline<T> bind_pipeline(Tape<T>& tape, const Pipeline<T>& p) {
    BoundPipeline<T> b;
    b.cls = bind(tape, p.classifier);
    if (p.classifier.cfg.cell == ClassifierCell::gru) {
        const GruVars& g = b.cls.gru;
        b.leaves.insert(b.leaves.end(),
                        {g.wz, g.uz, g.bz, g.wr, g.ur, g.br, g.wh, g.uh, g.bh});
    } else {
        b.leaves.insert(b.leaves.end(), {b.cls.ind.w, b.cls.ind.u, b.cls.ind.b});
    }
    b.leaves.insert(b.leaves.end(), {b.cls.fc1_w, b.cls.fc1_b, b.cls.fc2_w, b.cls.fc2_b});

    b.has_sel = p.has_selector;
    if (p.has_selector) {
        b.sel = bind(tape, p.selector);
        auto push_layer = [&](const SkipIndRnnVars& l) {
            b.leaves.insert(b.leaves.end(), {l.base.w, l.base.u, l.base.b});
            if (p.selector.skip()) b.leaves.insert(b.leaves.end(), {l.w_p, l.b_p});
        };
        push_layer(b.sel.l1);
        push_layer(b.sel.l2);
        b.leaves.insert(b.leaves.end(), {b.sel.fc1_w, b.sel.fc1_b, b.sel.fc2_w, b.sel.fc2_b});
    }
    return b;
}

// ---------------------------------------------------------------------------
// Per-example forward pass, shared by training and evaluation
// ---------------------------------------------------------------------------

enum class ForwardMode { train, eval };

struct ExampleOutcome {
    Var loss;
    double l_c = 0.0;
    double l_r = 0.0;
    double reward_value = 0.0;
    bool has_reward = false;
    long predicted = -1;
    SelectionTrace trace;
    bool has_trace = false;
};

// State that persists across training examples (RL sampling stream and the
// optional moving-average reward baseline).
struct TrainState {
    Rng* sample_rng = nullptr;
    double keep_floor = 0.0;
    double reward_baseline = 0.0;
    std::size_t reward_count = 0;
};

template <typename T>
inline ExampleOutcome forward_example(Tape<T>& tape, const Pipeline<T>& p,
                                      const BoundPipeline<T>& b, const FeatureSequence& seq,
                                      ForwardMode mode, TrainState* train_state = nullptr) {
    if (seq.d != p.cfg.dim)
        throw ShapeError("sequence dimension " + std::to_string(seq.d) +
                         " does not match the model's " + std::to_string(p.cfg.dim));
    std::vector<Var> frames;
    frames.reserve(seq.n);
    for (std::size_t i = 0; i < seq.n; ++i) {
        Tensor<T> row;
        row.assign_vec(seq.d);
        const float* src = seq.frames.data() + i * seq.d;
        for (std::size_t k = 0; k < seq.d; ++k) row.data[k] = static_cast<T>(src[k]);
        frames.push_back(tape.leaf(row));
    }

    ExampleOutcome out;
    ModelVariant variant = p.variant();

    if (variant == ModelVariant::baseline) {
        Var probs = classify(tape, b.cls, frames);
        out.predicted = static_cast<long>(predict(tape.value(probs)));
        Var l_c = tape.cross_entropy(probs, seq.label);
        out.l_c = static_cast<double>(tape.scalar_value(l_c));
        out.loss = l_c;
        return out;
    }

    // score frames (or pin p = 1 when selection is forced to keep-all)
    std::vector<Var> pvars;
    if (p.cfg.keep_all) {
        pvars.reserve(seq.n);
        for (std::size_t i = 0; i < seq.n; ++i) pvars.push_back(tape.leaf_scalar(T(1)));
    } else {
        pvars = score_frames(tape, b.sel, frames, p.selector.cfg.hidden);
    }
    std::vector<double> pvals;
    pvals.reserve(pvars.size());
    for (Var v : pvars) pvals.push_back(static_cast<double>(tape.scalar_value(v)));

    if (variant == ModelVariant::rnn_plus || variant == ModelVariant::srnn_plus) {
        out.trace = make_trace(pvals);
        out.has_trace = true;
        auto kept = gated_forward<T>(tape, out.trace, pvars, frames);
        Var probs = classify(tape, b.cls, kept);
        out.predicted = static_cast<long>(predict(tape.value(probs)));
        Var l_c = tape.cross_entropy(probs, seq.label);
        Var l_r = reducing_loss<T>(tape, pvars, static_cast<T>(p.cfg.m_r));
        out.l_c = static_cast<double>(tape.scalar_value(l_c));
        out.l_r = static_cast<double>(tape.scalar_value(l_r));
        out.loss = rnn_total_loss(tape, l_c, l_r, static_cast<T>(p.cfg.lambda));
        return out;
    }

    // RL+: sampled actions during training, thresholded decisions at evaluation
    RewardConfig rcfg;
    rcfg.gamma = p.cfg.gamma;

    if (mode == ForwardMode::eval) {
        out.trace = make_trace(pvals);
        out.has_trace = true;
        std::vector<Var> kept;
        for (std::size_t i = 0; i < frames.size(); ++i)
            if (out.trace.y[i]) kept.push_back(frames[i]);
        Var probs = classify(tape, b.cls, kept);
        out.predicted = static_cast<long>(predict(tape.value(probs)));
        Var l_c = tape.cross_entropy(probs, seq.label);
        out.l_c = static_cast<double>(tape.scalar_value(l_c));
        out.loss = l_c;
        return out;
    }

    if (!train_state || !train_state->sample_rng)
        throw ConfigError("rl_plus training requires a sampling rng");
    ActionSample sample =
        sample_actions(pvals, *train_state->sample_rng, train_state->keep_floor);

    out.trace.p = pvals;
    out.trace.y = sample.actions;
    out.trace.kept = sample.kept();
    out.has_trace = true;

    bool correct = false;
    Var l_c{};
    bool have_l_c = false;
    if (sample.kept() == 0) {
        // classifier cannot run on an empty selection; scored as incorrect
        out.predicted = -1;
    } else {
        std::vector<Var> kept;
        for (std::size_t i = 0; i < frames.size(); ++i)
            if (sample.actions[i]) kept.push_back(frames[i]);
        Var probs = classify(tape, b.cls, kept);
        out.predicted = static_cast<long>(predict(tape.value(probs)));
        correct = out.predicted == static_cast<long>(seq.label);
        l_c = tape.cross_entropy(probs, seq.label);
        out.l_c = static_cast<double>(tape.scalar_value(l_c));
        have_l_c = true;
    }

    double r = sample.kept() == 0 ? -rcfg.gamma
                                  : reward(correct, sample.kept(), seq.n, rcfg);
    out.reward_value = r;
    out.has_reward = true;

    double advantage = r;
    if (p.cfg.rl_baseline) {
        advantage = r - train_state->reward_baseline;
        ++train_state->reward_count;
        train_state->reward_baseline +=
            (r - train_state->reward_baseline) / static_cast<double>(train_state->reward_count);
    }
    sample.reward = advantage;

    Var term = reinforce_term<T>(tape, pvars, sample);
    out.loss = have_l_c ? rl_total_loss(tape, l_c, term) : term;
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ScenarioMetrics {
    std::string scenario;
    double accuracy_pct = 0.0;
    double usage_pct = 0.0;
    bool has_usage = false;
    std::vector<double> per_class_accuracy_pct;
    double wall_seconds = 0.0;
};

struct MetricsTable {
    std::vector<ScenarioMetrics> rows;

    const ScenarioMetrics* find(const std::string& scenario) const {
        for (const auto& r : rows)
            if (r.scenario == scenario) return &r;
        return nullptr;
    }

    // paper-style single-line table: accuracy per scenario plus headline usage
    std::string human_table() const {
        std::ostringstream out;
        out << std::fixed << std::setprecision(1);
        out << "|";
        for (const auto& r : rows) out << " " << r.scenario << " |";
        out << " usage |\n|";
        for (const auto& r : rows) out << " " << r.accuracy_pct << " |";
        if (!rows.empty() && rows.front().has_usage)
            out << " " << rows.front().usage_pct << " |";
        else
            out << " - |";
        out << "\n";
        return out.str();
    }

    // machine-readable: one record per scenario
    std::string machine_records() const {
        std::ostringstream out;
        out << std::setprecision(17);
        for (const auto& r : rows) {
            out << "scenario=" << r.scenario << " accuracy_pct=" << r.accuracy_pct
                << " usage_pct=";
            if (r.has_usage)
                out << r.usage_pct;
            else
                out << "-";
            out << " wall_s=" << r.wall_seconds << " per_class=";
            for (std::size_t c = 0; c < r.per_class_accuracy_pct.size(); ++c) {
                if (c) out << ",";
                out << r.per_class_accuracy_pct[c];
            }
            out << "\n";
        }
        return out.str();
    }
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

struct EvalPass {
    double accuracy_pct = 0.0;
    double usage_pct = 0.0;
    bool has_usage = false;
    std::vector<double> per_class_pct;
};

template <typename T>
inline EvalPass eval_pass(const Pipeline<T>& p, const std::vector<FeatureSequence>& seqs,
                          const ScenarioSpec& scenario, std::uint64_t s3_seed) {
    EvalPass out;
    std::size_t n_classes = p.classifier.cfg.n_classes;
    std::vector<std::size_t> class_total(n_classes, 0), class_hit(n_classes, 0);
    double usage_sum = 0.0;
    std::size_t usage_count = 0;

    Tape<T> tape;
    for (const auto& seq : seqs) {
        FeatureSequence transformed = resample(seq, scenario, s3_seed);
        tape.reset();
        BoundPipeline<T> bound = bind_pipeline(tape, p);
        ExampleOutcome outcome = forward_example(tape, p, bound, transformed, ForwardMode::eval);
        if (seq.label >= n_classes) throw ShapeError("label out of range for checkpoint");
        ++class_total[seq.label];
        if (outcome.predicted == static_cast<long>(seq.label)) ++class_hit[seq.label];
        if (outcome.has_trace) {
            usage_sum += outcome.trace.usage_pct();
            ++usage_count;
        }
    }

    std::size_t total = 0, hits = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        total += class_total[c];
        hits += class_hit[c];
        out.per_class_pct.push_back(class_total[c] == 0
                                        ? 0.0
                                        : 100.0 * static_cast<double>(class_hit[c]) /
                                              static_cast<double>(class_total[c]));
    }
    out.accuracy_pct = total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
    if (usage_count > 0) {
        out.usage_pct = usage_sum / static_cast<double>(usage_count);
        out.has_usage = true;
    }
    return out;
}

} // namespace detail

inline std::vector<ScenarioSpec> parse_scenarios(const std::string& list, std::size_t s3_repeats) {
    std::vector<ScenarioSpec> out;
    std::istringstream in(list);
    std::string part;
    while (std::getline(in, part, ',')) {
        if (part.empty()) continue;
        ScenarioSpec spec = ScenarioSpec::parse(part);
        spec.s3_repeats = s3_repeats;
        out.push_back(spec);
    }
    if (out.empty()) throw ConfigError("no scenarios given");
    return out;
}

// Deterministic scenario evaluation. S3 runs `s3_repeats` times with seeds
// derived from `seed` (or the spec's explicit seed list) and averages.
template <typename T>
inline MetricsTable evaluate(const Pipeline<T>& p, const std::vector<FeatureSequence>& seqs,
                             const std::vector<ScenarioSpec>& scenarios, std::uint64_t seed) {
    if (seqs.empty()) throw ShapeError("evaluate: empty dataset");
    MetricsTable table;
    for (const auto& scenario : scenarios) {
        auto start = std::chrono::steady_clock::now();
        ScenarioMetrics row;
        row.scenario = scenario.name();

        std::size_t repeats = scenario.kind == ScenarioKind::s3 ? std::max<std::size_t>(1, scenario.s3_repeats) : 1;
        std::vector<detail::EvalPass> passes;
        for (std::size_t r = 0; r < repeats; ++r) {
            std::uint64_t s3_seed = 0;
            if (scenario.kind == ScenarioKind::s3) {
                s3_seed = r < scenario.s3_seeds.size()
                              ? scenario.s3_seeds[r]
                              : mix_seed(seed, "s3." + std::to_string(r));
            }
            passes.push_back(detail::eval_pass(p, seqs, scenario, s3_seed));
        }

        std::size_t n_classes = p.classifier.cfg.n_classes;
        row.per_class_accuracy_pct.assign(n_classes, 0.0);
        for (const auto& pass : passes) {
            row.accuracy_pct += pass.accuracy_pct;
            for (std::size_t c = 0; c < n_classes; ++c)
                row.per_class_accuracy_pct[c] += pass.per_class_pct[c];
            if (pass.has_usage) {
                row.usage_pct += pass.usage_pct;
                row.has_usage = true;
            }
        }
        double denom = static_cast<double>(passes.size());
        row.accuracy_pct /= denom;
        for (auto& v : row.per_class_accuracy_pct) v /= denom;
        if (row.has_usage) row.usage_pct /= denom;

        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochLog {
    std::size_t epoch = 0;
    double l_c = 0.0;
    double l_r = 0.0;
    double mean_reward = 0.0;
    double train_accuracy_pct = 0.0;
    double usage_pct = 0.0;
    double val_accuracy_pct = -1.0; // < 0 when no validation split
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    bool early_stopped = false;
    std::size_t best_epoch = 0;
    double best_val_accuracy_pct = -1.0;
};

template <typename T>
inline void clip_pipeline_recurrent(Pipeline<T>& p) {
    T bound = static_cast<T>(u_clip_bound(p.cfg.u_clip_tmax));
    if (p.has_selector) {
        clip_recurrent(p.selector.l1.base, bound);
        clip_recurrent(p.selector.l2.base, bound);
    }
    if (p.classifier.cfg.cell == ClassifierCell::indrnn) clip_recurrent(p.classifier.ind, bound);
}

// Joint optimization of selector (or policy) and classifier with the
// variant's loss. Sequences are processed one at a time with gradient
// accumulation over cfg.accum examples per Adam step; per-epoch statistics go
// to `log_out` when given. Deterministic for a fixed (config, seed) at thread
// count 1. A non-finite loss aborts with a state dump at `dump_path`.
template <typename T>
inline TrainLog train(Pipeline<T>& p, const Dataset& dataset, std::ostream* log_out = nullptr,
                      const std::string& dump_path = "") {
    const ExperimentConfig& cfg = p.cfg;
    ModelVariant variant = p.variant();

    std::vector<FeatureSequence> pool;
    pool.reserve(dataset.train.size());
    for (const auto& seq : dataset.train) {
        if (cfg.train_stride > 1 || cfg.train_trim > 0)
            pool.push_back(train_subsample(seq, cfg.train_stride, cfg.train_trim));
        else
            pool.push_back(seq);
    }
    if (pool.empty()) throw ShapeError("train: empty training set");

    // held-out validation split for early stopping
    std::vector<FeatureSequence> val;
    if (cfg.patience > 0) {
        std::vector<std::size_t> order(pool.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng split_rng(mix_seed(cfg.seed, "val_split"));
        split_rng.shuffle(order.begin(), order.end());
        std::size_t n_val =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                         cfg.val_fraction * static_cast<double>(pool.size()))));
        if (n_val >= pool.size()) n_val = pool.size() - 1;
        std::vector<FeatureSequence> rest;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (i < n_val)
                val.push_back(pool[order[i]]);
            else
                rest.push_back(pool[order[i]]);
        }
        pool = std::move(rest);
    }

    auto params = p.named_params();
    std::vector<Tensor<T>*> param_ptrs;
    for (auto& [name, t] : params) param_ptrs.push_back(t);
    std::vector<Tensor<T>> grads(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        grads[i].assign_like(*param_ptrs[i]);
        grads[i].zero();
    }

    AdamConfig<T> acfg{static_cast<T>(cfg.lr), static_cast<T>(cfg.beta1),
                       static_cast<T>(cfg.beta2), static_cast<T>(cfg.adam_eps)};
    Adam<T> optimizer(acfg);

    Rng shuffle_rng(mix_seed(cfg.seed, "shuffle"));
    Rng sample_rng(mix_seed(cfg.seed, "rl_sample"));
    TrainState state;
    state.sample_rng = &sample_rng;

    TrainLog log;
    Tape<T> tape;

    std::size_t accum_count = 0;
    auto flush_step = [&]() {
        if (accum_count == 0) return;
        T inv = T(1) / static_cast<T>(accum_count);
        for (auto& g : grads)
            for (auto& v : g.data) v *= inv;
        optimizer.step(param_ptrs, grads);
        clip_pipeline_recurrent(p);
        for (auto& g : grads) g.zero();
        accum_count = 0;
    };

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        state.keep_floor = variant == ModelVariant::rl_plus
                               ? curriculum_keep_floor(epoch, cfg.warmup_epochs, cfg.anneal_epochs)
                               : 0.0;
        shuffle_rng.shuffle(order.begin(), order.end());

        EpochLog el;
        el.epoch = epoch;
        std::size_t hits = 0, usage_n = 0, reward_n = 0;

        for (std::size_t idx : order) {
            const FeatureSequence& seq = pool[idx];
            tape.reset();
            BoundPipeline<T> bound = bind_pipeline(tape, p);
            ExampleOutcome outcome;
            try {
                outcome = forward_example(tape, p, bound, seq, ForwardMode::train, &state);
                double loss_value = static_cast<double>(tape.scalar_value(outcome.loss));
                if (!std::isfinite(loss_value)) throw NumericError("non-finite training loss");
                tape.backward(outcome.loss);
            } catch (const NumericError& e) {
                if (!dump_path.empty()) {
                    Checkpoint dump;
                    dump.config_text = cfg.to_text();
                    for (auto& [name, t] : params)
                        dump.tensors.emplace_back(name, t->template cast<float>());
                    save_checkpoint(dump_path, dump);
                }
                throw NumericError(std::string("training diverged at epoch ") +
                                   std::to_string(epoch) + " on " + seq.id + ": " + e.what() +
                                   (dump_path.empty() ? "" : " (state dumped to " + dump_path + ")"));
            }

            for (std::size_t i = 0; i < grads.size(); ++i) {
                const Tensor<T>& adj = tape.adjoint(bound.leaves[i]);
                for (std::size_t k = 0; k < adj.size(); ++k) grads[i].data[k] += adj.data[k];
            }
            ++accum_count;

            el.l_c += outcome.l_c;
            el.l_r += outcome.l_r;
            if (outcome.has_reward) {
                el.mean_reward += outcome.reward_value;
                ++reward_n;
            }
            if (outcome.predicted == static_cast<long>(seq.label)) ++hits;
            if (outcome.has_trace) {
                el.usage_pct += outcome.trace.usage_pct();
                ++usage_n;
            }

            if (accum_count >= cfg.accum) flush_step();
        }
        flush_step();

        double n = static_cast<double>(pool.size());
        el.l_c /= n;
        el.l_r /= n;
        if (reward_n > 0) el.mean_reward /= static_cast<double>(reward_n);
        el.train_accuracy_pct = 100.0 * static_cast<double>(hits) / n;
        if (usage_n > 0) el.usage_pct /= static_cast<double>(usage_n);

        if (!val.empty()) {
            detail::EvalPass pass = detail::eval_pass(p, val, ScenarioSpec{}, 0);
            el.val_accuracy_pct = pass.accuracy_pct;
            if (el.val_accuracy_pct > log.best_val_accuracy_pct) {
                log.best_val_accuracy_pct = el.val_accuracy_pct;
                log.best_epoch = epoch;
            }
        }

        if (log_out) {
            std::ostringstream line;
            line << "epoch=" << epoch << " l_c=" << el.l_c;
            if (variant == ModelVariant::rl_plus)
                line << " mean_reward=" << el.mean_reward;
            else if (variant != ModelVariant::baseline)
                line << " l_r=" << el.l_r;
            line << " train_acc=" << el.train_accuracy_pct;
            if (usage_n > 0) line << " usage=" << el.usage_pct;
            if (el.val_accuracy_pct >= 0.0) line << " val_acc=" << el.val_accuracy_pct;
            *log_out << line.str() << "\n";
        }
        log.epochs.push_back(el);

        if (!val.empty() && cfg.patience > 0 && epoch >= log.best_epoch + cfg.patience) {
            log.early_stopped = true;
            break;
        }
    }
    return log;
}

// ---------------------------------------------------------------------------
// Checkpoint glue
// ---------------------------------------------------------------------------

template <typename T>
inline Checkpoint make_checkpoint(Pipeline<T>& p) {
    Checkpoint ckpt;
    ckpt.config_text = p.cfg.to_text();
    for (auto& [name, t] : p.named_params())
        ckpt.tensors.emplace_back(name, t->template cast<float>());
    return ckpt;
}

inline Pipeline<float> pipeline_from_checkpoint(const Checkpoint& ckpt) {
    ExperimentConfig cfg;
    cfg.load_text(ckpt.config_text);
    Pipeline<float> p = build_pipeline<float>(cfg);
    for (auto& [name, t] : p.named_params()) {
        const Tensor<float>* stored = ckpt.find(name);
        if (!stored) throw FormatError("checkpoint is missing tensor " + name);
        if (!stored->same_shape(*t))
            throw ShapeError("checkpoint tensor " + name + " has shape " + stored->shape_str() +
                             ", expected " + t->shape_str());
        *t = *stored;
    }
    return p;
}

// ---------------------------------------------------------------------------
// m_R sweep and trace export
// ---------------------------------------------------------------------------

struct SweepRow {
    double m_r = 0.0;
    MetricsTable metrics;
};

// One full train+evaluate per m_R value, fixed seed.
inline std::vector<SweepRow> sweep_mr(const ExperimentConfig& base, const std::vector<double>& values,
                                      const Dataset& dataset, std::ostream* log_out = nullptr) {
    if (values.empty()) throw ConfigError("sweep: no m_r values");
    for (double v : values)
        if (!(v > 0.0 && v < 1.0)) throw ConfigError("sweep: m_r values must be in (0,1)");

    std::vector<SweepRow> rows;
    for (double v : values) {
        ExperimentConfig cfg = base;
        cfg.m_r = v;
        Pipeline<float> p = build_pipeline<float>(cfg);
        if (log_out) *log_out << "# m_r=" << v << "\n";
        train(p, dataset, log_out);
        SweepRow row;
        row.m_r = v;
        row.metrics =
            evaluate(p, dataset.test, parse_scenarios(cfg.scenarios, cfg.s3_repeats), cfg.seed);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string sweep_table(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "m_r";
    if (!rows.empty())
        for (const auto& r : rows.front().metrics.rows) out << "\t" << r.scenario;
    out << "\tusage\n";
    for (const auto& row : rows) {
        out << row.m_r;
        for (const auto& r : row.metrics.rows) out << "\t" << r.accuracy_pct;
        const auto* orig = row.metrics.rows.empty() ? nullptr : &row.metrics.rows.front();
        if (orig && orig->has_usage)
            out << "\t" << orig->usage_pct;
        else
            out << "\t-";
        out << "\n";
    }
    return out.str();
}

// One record per sequence: id, N, K, usage, p-list, y-list.
template <typename T>
inline void export_traces(const Pipeline<T>& p, const std::vector<FeatureSequence>& seqs,
                          std::ostream& out) {
    if (!p.has_selector) throw ConfigError("trace export needs a selection variant");
    Tape<T> tape;
    out << std::setprecision(6) << std::fixed;
    for (const auto& seq : seqs) {
        tape.reset();
        BoundPipeline<T> bound = bind_pipeline(tape, p);
        ExampleOutcome outcome = forward_example(tape, p, bound, seq, ForwardMode::eval);
        if (!outcome.has_trace) throw ConfigError("variant produced no selection trace");
        const SelectionTrace& tr = outcome.trace;
        out << seq.id << " " << tr.total() << " " << tr.kept << " " << tr.usage_pct() << " ";
        for (std::size_t i = 0; i < tr.p.size(); ++i) out << (i ? "," : "") << tr.p[i];
        out << " ";
        for (std::size_t i = 0; i < tr.y.size(); ++i)
            out << (i ? "," : "") << static_cast<int>(tr.y[i]);
        out << "\n";
    }
}

} // namespace framesel
