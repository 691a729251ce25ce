#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "framesel/classifier.hpp"
#include "framesel/gradcheck.hpp"
#include "framesel/selector.hpp"

namespace framesel {

// 64-bit gradient verification battery: every recurrent cell, the combined
// selection loss path (classification + lambda * reducing regularization
// through the straight-through gate, decisions frozen), and the classifier
// head, each on small random instances across many seeds.

struct VerifyItem {
    std::string name;
    GradCheckReport report;
    bool pass = false;
};

struct VerifyResult {
    std::vector<VerifyItem> items;
    double tolerance = 1e-4;
    bool all_pass = true;
};

namespace detail {

inline std::vector<Tensor<double>> random_frames64(std::size_t n, std::size_t d, Rng& rng) {
    std::vector<Tensor<double>> out;
    for (std::size_t t = 0; t < n; ++t) {
        Tensor<double> x = Tensor<double>::vec(d);
        for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
        out.push_back(x);
    }
    return out;
}

// keep relu pre-activations away from their kinks so central differences stay
// valid at every perturbed point
inline void spread_bias(Tensor<double>& b, Rng& rng) {
    for (auto& v : b.data) v = rng.uniform(-0.4, 0.4);
}

} // namespace detail

template <typename CheckFn>
inline void verify_run(VerifyResult& result, const std::string& name, double tol, CheckFn&& fn) {
    VerifyItem item;
    item.name = name;
    item.report = fn();
    item.pass = item.report.pass(tol);
    if (!item.pass) result.all_pass = false;
    result.items.push_back(std::move(item));
}

inline VerifyResult run_gradcheck_suite(std::ostream* out = nullptr, std::size_t n_seeds = 20,
                                        double tolerance = 1e-4) {
    VerifyResult result;
    result.tolerance = tolerance;

    for (std::size_t s = 0; s < n_seeds; ++s) {
        Rng seed_rng(mix_seed(0xF5E1ull, "verify." + std::to_string(s)));
        std::size_t hidden = 3 + seed_rng.below(6); // <= 8
        std::size_t input = 2 + seed_rng.below(4);
        std::size_t length = 3 + seed_rng.below(4); // <= 6
        std::string tag = "seed" + std::to_string(s);

        // --- plain IndRNN unroll ---
        {
            Rng rng(seed_rng.next_u64());
            auto cell = init_indrnn<double>(hidden, input, rng);
            detail::spread_bias(cell.b, rng);
            auto xs = detail::random_frames64(length, input, rng);
            std::vector<std::pair<std::string, Tensor<double>*>> params{
                {"w", &cell.w}, {"u", &cell.u}, {"b", &cell.b}};
            auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
                IndRnnVars v{leaves[0], leaves[1], leaves[2], cell.act};
                std::vector<Var> xv;
                for (const auto& x : xs) xv.push_back(tape.leaf(x));
                auto hs = unroll_indrnn(tape, v, xv, tape.leaf_vec(hidden, 0.0));
                std::vector<Var> means;
                for (Var h : hs) means.push_back(tape.mean(h));
                return tape.mean(tape.stack(means));
            };
            verify_run(result, "indrnn/" + tag, tolerance, [&] { return grad_check(build, params); });
        }

        // --- GRU unroll ---
        {
            Rng rng(seed_rng.next_u64());
            auto cell = init_gru<double>(hidden, input, rng);
            detail::spread_bias(cell.bz, rng);
            detail::spread_bias(cell.br, rng);
            detail::spread_bias(cell.bh, rng);
            auto xs = detail::random_frames64(length, input, rng);
            std::vector<std::pair<std::string, Tensor<double>*>> params{
                {"wz", &cell.wz}, {"uz", &cell.uz}, {"bz", &cell.bz},
                {"wr", &cell.wr}, {"ur", &cell.ur}, {"br", &cell.br},
                {"wh", &cell.wh}, {"uh", &cell.uh}, {"bh", &cell.bh}};
            auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
                GruVars v{leaves[0], leaves[1], leaves[2], leaves[3], leaves[4],
                          leaves[5], leaves[6], leaves[7], leaves[8]};
                std::vector<Var> xv;
                for (const auto& x : xs) xv.push_back(tape.leaf(x));
                auto hs = unroll_gru(tape, v, xv, tape.leaf_vec(hidden, 0.0));
                return tape.mean(hs.back());
            };
            verify_run(result, "gru/" + tag, tolerance, [&] { return grad_check(build, params); });
        }

        // --- Skip IndRNN unroll, frozen-decision convention ---
        {
            Rng rng(seed_rng.next_u64());
            auto cell = init_skip_indrnn<double>(hidden, input, rng);
            detail::spread_bias(cell.base.b, rng);
            for (auto& v : cell.b_p.data) v = rng.uniform(-1.5, 1.5);
            auto xs = detail::random_frames64(length, input, rng);
            std::vector<std::pair<std::string, Tensor<double>*>> params{{"w", &cell.base.w},
                                                                        {"u", &cell.base.u},
                                                                        {"b", &cell.base.b},
                                                                        {"w_p", &cell.w_p},
                                                                        {"b_p", &cell.b_p}};
            SkipDecisionLog<double> log;
            auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
                log.rewind();
                SkipIndRnnVars v{IndRnnVars{leaves[0], leaves[1], leaves[2], cell.base.act},
                                 leaves[3], leaves[4]};
                std::vector<Var> xv;
                for (const auto& x : xs) xv.push_back(tape.leaf(x));
                auto o = unroll_skip_indrnn(tape, v, xv, skip_initial_state(tape, hidden), &log);
                log.replay = true;
                std::vector<Var> means;
                for (Var h : o.h) means.push_back(tape.mean(h));
                return tape.mean(tape.stack(means));
            };
            verify_run(result, "skip_indrnn/" + tag, tolerance,
                       [&] { return grad_check(build, params); });
        }

        // --- full selection loss, both selector variants ---
        for (auto variant : {SelectorVariant::rnn_plus, SelectorVariant::srnn_plus}) {
            Rng rng(seed_rng.next_u64());
            SelectorConfig scfg;
            scfg.variant = variant;
            scfg.hidden = hidden;
            scfg.fc1 = 3;
            auto sel = init_selector<double>(scfg, input, rng);
            detail::spread_bias(sel.l1.base.b, rng);
            detail::spread_bias(sel.l2.base.b, rng);
            detail::spread_bias(sel.fc1_b, rng);
            detail::spread_bias(sel.fc2_b, rng);
            for (auto& v : sel.l1.b_p.data) v = rng.uniform(-1.5, 1.5);
            for (auto& v : sel.l2.b_p.data) v = rng.uniform(-1.5, 1.5);

            ClassifierConfig ccfg;
            ccfg.hidden = hidden;
            ccfg.fc_hidden = 4;
            ccfg.n_classes = 3;
            auto cls = init_classifier<double>(ccfg, input, rng);
            detail::spread_bias(cls.fc1_b, rng);

            auto xs = detail::random_frames64(length, input, rng);
            const std::size_t label = seed_rng.below(3);

            auto params = sel.params("sel/");
            auto cls_params = cls.params("cls/");
            params.insert(params.end(), cls_params.begin(), cls_params.end());

            SelectorLogs<double> logs;
            SelectionTrace trace;
            bool traced = false;

            auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
                logs.rewind();
                std::size_t li = 0;
                SelectorVars<double> sv;
                sv.variant = variant;
                auto take_layer = [&](SkipIndRnnVars& out) {
                    out.base.w = leaves[li++];
                    out.base.u = leaves[li++];
                    out.base.b = leaves[li++];
                    out.base.act = Activation::relu;
                    if (variant == SelectorVariant::srnn_plus) {
                        out.w_p = leaves[li++];
                        out.b_p = leaves[li++];
                    }
                };
                take_layer(sv.l1);
                take_layer(sv.l2);
                sv.fc1_w = leaves[li++];
                sv.fc1_b = leaves[li++];
                sv.fc2_w = leaves[li++];
                sv.fc2_b = leaves[li++];

                ClassifierVars<double> cv;
                cv.cell = ClassifierCell::gru;
                cv.hidden = hidden;
                cv.gru = GruVars{leaves[li], leaves[li + 1], leaves[li + 2], leaves[li + 3],
                                 leaves[li + 4], leaves[li + 5], leaves[li + 6], leaves[li + 7],
                                 leaves[li + 8]};
                li += 9;
                cv.fc1_w = leaves[li++];
                cv.fc1_b = leaves[li++];
                cv.fc2_w = leaves[li++];
                cv.fc2_b = leaves[li++];

                std::vector<Var> xv;
                for (const auto& x : xs) xv.push_back(tape.leaf(x));
                auto p = score_frames(tape, sv, xv, hidden,
                                      variant == SelectorVariant::srnn_plus ? &logs : nullptr);
                if (!traced) {
                    trace = make_trace(tape, p);
                    traced = true;
                }
                logs.freeze();
                auto kept = gated_forward<double>(tape, trace, p, xv);
                Var probs = classify(tape, cv, kept);
                Var l_c = tape.cross_entropy(probs, label);
                Var l_r = reducing_loss<double>(tape, p, 0.25);
                return rnn_total_loss(tape, l_c, l_r, 4.0);
            };
            std::string name =
                variant == SelectorVariant::srnn_plus ? "srnn_plus_loss/" : "rnn_plus_loss/";
            verify_run(result, name + tag, tolerance, [&] { return grad_check(build, params); });
        }

        // --- classifier head alone ---
        {
            Rng rng(seed_rng.next_u64());
            ClassifierConfig ccfg;
            ccfg.hidden = hidden;
            ccfg.fc_hidden = 4;
            ccfg.n_classes = 4;
            auto cls = init_classifier<double>(ccfg, input, rng);
            detail::spread_bias(cls.fc1_b, rng);
            auto xs = detail::random_frames64(length, input, rng);
            const std::size_t label = seed_rng.below(4);
            auto params = cls.params("");
            auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
                ClassifierVars<double> cv;
                cv.cell = ClassifierCell::gru;
                cv.hidden = hidden;
                cv.gru = GruVars{leaves[0], leaves[1], leaves[2], leaves[3], leaves[4],
                                 leaves[5], leaves[6], leaves[7], leaves[8]};
                cv.fc1_w = leaves[9];
                cv.fc1_b = leaves[10];
                cv.fc2_w = leaves[11];
                cv.fc2_b = leaves[12];
                std::vector<Var> xv;
                for (const auto& x : xs) xv.push_back(tape.leaf(x));
                return tape.cross_entropy(classify(tape, cv, xv), label);
            };
            verify_run(result, "classifier/" + tag, tolerance,
                       [&] { return grad_check(build, params); });
        }
    }

    if (out) {
        for (const auto& item : result.items)
            *out << (item.pass ? "ok   " : "FAIL ") << item.name
                 << " max_rel_err=" << item.report.max_rel_err << " (" << item.report.checked
                 << " params)\n";
        *out << (result.all_pass ? "gradcheck suite: all passed" : "gradcheck suite: FAILURES")
             << " (tolerance " << result.tolerance << ")\n";
    }
    return result;
}

} // namespace framesel
