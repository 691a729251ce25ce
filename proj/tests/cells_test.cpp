#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "framesel/cells.hpp"
#include "framesel/gradcheck.hpp"
#include "framesel/rng.hpp"

using namespace framesel;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace

TEST_CASE("indrnn step arithmetic") {
    Tape<double> tape;
    // W x = [1, -2] via a 2x1 matrix and x = [1]
    IndRnnParams<double> p;
    p.w = Tensor<double>::mat_of(2, 1, {1.0, -2.0});
    p.u = Tensor<double>::of({0.5, 2.0});
    p.b = Tensor<double>::vec(2, 0.0);
    p.act = Activation::relu;

    auto v = bind(tape, p);
    Var h = indrnn_step(tape, v, tape.leaf(Tensor<double>::of({1.0})),
                        tape.leaf(Tensor<double>::of({2.0, 1.0})));
    CHECK(tape.value(h).data[0] == doctest::Approx(2.0));
    CHECK(tape.value(h).data[1] == doctest::Approx(0.0));
}

TEST_CASE("indrnn identity recurrence with unit u") {
    Tape<double> tape;
    IndRnnParams<double> p;
    p.w = Tensor<double>::mat(3, 2, 0.0);
    p.u = Tensor<double>::vec(3, 1.0);
    p.b = Tensor<double>::vec(3, 0.0);
    auto v = bind(tape, p);

    Tensor<double> h_prev = Tensor<double>::of({0.7, 0.0, 3.2});
    Var h = indrnn_step(tape, v, tape.leaf(Tensor<double>::of({9.0, -4.0})), tape.leaf(h_prev));
    for (int i = 0; i < 3; ++i) CHECK(tape.value(h).data[i] == h_prev.data[i]);
}

TEST_CASE("indrnn dimension mismatch is rejected") {
    Tape<double> tape;
    Rng rng(1);
    auto p = init_indrnn<double>(4, 3, rng);
    auto v = bind(tape, p);
    CHECK_THROWS_AS(indrnn_step(tape, v, tape.leaf_vec(5, 0.1), tape.leaf_vec(4, 0.0)), ShapeError);
}

TEST_CASE("indrnn 3-step unroll gradient wrt u matches finite differences") {
    Rng rng(17);
    auto p = init_indrnn<double>(4, 3, rng);
    std::vector<Tensor<double>> xs;
    for (int t = 0; t < 3; ++t) {
        Tensor<double> x = Tensor<double>::vec(3);
        for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
        xs.push_back(x);
    }

    std::vector<std::pair<std::string, Tensor<double>*>> params{{"u", &p.u}};
    auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
        IndRnnVars v{tape.leaf(p.w), leaves[0], tape.leaf(p.b), p.act};
        std::vector<Var> xv;
        for (const auto& x : xs) xv.push_back(tape.leaf(x));
        auto hs = unroll_indrnn(tape, v, xv, tape.leaf_vec(4, 0.0));
        std::vector<Var> means;
        for (Var h : hs) means.push_back(tape.mean(h));
        return tape.mean(tape.stack(means));
    };
    auto rep = grad_check(build, params, 1e-5);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("skip step: all-copy leaves h bitwise unchanged") {
    Tape<double> tape;
    Rng rng(3);
    auto p = init_skip_indrnn<double>(4, 2, rng);
    auto v = bind(tape, p);

    Tensor<double> h_prev = Tensor<double>::of({0.1, -2.5, 0.0, 7.25});
    SkipStateVars state{tape.leaf(h_prev), tape.leaf_vec(4, 0.3)}; // u~ < 0.5 everywhere
    auto r = skip_indrnn_step(tape, v, tape.leaf(Tensor<double>::of({1.0, -1.0})), state);

    for (int i = 0; i < 4; ++i) {
        CHECK(tape.value(r.update_gate).data[i] == 0.0);
        CHECK(tape.value(r.h).data[i] == h_prev.data[i]); // exact, not approximate
    }
}

TEST_CASE("skip accumulator arithmetic on copy and update branches") {
    // copy branch: u~=0.3, du~=0.9 -> u~' = 0.3 + min(0.9, 0.7) = 1.0 exactly
    {
        Tape<double> tape;
        SkipIndRnnParams<double> p;
        Rng rng(4);
        p.base = init_indrnn<double>(1, 1, rng);
        p.w_p = Tensor<double>::vec(1, 0.0);
        p.b_p = Tensor<double>::vec(1, logit(0.9));
        auto v = bind(tape, p);
        SkipStateVars state{tape.leaf_vec(1, 0.5), tape.leaf_vec(1, 0.3)};
        auto r = skip_indrnn_step(tape, v, tape.leaf_vec(1, 0.0), state);
        CHECK(tape.value(r.update_gate).data[0] == 0.0);
        CHECK(tape.value(r.u_tilde_next).data[0] == 1.0);
    }
    // update branch: u_t=1, du~=0.2 -> u~' = 0.2
    {
        Tape<double> tape;
        SkipIndRnnParams<double> p;
        Rng rng(5);
        p.base = init_indrnn<double>(1, 1, rng);
        p.w_p = Tensor<double>::vec(1, 0.0);
        p.b_p = Tensor<double>::vec(1, logit(0.2));
        auto v = bind(tape, p);
        SkipStateVars state{tape.leaf_vec(1, 0.5), tape.leaf_vec(1, 1.0)};
        auto r = skip_indrnn_step(tape, v, tape.leaf_vec(1, 0.0), state);
        CHECK(tape.value(r.update_gate).data[0] == 1.0);
        CHECK(tape.value(r.u_tilde_next).data[0] == doctest::Approx(0.2).epsilon(1e-12));
    }
}

TEST_CASE("skip accumulator stays in [0,1] and accumulates monotonically while copying") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = init_skip_indrnn<double>(6, 4, rng);
        // spread the gate biases so both branches occur
        for (auto& b : p.b_p.data) b = rng.uniform(-3.0, 3.0);

        Tape<double> tape;
        auto v = bind(tape, p);
        SkipStateVars state = skip_initial_state(tape, 6);
        Tensor<double> prev_ut = tape.value(state.u_tilde);
        for (int t = 0; t < 40; ++t) {
            Tensor<double> x = Tensor<double>::vec(4);
            for (auto& d : x.data) d = rng.uniform(-1.0, 1.0);
            auto r = skip_indrnn_step(tape, v, tape.leaf(x), state);
            const auto& ut = tape.value(r.u_tilde_next);
            const auto& gate = tape.value(r.update_gate);
            for (int j = 0; j < 6; ++j) {
                CHECK(ut.data[j] >= 0.0);
                CHECK(ut.data[j] <= 1.0);
                if (gate.data[j] == 0.0) CHECK(ut.data[j] >= prev_ut.data[j]);
            }
            prev_ut = ut;
            state = SkipStateVars{r.h, r.u_tilde_next};
        }
    }
}

TEST_CASE("skip neuron with lower-bounded delta updates within ceil(1/delta) steps") {
    const double delta = 0.15;
    SkipIndRnnParams<double> p;
    Rng rng(9);
    p.base = init_indrnn<double>(2, 2, rng);
    p.w_p = Tensor<double>::vec(2, 0.0);
    p.b_p = Tensor<double>::vec(2, logit(delta)); // constant du~ = delta

    Tape<double> tape;
    auto v = bind(tape, p);
    SkipStateVars state = skip_initial_state(tape, 2);
    Tensor<double> x = Tensor<double>::of({0.4, -0.2});

    // first step updates by construction (u~0 = 1); afterwards count the gap
    auto r = skip_indrnn_step(tape, v, tape.leaf(x), state);
    state = SkipStateVars{r.h, r.u_tilde_next};
    int bound = static_cast<int>(std::ceil(1.0 / delta));
    int since_update = 0;
    for (int t = 0; t < 4 * bound; ++t) {
        r = skip_indrnn_step(tape, v, tape.leaf(x), state);
        state = SkipStateVars{r.h, r.u_tilde_next};
        if (tape.value(r.update_gate).data[0] == 1.0) {
            since_update = 0;
        } else {
            ++since_update;
            CHECK(since_update <= bound);
        }
    }
}

TEST_CASE("skip neuron independence under zeroed input row and recurrent weight") {
    Rng rng(33);
    auto p = init_skip_indrnn<double>(5, 3, rng);
    auto p_zeroed = p;
    const std::size_t j = 2;
    for (std::size_t c = 0; c < 3; ++c) p_zeroed.base.w.at(j, c) = 0.0;
    p_zeroed.base.u.data[j] = 0.0;

    std::vector<Tensor<double>> xs;
    for (int t = 0; t < 6; ++t) {
        Tensor<double> x = Tensor<double>::vec(3);
        for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
        xs.push_back(x);
    }

    auto run = [&](const SkipIndRnnParams<double>& params) {
        Tape<double> tape;
        auto v = bind(tape, params);
        SkipStateVars state = skip_initial_state(tape, 5);
        std::vector<Var> xv;
        for (const auto& x : xs) xv.push_back(tape.leaf(x));
        auto out = unroll_skip_indrnn(tape, v, xv, state);
        std::vector<Tensor<double>> hs;
        for (Var h : out.h) hs.push_back(tape.value(h));
        return hs;
    };

    auto ha = run(p);
    auto hb = run(p_zeroed);
    for (std::size_t t = 0; t < ha.size(); ++t)
        for (std::size_t k = 0; k < 5; ++k)
            if (k != j) CHECK(ha[t].data[k] == hb[t].data[k]);
}

TEST_CASE("gru step with zero weights halves the previous state") {
    Tape<double> tape;
    Rng rng(2);
    auto p = init_gru<double>(3, 2, rng);
    for (auto* t : {&p.wz, &p.uz, &p.wr, &p.ur, &p.wh, &p.uh}) t->zero();
    for (auto* t : {&p.bz, &p.br, &p.bh}) t->zero();

    auto v = bind(tape, p);
    Tensor<double> h_prev = Tensor<double>::of({0.8, -0.4, 0.2});
    Var h = gru_step(tape, v, tape.leaf(Tensor<double>::of({5.0, -3.0})), tape.leaf(h_prev));
    for (int i = 0; i < 3; ++i)
        CHECK(tape.value(h).data[i] == doctest::Approx(0.5 * h_prev.data[i]).epsilon(1e-12));
}

TEST_CASE("gru with zero candidate weights and zero state stays at zero") {
    Tape<double> tape;
    Rng rng(6);
    auto p = init_gru<double>(3, 2, rng);
    p.wh.zero();
    p.uh.zero();
    p.bh.zero();
    auto v = bind(tape, p);
    Var h = gru_step(tape, v, tape.leaf(Tensor<double>::of({1.3, -0.7})), tape.leaf_vec(3, 0.0));
    for (int i = 0; i < 3; ++i) CHECK(tape.value(h).data[i] == 0.0);
}

TEST_CASE("gru gates stay in range; state stays in (-1,1) when previous state is") {
    Rng rng(8);
    auto p = init_gru<double>(4, 3, rng);
    Tape<double> tape;
    auto v = bind(tape, p);
    Var h = tape.leaf_vec(4, 0.0);
    for (int t = 0; t < 30; ++t) {
        Tensor<double> x = Tensor<double>::vec(3);
        for (auto& d : x.data) d = rng.uniform(-2.0, 2.0);
        h = gru_step(tape, v, tape.leaf(x), h);
        for (int i = 0; i < 4; ++i) {
            CHECK(tape.value(h).data[i] > -1.0);
            CHECK(tape.value(h).data[i] < 1.0);
        }
    }
}

TEST_CASE("gru 4-step unroll gradient matches finite differences") {
    Rng rng(77);
    auto p = init_gru<double>(3, 2, rng);
    std::vector<Tensor<double>> xs;
    for (int t = 0; t < 4; ++t) {
        Tensor<double> x = Tensor<double>::vec(2);
        for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
        xs.push_back(x);
    }

    std::vector<std::pair<std::string, Tensor<double>*>> params{
        {"wz", &p.wz}, {"uz", &p.uz}, {"bz", &p.bz}, {"wr", &p.wr}, {"ur", &p.ur},
        {"br", &p.br}, {"wh", &p.wh}, {"uh", &p.uh}, {"bh", &p.bh}};
    auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
        GruVars v{leaves[0], leaves[1], leaves[2], leaves[3], leaves[4],
                  leaves[5], leaves[6], leaves[7], leaves[8]};
        std::vector<Var> xv;
        for (const auto& x : xs) xv.push_back(tape.leaf(x));
        auto hs = unroll_gru(tape, v, xv, tape.leaf_vec(3, 0.0));
        return tape.mean(hs.back());
    };
    auto rep = grad_check(build, params, 1e-5);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("skip unroll gradient matches finite differences under frozen decisions") {
    Rng rng(55);
    auto p = init_skip_indrnn<double>(4, 3, rng);
    for (auto& b : p.b_p.data) b = rng.uniform(-1.5, 1.5);
    std::vector<Tensor<double>> xs;
    for (int t = 0; t < 5; ++t) {
        Tensor<double> x = Tensor<double>::vec(3);
        for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
        xs.push_back(x);
    }

    std::vector<std::pair<std::string, Tensor<double>*>> params{
        {"w", &p.base.w}, {"u", &p.base.u}, {"b", &p.base.b}, {"w_p", &p.w_p}, {"b_p", &p.b_p}};
    SkipDecisionLog<double> log;
    auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
        log.rewind();
        SkipIndRnnVars v{IndRnnVars{leaves[0], leaves[1], leaves[2], p.base.act}, leaves[3],
                         leaves[4]};
        std::vector<Var> xv;
        for (const auto& x : xs) xv.push_back(tape.leaf(x));
        auto out = unroll_skip_indrnn(tape, v, xv, skip_initial_state(tape, 4), &log);
        log.replay = true;
        std::vector<Var> means;
        for (Var h : out.h) means.push_back(tape.mean(h));
        return tape.mean(tape.stack(means));
    };
    auto rep = grad_check(build, params, 1e-5);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("recurrent weight clipping") {
    CHECK(u_clip_bound(1024) == doctest::Approx(std::pow(2.0, 1.0 / 1024.0)));
    Rng rng(10);
    auto p = init_indrnn<double>(4, 2, rng);
    p.u.data[0] = 3.0;
    p.u.data[1] = -2.5;
    double bound = u_clip_bound(1024);
    clip_recurrent(p, bound);
    CHECK(p.u.data[0] == doctest::Approx(bound));
    CHECK(p.u.data[1] == doctest::Approx(-bound));
    for (auto v : p.u.data) CHECK(std::abs(v) <= bound);
}
