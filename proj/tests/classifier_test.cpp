#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "framesel/classifier.hpp"
#include "framesel/gradcheck.hpp"

using namespace framesel;

namespace {

ClassifierConfig tiny_config(std::size_t n_classes = 3) {
    ClassifierConfig cfg;
    cfg.hidden = 5;
    cfg.fc_hidden = 4;
    cfg.n_classes = n_classes;
    return cfg;
}

std::vector<Tensor<double>> random_frames(std::size_t n, std::size_t d, Rng& rng) {
    std::vector<Tensor<double>> out;
    for (std::size_t t = 0; t < n; ++t) {
        Tensor<double> x = Tensor<double>::vec(d);
        for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
        out.push_back(x);
    }
    return out;
}

} // namespace

TEST_CASE("config validation") {
    ClassifierConfig cfg = tiny_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.n_classes = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("all-zero weights give the uniform distribution") {
    Rng rng(3);
    auto model = init_classifier<double>(tiny_config(4), 3, rng);
    for (auto& [name, t] : model.params("")) t->zero();

    Tape<double> tape;
    auto vars = bind(tape, model);
    Rng drng(5);
    auto frames = random_frames(6, 3, drng);
    std::vector<Var> fv;
    for (const auto& f : frames) fv.push_back(tape.leaf(f));
    auto probs = tape.value(classify(tape, vars, fv));
    for (int c = 0; c < 4; ++c) CHECK(probs.data[c] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("single-frame input equals one cell step plus the head") {
    Rng rng(9);
    auto model = init_classifier<double>(tiny_config(3), 2, rng);
    Tensor<double> x = Tensor<double>::of({0.3, -0.8});

    Tape<double> tape;
    auto vars = bind(tape, model);
    std::vector<Var> fv = {tape.leaf(x)};
    auto via_classify = tape.value(classify(tape, vars, fv));

    Var h = gru_step(tape, vars.gru, tape.leaf(x), tape.leaf_vec(5, 0.0));
    Var a = tape.relu(tape.add(tape.matvec(vars.fc1_w, h), vars.fc1_b));
    Var probs = tape.softmax(tape.add(tape.matvec(vars.fc2_w, a), vars.fc2_b));
    auto direct = tape.value(probs);
    for (int c = 0; c < 3; ++c) CHECK(via_classify.data[c] == direct.data[c]);
}

TEST_CASE("output is a distribution; prediction ignores logit shifts") {
    Rng rng(21);
    auto model = init_classifier<double>(tiny_config(5), 4, rng);
    Rng drng(22);
    for (int trial = 0; trial < 10; ++trial) {
        auto frames = random_frames(1 + drng.below(8), 4, drng);
        Tape<double> tape;
        auto vars = bind(tape, model);
        std::vector<Var> fv;
        for (const auto& f : frames) fv.push_back(tape.leaf(f));
        auto probs = tape.value(classify(tape, vars, fv));
        double sum = 0.0;
        for (auto v : probs.data) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-6);

        // shifting every final-layer bias by a constant leaves the argmax alone
        std::size_t before = predict(probs);
        auto shifted = model;
        for (auto& b : shifted.fc2_b.data) b += 3.7;
        Tape<double> tape2;
        auto vars2 = bind(tape2, shifted);
        std::vector<Var> fv2;
        for (const auto& f : frames) fv2.push_back(tape2.leaf(f));
        CHECK(predict(tape2.value(classify(tape2, vars2, fv2))) == before);
    }
}

TEST_CASE("predict picks the argmax, first index on ties") {
    CHECK(predict(std::vector<double>{0.1, 0.7, 0.2}) == 1);
    CHECK(predict(std::vector<double>{0.5, 0.5}) == 0);
    CHECK_THROWS_AS(predict(std::vector<double>{}), ShapeError);
}

TEST_CASE("empty input is rejected") {
    Rng rng(2);
    auto model = init_classifier<double>(tiny_config(), 3, rng);
    Tape<double> tape;
    auto vars = bind(tape, model);
    std::vector<Var> empty;
    CHECK_THROWS_AS(classify(tape, vars, empty), ShapeError);
}

TEST_CASE("indrnn variant runs and differs from gru") {
    ClassifierConfig cfg = tiny_config(3);
    cfg.cell = ClassifierCell::indrnn;
    Rng rng(12);
    auto model = init_classifier<double>(cfg, 3, rng);
    CHECK(model.params("").size() == 7);

    Tape<double> tape;
    auto vars = bind(tape, model);
    Rng drng(13);
    auto frames = random_frames(4, 3, drng);
    std::vector<Var> fv;
    for (const auto& f : frames) fv.push_back(tape.leaf(f));
    auto probs = tape.value(classify(tape, vars, fv));
    double sum = 0.0;
    for (auto v : probs.data) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("classifier head gradient matches finite differences") {
    Rng rng(31);
    auto model = init_classifier<double>(tiny_config(3), 2, rng);
    Rng drng(32);
    auto frames = random_frames(4, 2, drng);

    auto named = model.params("");
    std::vector<std::pair<std::string, Tensor<double>*>> params(named.begin(), named.end());
    auto build = [&](Tape<double>& tape, const std::vector<Var>& leaves) {
        ClassifierVars<double> vars;
        vars.cell = ClassifierCell::gru;
        vars.hidden = model.cfg.hidden;
        vars.gru = GruVars{leaves[0], leaves[1], leaves[2], leaves[3], leaves[4],
                           leaves[5], leaves[6], leaves[7], leaves[8]};
        vars.fc1_w = leaves[9];
        vars.fc1_b = leaves[10];
        vars.fc2_w = leaves[11];
        vars.fc2_b = leaves[12];
        std::vector<Var> fv;
        for (const auto& f : frames) fv.push_back(tape.leaf(f));
        Var probs = classify(tape, vars, fv);
        return tape.cross_entropy(probs, 1);
    };
    auto rep = grad_check(build, params, 1e-5);
    CHECK(rep.max_rel_err < 1e-4);
}
