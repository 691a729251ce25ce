#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "framesel/framesel.hpp"

using namespace framesel;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("framesel_harness_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static inline int counter = 0;
};

// Small, clearly separable synthetic set for fast training tests.
Dataset toy_dataset(std::uint64_t seed = 7) {
    SyntheticSpec spec;
    spec.n_classes = 3;
    spec.n_subactivities = 7;
    spec.segments_per_seq = 2;
    spec.dur_min = 3;
    spec.dur_max = 6;
    spec.dim = 8;
    spec.noise = 0.15;
    spec.separation = 2.0;
    spec.n_train = 30;
    spec.n_test = 12;
    return generate_dataset(spec, seed);
}

ExperimentConfig toy_config(const std::string& variant, std::uint64_t seed = 11) {
    ExperimentConfig cfg;
    cfg.variant = variant;
    cfg.seed = seed;
    cfg.seed_set = true;
    cfg.cls_hidden = 12;
    cfg.cls_fc = 8;
    cfg.sel_hidden = 8;
    cfg.sel_fc1 = 6;
    cfg.lr = 5e-3;
    cfg.epochs = 30;
    cfg.accum = 4;
    cfg.patience = 0;
    cfg.n_classes = 3;
    cfg.dim = 8;
    cfg.warmup_epochs = 2;
    cfg.anneal_epochs = 4;
    return cfg;
}

} // namespace

TEST_CASE("config text round-trip and validation") {
    ExperimentConfig cfg;
    cfg.set("variant", "srnn_plus");
    cfg.set("m_r", "0.3");
    cfg.set("seed", "42");
    cfg.set("keep_all", "1");

    ExperimentConfig back;
    back.load_text(cfg.to_text());
    CHECK(back.variant == "srnn_plus");
    CHECK(back.m_r == doctest::Approx(0.3));
    CHECK(back.seed == 42);
    CHECK(back.seed_set);
    CHECK(back.keep_all);
    CHECK(back.to_text() == cfg.to_text());

    CHECK_THROWS_AS(cfg.set("no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("epochs", "abc"), ConfigError);

    ExperimentConfig commented;
    commented.load_text("# comment\n  lr = 0.25  # trailing\n\nvariant=baseline\n");
    CHECK(commented.lr == doctest::Approx(0.25));
    CHECK(commented.variant == "baseline");
    CHECK_THROWS_AS(commented.load_text("not_a_kv_line\n"), ConfigError);
}

TEST_CASE("config validate_for_train catches misuse") {
    TempDir dir;
    ExperimentConfig cfg = toy_config("rl_plus");
    cfg.data = (dir.path / "nope").string();
    CHECK_THROWS_AS(cfg.validate_for_train(), ConfigError);
    fs::create_directories(dir.path / "nope");
    CHECK_NOTHROW(cfg.validate_for_train());
    cfg.keep_all = true;
    CHECK_THROWS_AS(cfg.validate_for_train(), ConfigError); // keep_all is selector-only
    cfg.variant = "rnn_plus";
    CHECK_NOTHROW(cfg.validate_for_train());
    cfg.seed_set = false;
    CHECK_THROWS_AS(cfg.validate_for_train(), ConfigError);
}

TEST_CASE("classifier initialization is independent of the variant") {
    auto a = build_pipeline<float>(toy_config("baseline"));
    auto b = build_pipeline<float>(toy_config("rnn_plus"));
    auto c = build_pipeline<float>(toy_config("srnn_plus"));
    CHECK(a.classifier.gru.wz.data == b.classifier.gru.wz.data);
    CHECK(a.classifier.fc2_w.data == c.classifier.fc2_w.data);
    CHECK_FALSE(a.has_selector);
    CHECK(b.has_selector);
    CHECK_FALSE(b.selector.skip());
    CHECK(c.selector.skip());
}

TEST_CASE("baseline trains to high accuracy on the separable toy set") {
    Dataset ds = toy_dataset();
    ExperimentConfig cfg = toy_config("baseline");
    cfg.epochs = 200;
    auto pipeline = build_pipeline<float>(cfg);
    TrainLog log = train(pipeline, ds, nullptr);

    bool reached = false;
    for (const auto& e : log.epochs)
        if (e.train_accuracy_pct >= 99.0) reached = true;
    CHECK(reached);

    auto metrics = evaluate(pipeline, ds.test, parse_scenarios("original", 5), cfg.seed);
    CHECK(metrics.rows.size() == 1);
    CHECK(metrics.rows[0].accuracy_pct >= 80.0);
    CHECK_FALSE(metrics.rows[0].has_usage); // baseline reports no usage
    CHECK(metrics.rows[0].per_class_accuracy_pct.size() == 3);
}

TEST_CASE("training is bitwise deterministic for a fixed config and seed") {
    Dataset ds = toy_dataset();
    for (const char* variant : {"rnn_plus", "rl_plus"}) {
        ExperimentConfig cfg = toy_config(variant);
        cfg.epochs = 6;

        auto p1 = build_pipeline<float>(cfg);
        auto p2 = build_pipeline<float>(cfg);
        TrainLog l1 = train(p1, ds, nullptr);
        TrainLog l2 = train(p2, ds, nullptr);
        REQUIRE(l1.epochs.size() == l2.epochs.size());
        for (std::size_t e = 0; e < l1.epochs.size(); ++e) {
            CHECK(l1.epochs[e].l_c == l2.epochs[e].l_c);
            CHECK(l1.epochs[e].usage_pct == l2.epochs[e].usage_pct);
        }
        for (auto [name_a, t_a] : p1.named_params()) {
            const Tensor<float>* t_b = nullptr;
            for (auto [name_b, tb] : p2.named_params())
                if (name_b == name_a) t_b = tb;
            REQUIRE(t_b != nullptr);
            CHECK(t_a->data == t_b->data);
        }

        auto m1 = evaluate(p1, ds.test, parse_scenarios(cfg.scenarios, 3), cfg.seed);
        auto m2 = evaluate(p2, ds.test, parse_scenarios(cfg.scenarios, 3), cfg.seed);
        for (std::size_t i = 0; i < m1.rows.size(); ++i) {
            CHECK(m1.rows[i].accuracy_pct == m2.rows[i].accuracy_pct);
            CHECK(m1.rows[i].usage_pct == m2.rows[i].usage_pct);
        }
    }
}

TEST_CASE("keep-all selection reproduces the baseline bitwise") {
    Dataset ds = toy_dataset();
    ExperimentConfig base_cfg = toy_config("baseline");
    base_cfg.epochs = 8;
    ExperimentConfig keep_cfg = toy_config("rnn_plus");
    keep_cfg.epochs = 8;
    keep_cfg.keep_all = true;

    auto base = build_pipeline<float>(base_cfg);
    auto keep = build_pipeline<float>(keep_cfg);
    train(base, ds, nullptr);
    train(keep, ds, nullptr);

    // identical classifier weights after training
    CHECK(base.classifier.gru.wz.data == keep.classifier.gru.wz.data);
    CHECK(base.classifier.fc2_w.data == keep.classifier.fc2_w.data);

    auto scenarios = parse_scenarios("original,s1,s2,s3", 3);
    auto mb = evaluate(base, ds.test, scenarios, base_cfg.seed);
    auto mk = evaluate(keep, ds.test, scenarios, keep_cfg.seed);
    REQUIRE(mb.rows.size() == mk.rows.size());
    for (std::size_t i = 0; i < mb.rows.size(); ++i) {
        CHECK(mb.rows[i].accuracy_pct == mk.rows[i].accuracy_pct);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(mb.rows[i].per_class_accuracy_pct[c] == mk.rows[i].per_class_accuracy_pct[c]);
    }
    // keep-all usage is exactly 100%
    CHECK(mk.rows[0].has_usage);
    CHECK(mk.rows[0].usage_pct == 100.0);
}

TEST_CASE("checkpoint round-trip reproduces metrics bitwise") {
    TempDir dir;
    Dataset ds = toy_dataset();
    ExperimentConfig cfg = toy_config("srnn_plus");
    cfg.epochs = 6;
    auto pipeline = build_pipeline<float>(cfg);
    train(pipeline, ds, nullptr);

    auto path = dir.path / "model.fscp";
    save_checkpoint(path, make_checkpoint(pipeline));
    auto restored = pipeline_from_checkpoint(load_checkpoint(path));

    auto scenarios = parse_scenarios(cfg.scenarios, cfg.s3_repeats);
    auto m1 = evaluate(pipeline, ds.test, scenarios, cfg.seed);
    auto m2 = evaluate(restored, ds.test, scenarios, cfg.seed);
    REQUIRE(m1.rows.size() == m2.rows.size());
    for (std::size_t i = 0; i < m1.rows.size(); ++i) {
        CHECK(m1.rows[i].accuracy_pct == m2.rows[i].accuracy_pct);
        CHECK(m1.rows[i].usage_pct == m2.rows[i].usage_pct);
    }

    // corrupting a tensor name is caught
    auto ckpt = load_checkpoint(path);
    ckpt.tensors[0].first = "classifier/bogus";
    CHECK_THROWS_AS(pipeline_from_checkpoint(ckpt), FormatError);
}

TEST_CASE("evaluate rejects mismatched dimensions") {
    Dataset ds = toy_dataset();
    ExperimentConfig cfg = toy_config("baseline");
    cfg.dim = 5; // wrong on purpose
    auto pipeline = build_pipeline<float>(cfg);
    CHECK_THROWS_AS(evaluate(pipeline, ds.test, parse_scenarios("original", 1), 0), ShapeError);
}

TEST_CASE("train-time stride subsampling is applied") {
    Dataset ds = toy_dataset();
    ExperimentConfig cfg = toy_config("baseline");
    cfg.epochs = 1;
    cfg.train_stride = 2;
    auto pipeline = build_pipeline<float>(cfg);
    CHECK_NOTHROW(train(pipeline, ds, nullptr));
}

TEST_CASE("early stopping halts after patience epochs without improvement") {
    Dataset ds = toy_dataset();
    ExperimentConfig cfg = toy_config("baseline");
    cfg.epochs = 100;
    cfg.patience = 3;
    cfg.val_fraction = 0.2;
    auto pipeline = build_pipeline<float>(cfg);
    TrainLog log = train(pipeline, ds, nullptr);
    CHECK(log.epochs.size() < 100);
    CHECK(log.best_val_accuracy_pct >= 0.0);
    if (log.early_stopped)
        CHECK(log.epochs.size() == log.best_epoch + cfg.patience + 1);
}

TEST_CASE("trace export format is internally consistent") {
    Dataset ds = toy_dataset();
    ExperimentConfig cfg = toy_config("rnn_plus");
    cfg.epochs = 4;
    auto pipeline = build_pipeline<float>(cfg);
    train(pipeline, ds, nullptr);

    std::ostringstream out;
    export_traces(pipeline, ds.test, out);
    std::istringstream in(out.str());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        std::istringstream fields(line);
        std::string id, plist, ylist;
        std::size_t n, k;
        double usage;
        REQUIRE((fields >> id >> n >> k >> usage >> plist >> ylist));
        // K equals the number of 1s in the y-list
        std::size_t ones = 0;
        for (char c : ylist) ones += c == '1';
        CHECK(ones == k);
        CHECK(std::count(plist.begin(), plist.end(), ',') + 1 == static_cast<long>(n));
        CHECK(usage == doctest::Approx(100.0 * static_cast<double>(k) / static_cast<double>(n)));
    }
    CHECK(lines == ds.test.size());

    auto baseline = build_pipeline<float>(toy_config("baseline"));
    std::ostringstream sink;
    CHECK_THROWS_AS(export_traces(baseline, ds.test, sink), ConfigError);
}

TEST_CASE("single-value sweep equals a plain train and evaluate") {
    Dataset ds = toy_dataset();
    ExperimentConfig cfg = toy_config("rnn_plus");
    cfg.epochs = 4;

    auto rows = sweep_mr(cfg, {0.25}, ds);
    REQUIRE(rows.size() == 1);

    ExperimentConfig plain = cfg;
    plain.m_r = 0.25;
    auto pipeline = build_pipeline<float>(plain);
    train(pipeline, ds, nullptr);
    auto metrics =
        evaluate(pipeline, ds.test, parse_scenarios(plain.scenarios, plain.s3_repeats), plain.seed);

    REQUIRE(rows[0].metrics.rows.size() == metrics.rows.size());
    for (std::size_t i = 0; i < metrics.rows.size(); ++i)
        CHECK(rows[0].metrics.rows[i].accuracy_pct == metrics.rows[i].accuracy_pct);

    auto table = sweep_table(rows);
    CHECK(table.find("m_r") != std::string::npos);
    CHECK_THROWS_AS(sweep_mr(cfg, {1.5}, ds), ConfigError);
}

TEST_CASE("divergent training aborts with a state dump") {
    TempDir dir;
    Dataset ds = toy_dataset();
    ExperimentConfig cfg = toy_config("baseline");
    cfg.lr = 1e18; // forces overflow within a few steps
    cfg.epochs = 50;
    auto pipeline = build_pipeline<float>(cfg);
    auto dump = (dir.path / "diverged.fscp").string();
    CHECK_THROWS_AS(train(pipeline, ds, nullptr, dump), NumericError);
    CHECK(fs::exists(dump));
    // the dump is a loadable checkpoint
    CHECK_NOTHROW(load_checkpoint(dump));
}

TEST_CASE("metrics tables render both formats") {
    MetricsTable t;
    ScenarioMetrics a;
    a.scenario = "original";
    a.accuracy_pct = 93.5;
    a.usage_pct = 24.0;
    a.has_usage = true;
    a.per_class_accuracy_pct = {90.0, 97.0};
    t.rows.push_back(a);
    ScenarioMetrics b = a;
    b.scenario = "s3";
    b.accuracy_pct = 91.0;
    t.rows.push_back(b);

    auto human = t.human_table();
    CHECK(human.find("original") != std::string::npos);
    CHECK(human.find("s3") != std::string::npos);
    auto machine = t.machine_records();
    CHECK(machine.find("scenario=original") != std::string::npos);
    CHECK(machine.find("per_class=90,97") != std::string::npos);
}
