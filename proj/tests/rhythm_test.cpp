#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "framesel/rhythm.hpp"

using namespace framesel;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("framesel_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static inline int counter = 0;
};

FeatureSequence ramp_sequence(std::uint32_t n, std::uint32_t d, std::uint32_t label = 0) {
    FeatureSequence seq;
    seq.id = "ramp";
    seq.n = n;
    seq.d = d;
    seq.label = label;
    seq.frames.resize(static_cast<std::size_t>(n) * d);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) seq.frames[i] = static_cast<float>(i);
    return seq;
}

} // namespace

TEST_CASE("generator determinism and degenerate noise") {
    SyntheticSpec spec;
    spec.n_classes = 3;
    spec.n_subactivities = 7;
    spec.segments_per_seq = 3;
    spec.dur_min = 2;
    spec.dur_max = 5;
    spec.dim = 8;
    spec.n_train = 6;
    spec.n_test = 3;

    auto a = generate_dataset(spec, 99);
    auto b = generate_dataset(spec, 99);
    REQUIRE(a.train.size() == 6);
    REQUIRE(a.test.size() == 3);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].frames == b.train[i].frames);
        CHECK(a.train[i].label == b.train[i].label);
        CHECK(a.train[i].segment_map == b.train[i].segment_map);
    }

    // zero noise: every frame of a segment equals its prototype exactly
    spec.noise = 0.0;
    auto c = generate_dataset(spec, 7);
    for (const auto& seq : c.train) {
        REQUIRE(seq.has_segments());
        for (std::size_t i = 1; i < seq.n; ++i) {
            if (seq.segment_map[i].subactivity == seq.segment_map[i - 1].subactivity) {
                for (std::size_t k = 0; k < seq.d; ++k)
                    CHECK(seq.frames[i * seq.d + k] == seq.frames[(i - 1) * seq.d + k]);
            }
        }
    }
}

TEST_CASE("discriminative sub-activities are exclusive to their class") {
    SyntheticSpec spec;
    spec.n_classes = 4;
    spec.n_subactivities = 9;
    spec.segments_per_seq = 4;
    spec.dur_min = 2;
    spec.dur_max = 4;
    spec.dim = 16;
    spec.n_train = 40;
    spec.n_test = 20;
    auto ds = generate_dataset(spec, 5);

    // discriminative ids are 0..n_classes-1 (one per class); check exclusivity
    auto check = [&](const std::vector<FeatureSequence>& seqs) {
        for (const auto& seq : seqs) {
            bool has_own = false;
            for (const auto& s : seq.segment_map) {
                if (s.discriminative) {
                    CHECK(s.subactivity == seq.label);
                    has_own = true;
                }
            }
            CHECK(has_own);
        }
    };
    check(ds.train);
    check(ds.test);
}

TEST_CASE("infeasible synthetic specs are rejected") {
    SyntheticSpec spec;
    spec.n_classes = 6;
    spec.n_subactivities = 6; // no room for shared fillers
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.n_subactivities = 5; // fewer than the discriminative ones
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.n_subactivities = 14;
    spec.dim = 8; // not enough dimensions for distinct prototypes
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("interval scenarios: documented lengths at N=30") {
    auto seq = ramp_sequence(30, 1);

    auto s1 = resample(seq, ScenarioSpec::parse("s1"));
    REQUIRE(s1.n == 17);
    // first interval keeps 0,2,4,6,8; middle keeps all; third keeps 20,25
    for (std::size_t i = 0; i < 5; ++i) CHECK(s1.frames[i] == static_cast<float>(2 * i));
    for (std::size_t i = 0; i < 10; ++i) CHECK(s1.frames[5 + i] == static_cast<float>(10 + i));
    CHECK(s1.frames[15] == 20.0f);
    CHECK(s1.frames[16] == 25.0f);

    auto s2 = resample(seq, ScenarioSpec::parse("s2"));
    REQUIRE(s2.n == 17);
    CHECK(s2.frames[0] == 0.0f);
    CHECK(s2.frames[1] == 5.0f);
    CHECK(s2.frames[2] == 10.0f);
    CHECK(s2.frames[16] == 28.0f);

    auto orig = resample(seq, ScenarioSpec::parse("original"));
    CHECK(orig.frames == seq.frames);
}

TEST_CASE("scenario length properties hold for every N") {
    for (std::uint32_t n = 3; n <= 120; ++n) {
        auto seq = ramp_sequence(n, 1);
        auto s1 = resample(seq, ScenarioSpec::parse("s1"));
        auto s2 = resample(seq, ScenarioSpec::parse("s2"));
        CHECK(s1.n == s2.n); // stride multiset identical on equal end intervals
        auto s3 = resample(seq, ScenarioSpec::parse("s3"), 17);
        CHECK(s3.n == n / 2);

        // kept indices strictly increase (frames are never reordered)
        for (const auto& out : {s1, s2, s3})
            for (std::size_t i = 1; i < out.n; ++i) CHECK(out.frames[i] > out.frames[i - 1]);
    }
}

TEST_CASE("s3 is a uniform half sample, averaged over seeds elsewhere") {
    auto seq = ramp_sequence(40, 1);
    auto a = resample(seq, ScenarioSpec::parse("s3"), 1);
    auto b = resample(seq, ScenarioSpec::parse("s3"), 1);
    auto c = resample(seq, ScenarioSpec::parse("s3"), 2);
    CHECK(a.frames == b.frames);
    CHECK(a.frames != c.frames);

    std::set<float> unique(a.frames.begin(), a.frames.end());
    CHECK(unique.size() == a.n); // without replacement
}

TEST_CASE("labels and segment maps survive every transform") {
    SyntheticSpec spec;
    spec.n_classes = 2;
    spec.n_subactivities = 5;
    spec.segments_per_seq = 3;
    spec.dur_min = 4;
    spec.dur_max = 8;
    spec.dim = 6;
    spec.n_train = 4;
    spec.n_test = 2;
    auto ds = generate_dataset(spec, 11);
    const auto& seq = ds.train[1];

    for (const char* name : {"original", "s1", "s2", "s3"}) {
        auto out = resample(seq, ScenarioSpec::parse(name), 3);
        CHECK(out.label == seq.label);
        CHECK(out.segment_map.size() == out.n);
    }
}

TEST_CASE("interval scenarios need at least three frames") {
    auto seq = ramp_sequence(2, 1);
    CHECK_THROWS_AS(resample(seq, ScenarioSpec::parse("s1")), ShapeError);
    CHECK_THROWS_AS(resample(seq, ScenarioSpec::parse("s2")), ShapeError);
}

TEST_CASE("train subsample arithmetic and boundaries") {
    auto seq = ramp_sequence(120, 1);
    auto out = train_subsample(seq, 5, 10);
    REQUIRE(out.n == 20);
    CHECK(out.frames.front() == 10.0f);
    CHECK(out.frames.back() == 105.0f);

    auto identity = train_subsample(seq, 1, 0);
    CHECK(identity.frames == seq.frames);

    auto short_seq = ramp_sequence(21, 1);
    CHECK_THROWS_AS(train_subsample(short_seq, 1, 10), ShapeError);
    CHECK_THROWS_AS(train_subsample(seq, 0, 0), ConfigError);
}

TEST_CASE("fseq round-trip is bitwise lossless") {
    TempDir dir;
    SyntheticSpec spec;
    spec.n_classes = 2;
    spec.n_subactivities = 5;
    spec.segments_per_seq = 2;
    spec.dur_min = 2;
    spec.dur_max = 4;
    spec.dim = 8;
    spec.n_train = 2;
    spec.n_test = 1;
    auto ds = generate_dataset(spec, 3);
    const auto& seq = ds.train[0];

    auto path = dir.path / "a.fseq";
    write_fseq(path, seq);
    auto back = read_fseq(path);
    CHECK(back.id == seq.id);
    CHECK(back.label == seq.label);
    CHECK(back.n == seq.n);
    CHECK(back.d == seq.d);
    CHECK(back.frames == seq.frames);
    CHECK(back.segment_map == seq.segment_map);

    // minimal N=1, D=1 file
    FeatureSequence tiny;
    tiny.id = "t";
    tiny.n = 1;
    tiny.d = 1;
    tiny.frames = {0.125f};
    write_fseq(dir.path / "t.fseq", tiny);
    auto tiny_back = read_fseq(dir.path / "t.fseq");
    CHECK(tiny_back.frames == tiny.frames);
}

TEST_CASE("malformed fseq files are rejected") {
    TempDir dir;
    {
        std::ofstream out(dir.path / "bad_magic.fseq", std::ios::binary);
        out << "NOPE1aaaaaaaaaaaaaaaa";
    }
    CHECK_THROWS_AS(read_fseq(dir.path / "bad_magic.fseq"), FormatError);

    {
        std::ofstream out(dir.path / "trunc.fseq", std::ios::binary);
        out << "FSEQ1";
        // claims 2x3 frames but carries none
        for (unsigned char b : {2, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0})
            out.put(static_cast<char>(b));
        out << "x";
    }
    CHECK_THROWS_AS(read_fseq(dir.path / "trunc.fseq"), FormatError);

    CHECK_THROWS_AS(read_fseq(dir.path / "missing.fseq"), IoError);
}

TEST_CASE("dataset directory round-trip via manifest") {
    TempDir dir;
    SyntheticSpec spec;
    spec.n_classes = 2;
    spec.n_subactivities = 5;
    spec.segments_per_seq = 2;
    spec.dur_min = 2;
    spec.dur_max = 4;
    spec.dim = 8;
    spec.n_train = 4;
    spec.n_test = 2;
    auto ds = generate_dataset(spec, 8);

    write_dataset(dir.path, ds);
    auto back = read_dataset(dir.path);
    REQUIRE(back.train.size() == 4);
    REQUIRE(back.test.size() == 2);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(back.train[i].id == ds.train[i].id);
        CHECK(back.train[i].frames == ds.train[i].frames);
        CHECK(back.train[i].segment_map == ds.train[i].segment_map);
    }
    CHECK(dataset_n_classes(back) == 2);
    CHECK(dataset_dim(back) == 8);
}

TEST_CASE("high-dimensional features are supported") {
    SyntheticSpec spec;
    spec.n_classes = 2;
    spec.n_subactivities = 4;
    spec.segments_per_seq = 2;
    spec.dur_min = 2;
    spec.dur_max = 3;
    spec.dim = 4096;
    spec.n_train = 1;
    spec.n_test = 1;
    auto ds = generate_dataset(spec, 1);
    CHECK(ds.train[0].d == 4096);
    CHECK(ds.train[0].frames.size() == ds.train[0].n * 4096u);
}
