#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "framesel/binio.hpp"
#include "framesel/errors.hpp"
#include "framesel/rng.hpp"
#include "framesel/tensor.hpp"

namespace framesel {

// Per-frame provenance for synthetic data: which sub-activity produced the
// frame and whether that sub-activity is class-discriminative.
struct SegmentInfo {
    std::uint32_t subactivity = 0;
    bool discriminative = false;

    bool operator==(const SegmentInfo&) const = default;
};

// One event instance: N frames of D features plus an event label. Frames are
// stored as 32-bit floats, matching the on-disk format bit for bit.
struct FeatureSequence {
    std::string id;
    std::uint32_t n = 0;
    std::uint32_t d = 0;
    std::vector<float> frames; // row-major n x d
    std::uint32_t label = 0;
    std::vector<SegmentInfo> segment_map; // empty, or exactly n entries

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(frames.data() + i * d, d);
    }
    float* row_ptr(std::size_t i) { return frames.data() + i * d; }

    bool has_segments() const { return !segment_map.empty(); }

    void validate() const {
        if (n < 1) throw ShapeError("FeatureSequence: n must be >= 1");
        if (frames.size() != static_cast<std::size_t>(n) * d)
            throw ShapeError("FeatureSequence: frame buffer size mismatch");
        if (!segment_map.empty() && segment_map.size() != n)
            throw ShapeError("FeatureSequence: segment map must cover exactly n frames");
    }

    // Kept frames in the given (strictly increasing) index order.
    FeatureSequence subset(std::span<const std::size_t> indices) const {
        FeatureSequence out;
        out.id = id;
        out.label = label;
        out.d = d;
        out.n = static_cast<std::uint32_t>(indices.size());
        out.frames.resize(static_cast<std::size_t>(out.n) * d);
        for (std::size_t k = 0; k < indices.size(); ++k) {
            if (indices[k] >= n) throw ShapeError("subset: index out of range");
            std::copy_n(frames.data() + indices[k] * d, d, out.frames.data() + k * d);
        }
        if (has_segments()) {
            out.segment_map.reserve(indices.size());
            for (std::size_t i : indices) out.segment_map.push_back(segment_map[i]);
        }
        return out;
    }

    Tensor<float> frame_tensor(std::size_t i) const {
        Tensor<float> t;
        t.assign_vec(d);
        std::copy_n(frames.data() + i * d, d, t.data.data());
        return t;
    }
};

struct Dataset {
    std::vector<FeatureSequence> train;
    std::vector<FeatureSequence> test;
};

// ---------------------------------------------------------------------------
// Synthetic rhythm-varying benchmark
// ---------------------------------------------------------------------------

// Events are concatenations of sub-activity segments with random durations
// (the varying rhythm). Each class owns at least one sub-activity that never
// appears in other classes; the rest are drawn from a shared pool.
struct SyntheticSpec {
    std::size_t n_classes = 6;
    std::size_t n_subactivities = 14; // total pool, exclusive ones included
    std::size_t disc_per_class = 1;
    std::size_t segments_per_seq = 5;
    std::size_t dur_min = 10;
    std::size_t dur_max = 40;
    std::size_t dim = 32; // 4096 works too, at desk-scale cost
    double noise = 0.5;
    double separation = 1.0;
    // Cosine between the discriminative prototypes of paired classes
    // (class 2k with class 2k+1). 0 keeps all prototypes orthogonal; values
    // near 1 make each pair's fine distinction require evidence accumulated
    // across the discriminative segment.
    double confusable_cos = 0.0;
    // AR(1) coefficient for within-segment noise. 0 is white noise; values
    // near 1 give the temporally smooth frames real feature extractors
    // produce. The stationary per-frame noise scale stays `noise` either way.
    double noise_smooth = 0.0;
    std::size_t n_train = 200;
    std::size_t n_test = 100;

    void validate() const {
        if (n_classes < 2) throw ConfigError("SyntheticSpec: need >= 2 classes");
        if (disc_per_class < 1) throw ConfigError("SyntheticSpec: disc_per_class must be >= 1");
        if (n_classes * disc_per_class >= n_subactivities)
            throw ConfigError("SyntheticSpec: more discriminative sub-activities than pool size");
        if (segments_per_seq < 1) throw ConfigError("SyntheticSpec: segments_per_seq must be >= 1");
        if (dur_min < 1 || dur_max < dur_min) throw ConfigError("SyntheticSpec: bad duration range");
        if (dim < 1) throw ConfigError("SyntheticSpec: dim must be >= 1");
        if (n_subactivities > dim)
            throw ConfigError("SyntheticSpec: need dim >= n_subactivities for distinct prototypes");
        if (noise < 0.0 || separation <= 0.0) throw ConfigError("SyntheticSpec: bad noise/separation");
        if (confusable_cos < 0.0 || confusable_cos >= 1.0)
            throw ConfigError("SyntheticSpec: confusable_cos must be in [0,1)");
        if (noise_smooth < 0.0 || noise_smooth >= 1.0)
            throw ConfigError("SyntheticSpec: noise_smooth must be in [0,1)");
        if (n_train < 1 || n_test < 1) throw ConfigError("SyntheticSpec: empty split");
    }
};

namespace detail {

inline FeatureSequence synth_sequence(const SyntheticSpec& spec,
                                      const std::vector<std::vector<float>>& prototypes,
                                      std::size_t label, const std::string& id, Rng& rng) {
    std::size_t n_disc_ids = spec.n_classes * spec.disc_per_class;
    std::size_t n_shared = spec.n_subactivities - n_disc_ids;

    // one discriminative segment at a random position, shared fillers elsewhere
    std::vector<std::uint32_t> segment_ids(spec.segments_per_seq);
    std::size_t disc_pos = rng.below(spec.segments_per_seq);
    for (std::size_t s = 0; s < spec.segments_per_seq; ++s) {
        if (s == disc_pos) {
            std::size_t which = rng.below(spec.disc_per_class);
            segment_ids[s] = static_cast<std::uint32_t>(label * spec.disc_per_class + which);
        } else {
            segment_ids[s] = static_cast<std::uint32_t>(n_disc_ids + rng.below(n_shared));
        }
    }

    FeatureSequence seq;
    seq.id = id;
    seq.label = static_cast<std::uint32_t>(label);
    seq.d = static_cast<std::uint32_t>(spec.dim);
    double noise_scale = spec.noise / std::sqrt(static_cast<double>(spec.dim));
    double rho = spec.noise_smooth;
    double fresh = std::sqrt(1.0 - rho * rho);
    std::vector<double> drift(spec.dim);
    for (std::size_t s = 0; s < spec.segments_per_seq; ++s) {
        std::size_t dur = spec.dur_min + rng.below(spec.dur_max - spec.dur_min + 1);
        const auto& proto = prototypes[segment_ids[s]];
        bool disc = segment_ids[s] < n_disc_ids;
        // AR(1) noise restarts with each segment; marginal scale is constant
        for (auto& v : drift) v = noise_scale * rng.normal();
        for (std::size_t f = 0; f < dur; ++f) {
            if (f > 0)
                for (auto& v : drift) v = rho * v + fresh * noise_scale * rng.normal();
            for (std::size_t k = 0; k < spec.dim; ++k)
                seq.frames.push_back(proto[k] + static_cast<float>(drift[k]));
            seq.segment_map.push_back(SegmentInfo{segment_ids[s], disc});
        }
    }
    seq.n = static_cast<std::uint32_t>(seq.segment_map.size());
    seq.validate();
    return seq;
}

} // namespace detail

// Deterministic per seed: the same (spec, seed) yields bitwise-identical data.
// Prototypes are mutually orthogonal directions of length `separation`, so
// every prototype pair sits at the same distance and dataset difficulty does
// not wobble with the seed's luck.
inline Dataset generate_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);

    std::vector<std::vector<double>> basis(spec.n_subactivities);
    for (auto& v : basis) {
        v.resize(spec.dim);
        for (auto& x : v) x = rng.normal();
    }
    for (std::size_t i = 0; i < basis.size(); ++i) { // Gram-Schmidt
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < spec.dim; ++k) dot += basis[i][k] * basis[j][k];
            for (std::size_t k = 0; k < spec.dim; ++k) basis[i][k] -= dot * basis[j][k];
        }
        double norm2 = 0.0;
        for (double x : basis[i]) norm2 += x * x;
        if (norm2 < 1e-12) throw NumericError("degenerate prototype basis");
        double inv = 1.0 / std::sqrt(norm2);
        for (auto& x : basis[i]) x *= inv;
    }
    // tilt paired classes' discriminative prototypes toward each other
    if (spec.confusable_cos > 0.0 && spec.disc_per_class >= 1) {
        double c = spec.confusable_cos;
        double s = std::sqrt(1.0 - c * c);
        for (std::size_t pair = 0; 2 * pair + 1 < spec.n_classes; ++pair) {
            std::size_t a = (2 * pair) * spec.disc_per_class;
            std::size_t b = (2 * pair + 1) * spec.disc_per_class;
            for (std::size_t d = 0; d < spec.disc_per_class; ++d)
                for (std::size_t k = 0; k < spec.dim; ++k)
                    basis[b + d][k] = c * basis[a + d][k] + s * basis[b + d][k];
        }
    }

    // orthogonal directions with mildly diverse norms: sub-activities differ in
    // salience the way real ones do, without any pair colliding
    std::vector<std::vector<float>> prototypes(spec.n_subactivities);
    for (std::size_t i = 0; i < prototypes.size(); ++i) {
        double salience = rng.uniform(0.75, 1.3);
        prototypes[i].resize(spec.dim);
        for (std::size_t k = 0; k < spec.dim; ++k)
            prototypes[i][k] = static_cast<float>(spec.separation * salience * basis[i][k]);
    }

    Dataset ds;
    char buf[32];
    for (std::size_t i = 0; i < spec.n_train; ++i) {
        std::snprintf(buf, sizeof buf, "train_%04zu", i);
        ds.train.push_back(detail::synth_sequence(spec, prototypes, i % spec.n_classes, buf, rng));
    }
    for (std::size_t i = 0; i < spec.n_test; ++i) {
        std::snprintf(buf, sizeof buf, "test_%04zu", i);
        ds.test.push_back(detail::synth_sequence(spec, prototypes, i % spec.n_classes, buf, rng));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Test-time rhythm scenarios
// ---------------------------------------------------------------------------

enum class ScenarioKind { original, s1, s2, s3, custom };

// Interval scenarios split a sequence into three intervals (ends of size
// floor(N/3), remainder in the middle so that S1 and S2 always keep the same
// number of frames) and subsample each interval with its own stride, anchored
// at the interval's first frame. S3 keeps a sorted uniform half-length sample.
struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::original;
    std::array<std::size_t, 3> strides = {1, 1, 1}; // used by custom
    std::size_t s3_repeats = 5;
    std::vector<std::uint64_t> s3_seeds; // optional; derived from seed if empty

    static ScenarioSpec parse(const std::string& text) {
        ScenarioSpec s;
        if (text == "original") {
            s.kind = ScenarioKind::original;
        } else if (text == "s1") {
            s.kind = ScenarioKind::s1;
        } else if (text == "s2") {
            s.kind = ScenarioKind::s2;
        } else if (text == "s3") {
            s.kind = ScenarioKind::s3;
        } else if (text.rfind("custom:", 0) == 0) {
            s.kind = ScenarioKind::custom;
            std::istringstream in(text.substr(7));
            std::string part;
            for (std::size_t i = 0; i < 3; ++i) {
                if (!std::getline(in, part, ',')) throw ConfigError("custom scenario needs 3 strides");
                long v = std::stol(part);
                if (v < 1) throw ConfigError("custom scenario strides must be >= 1");
                s.strides[i] = static_cast<std::size_t>(v);
            }
        } else {
            throw ConfigError("unknown scenario: " + text);
        }
        return s;
    }

    std::string name() const {
        switch (kind) {
            case ScenarioKind::original: return "original";
            case ScenarioKind::s1: return "s1";
            case ScenarioKind::s2: return "s2";
            case ScenarioKind::s3: return "s3";
            case ScenarioKind::custom:
                return "custom:" + std::to_string(strides[0]) + "," + std::to_string(strides[1]) +
                       "," + std::to_string(strides[2]);
        }
        return "?";
    }
};

namespace detail {

inline std::vector<std::size_t> interval_indices(std::size_t n,
                                                 const std::array<std::size_t, 3>& strides) {
    if (n < 3) throw ShapeError("interval scenarios need N >= 3");
    std::size_t side = n / 3;
    std::array<std::size_t, 4> bounds = {0, side, n - side, n};
    std::vector<std::size_t> kept;
    for (std::size_t iv = 0; iv < 3; ++iv)
        for (std::size_t i = bounds[iv]; i < bounds[iv + 1]; i += strides[iv]) kept.push_back(i);
    return kept;
}

} // namespace detail

// Applies the scenario's sampling pattern. Frames are never reordered and the
// label is never altered.
inline FeatureSequence resample(const FeatureSequence& seq, const ScenarioSpec& scenario,
                                std::uint64_t seed = 0) {
    switch (scenario.kind) {
        case ScenarioKind::original:
            return seq;
        case ScenarioKind::s1:
            return seq.subset(detail::interval_indices(seq.n, {2, 1, 5}));
        case ScenarioKind::s2:
            return seq.subset(detail::interval_indices(seq.n, {5, 1, 2}));
        case ScenarioKind::custom:
            return seq.subset(detail::interval_indices(seq.n, scenario.strides));
        case ScenarioKind::s3: {
            if (seq.n < 2) throw ShapeError("s3 needs N >= 2");
            std::size_t keep = seq.n / 2;
            std::vector<std::size_t> idx(seq.n);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            Rng rng(seed);
            // partial Fisher-Yates: uniform sample without replacement
            for (std::size_t i = 0; i < keep; ++i) {
                std::size_t j = i + rng.below(seq.n - i);
                std::swap(idx[i], idx[j]);
            }
            idx.resize(keep);
            std::sort(idx.begin(), idx.end());
            return seq.subset(idx);
        }
    }
    throw ConfigError("bad scenario kind");
}

// Train-time preparation: drop `trim` frames at both ends, then keep every
// stride-th frame of the remainder.
inline FeatureSequence train_subsample(const FeatureSequence& seq, std::size_t stride,
                                       std::size_t trim) {
    if (stride < 1) throw ConfigError("train_subsample: stride must be >= 1");
    // trimming must leave a usable sequence: at least two frames
    if (seq.n <= 2 * trim + (trim > 0 ? 1 : 0))
        throw ShapeError("train_subsample: sequence too short after trim");
    std::vector<std::size_t> idx;
    for (std::size_t i = trim; i < seq.n - trim; i += stride) idx.push_back(i);
    return seq.subset(idx);
}

// ---------------------------------------------------------------------------
// FSEQ1 feature file format
//
//   magic "FSEQ1", then little-endian: u32 N, u32 D, u32 label, u32 id-length,
//   id bytes, then N*D float32 values row-major.
//
// A synthetic sequence's segment map travels in a "<file>.segmap" text sidecar
// (header "SEGMAP1 <n>", then one "<subactivity> <0|1>" line per frame); the
// .fseq payload itself is exactly the format above.
// ---------------------------------------------------------------------------

inline constexpr char kFseqMagic[5] = {'F', 'S', 'E', 'Q', '1'};

inline void write_fseq(const std::filesystem::path& path, const FeatureSequence& seq) {
    seq.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(kFseqMagic, 5);
    detail::put_u32(out, seq.n);
    detail::put_u32(out, seq.d);
    detail::put_u32(out, seq.label);
    detail::put_u32(out, static_cast<std::uint32_t>(seq.id.size()));
    out.write(seq.id.data(), static_cast<std::streamsize>(seq.id.size()));
    for (float v : seq.frames) detail::put_f32(out, v);
    if (!out) throw IoError("write failed: " + path.string());

    if (seq.has_segments()) {
        std::ofstream side(path.string() + ".segmap");
        if (!side) throw IoError("cannot open for writing: " + path.string() + ".segmap");
        side << "SEGMAP1 " << seq.n << "\n";
        for (const auto& s : seq.segment_map)
            side << s.subactivity << " " << (s.discriminative ? 1 : 0) << "\n";
    }
}

inline FeatureSequence read_fseq(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kFseqMagic, 5) != 0)
        throw FormatError("bad magic in " + path.string());

    FeatureSequence seq;
    seq.n = detail::get_u32(in);
    seq.d = detail::get_u32(in);
    seq.label = detail::get_u32(in);
    std::uint32_t id_len = detail::get_u32(in);
    if (static_cast<std::uint64_t>(seq.n) * seq.d > (std::uint64_t{1} << 31))
        throw FormatError("dimension overflow in " + path.string());
    seq.id.resize(id_len);
    in.read(seq.id.data(), id_len);
    if (!in) throw FormatError("truncated payload in " + path.string());
    seq.frames.resize(static_cast<std::size_t>(seq.n) * seq.d);
    for (auto& v : seq.frames) v = detail::get_f32(in);
    seq.validate();

    std::filesystem::path side = path.string() + ".segmap";
    if (std::filesystem::exists(side)) {
        std::ifstream sin(side);
        std::string tag;
        std::size_t count = 0;
        sin >> tag >> count;
        if (tag != "SEGMAP1" || count != seq.n)
            throw FormatError("bad segment sidecar for " + path.string());
        seq.segment_map.resize(count);
        for (auto& s : seq.segment_map) {
            int flag = 0;
            sin >> s.subactivity >> flag;
            s.discriminative = flag != 0;
        }
        if (!sin) throw FormatError("truncated segment sidecar for " + path.string());
    }
    return seq;
}

// Dataset directory layout: flat folder of .fseq files plus manifest.txt with
// one "<id>\t<label>\t<train|test>\t<filename>" line per sequence.
inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw IoError("cannot open manifest for writing in " + dir.string());
    auto dump = [&](const std::vector<FeatureSequence>& seqs, const char* split) {
        for (const auto& seq : seqs) {
            std::string fname = seq.id + ".fseq";
            write_fseq(dir / fname, seq);
            manifest << seq.id << "\t" << seq.label << "\t" << split << "\t" << fname << "\n";
        }
    };
    dump(ds.train, "train");
    dump(ds.test, "test");
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "manifest.txt");
    if (!manifest) throw IoError("cannot open manifest in " + dir.string());
    Dataset ds;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream in(line);
        std::string id, label, split, fname;
        if (!std::getline(in, id, '\t') || !std::getline(in, label, '\t') ||
            !std::getline(in, split, '\t') || !std::getline(in, fname, '\t'))
            throw FormatError("bad manifest line: " + line);
        FeatureSequence seq = read_fseq(dir / fname);
        if (split == "train")
            ds.train.push_back(std::move(seq));
        else if (split == "test")
            ds.test.push_back(std::move(seq));
        else
            throw FormatError("bad split in manifest: " + split);
    }
    if (ds.train.empty() && ds.test.empty()) throw FormatError("empty manifest in " + dir.string());
    return ds;
}

inline std::size_t dataset_n_classes(const Dataset& ds) {
    std::uint32_t max_label = 0;
    for (const auto& s : ds.train) max_label = std::max(max_label, s.label);
    for (const auto& s : ds.test) max_label = std::max(max_label, s.label);
    return max_label + 1;
}

inline std::size_t dataset_dim(const Dataset& ds) {
    if (!ds.train.empty()) return ds.train.front().d;
    if (!ds.test.empty()) return ds.test.front().d;
    throw ShapeError("empty dataset");
}

} // namespace framesel
