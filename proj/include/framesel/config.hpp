#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "framesel/errors.hpp"

namespace framesel {

enum class ModelVariant { baseline, rnn_plus, srnn_plus, rl_plus };

inline ModelVariant parse_variant(const std::string& s) {
    if (s == "baseline") return ModelVariant::baseline;
    if (s == "rnn_plus") return ModelVariant::rnn_plus;
    if (s == "srnn_plus") return ModelVariant::srnn_plus;
    if (s == "rl_plus") return ModelVariant::rl_plus;
    throw ConfigError("unknown variant: " + s);
}

inline std::string variant_name(ModelVariant v) {
    switch (v) {
        case ModelVariant::baseline: return "baseline";
        case ModelVariant::rnn_plus: return "rnn_plus";
        case ModelVariant::srnn_plus: return "srnn_plus";
        case ModelVariant::rl_plus: return "rl_plus";
    }
    return "?";
}

// Flat experiment configuration. Serialized as "key=value" lines; every key
// doubles as a CLI override flag of the same name. Paper-reported defaults
// (architecture sizes, lr, m_R, lambda, gamma) are the field defaults; desk
// presets override them in their config files.
struct ExperimentConfig {
    std::string variant = "baseline";
    std::string data;
    std::uint64_t seed = 0;
    bool seed_set = false;

    std::string cls_cell = "gru";
    std::size_t cls_hidden = 1024;
    std::size_t cls_fc = 100;
    std::size_t sel_hidden = 250;
    std::size_t sel_fc1 = 50;
    double sel_keep_bias = 2.2;

    double m_r = 0.25;
    double lambda = 4.0;
    double gamma = 1.0;

    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    std::size_t epochs = 100;
    std::size_t accum = 8;
    std::size_t patience = 20; // epochs without validation improvement; 0 disables
    double val_fraction = 0.15;

    std::string scenarios = "original,s1,s2,s3";
    std::size_t s3_repeats = 5;

    std::size_t train_stride = 1;
    std::size_t train_trim = 0;

    std::size_t warmup_epochs = 5;
    std::size_t anneal_epochs = 10;
    bool rl_baseline = false; // optional moving-average reward baseline

    bool keep_all = false; // pin every keep probability to 1 (selector variants)
    std::size_t u_clip_tmax = 1024;

    // dataset geometry; 0 means "derive from the dataset", echoed resolved
    std::size_t n_classes = 0;
    std::size_t dim = 0;

    // synthetic generator knobs
    std::size_t gen_classes = 6;
    std::size_t gen_subactivities = 14;
    std::size_t gen_disc_per_class = 1;
    std::size_t gen_segments = 5;
    std::size_t gen_dur_min = 10;
    std::size_t gen_dur_max = 40;
    std::size_t gen_dim = 32;
    double gen_noise = 0.5;
    double gen_separation = 1.0;
    double gen_confusable_cos = 0.0;
    double gen_noise_smooth = 0.0;
    std::size_t gen_train = 200;
    std::size_t gen_test = 100;

    static const std::vector<std::string>& key_names() {
        static const std::vector<std::string> names = {
            "variant",       "data",          "seed",           "cls_cell",
            "cls_hidden",    "cls_fc",        "sel_hidden",     "sel_fc1",
            "sel_keep_bias",
            "m_r",           "lambda",        "gamma",          "lr",
            "beta1",         "beta2",         "adam_eps",       "epochs",
            "accum",         "patience",      "val_fraction",   "scenarios",
            "s3_repeats",    "train_stride",  "train_trim",     "warmup_epochs",
            "anneal_epochs", "rl_baseline",   "keep_all",       "u_clip_tmax",
            "n_classes",     "dim",           "gen_classes",    "gen_subactivities",
            "gen_disc_per_class", "gen_segments", "gen_dur_min", "gen_dur_max",
            "gen_dim",       "gen_noise",     "gen_separation", "gen_confusable_cos",
            "gen_noise_smooth", "gen_train",    "gen_test",
        };
        return names;
    }

    void set(const std::string& key, const std::string& value) {
        auto u64 = [&] {
            try {
                return std::stoull(value);
            } catch (const std::exception&) {
                throw ConfigError("bad integer for " + key + ": " + value);
            }
        };
        auto dbl = [&] {
            try {
                return std::stod(value);
            } catch (const std::exception&) {
                throw ConfigError("bad number for " + key + ": " + value);
            }
        };
        auto flag = [&]() -> bool {
            if (value == "1" || value == "true") return true;
            if (value == "0" || value == "false") return false;
            throw ConfigError("bad flag for " + key + ": " + value);
        };

        if (key == "variant") variant = value;
        else if (key == "data") data = value;
        else if (key == "seed") { seed = u64(); seed_set = true; }
        else if (key == "cls_cell") cls_cell = value;
        else if (key == "cls_hidden") cls_hidden = u64();
        else if (key == "cls_fc") cls_fc = u64();
        else if (key == "sel_hidden") sel_hidden = u64();
        else if (key == "sel_fc1") sel_fc1 = u64();
        else if (key == "sel_keep_bias") sel_keep_bias = dbl();
        else if (key == "m_r") m_r = dbl();
        else if (key == "lambda") lambda = dbl();
        else if (key == "gamma") gamma = dbl();
        else if (key == "lr") lr = dbl();
        else if (key == "beta1") beta1 = dbl();
        else if (key == "beta2") beta2 = dbl();
        else if (key == "adam_eps") adam_eps = dbl();
        else if (key == "epochs") epochs = u64();
        else if (key == "accum") accum = u64();
        else if (key == "patience") patience = u64();
        else if (key == "val_fraction") val_fraction = dbl();
        else if (key == "scenarios") scenarios = value;
        else if (key == "s3_repeats") s3_repeats = u64();
        else if (key == "train_stride") train_stride = u64();
        else if (key == "train_trim") train_trim = u64();
        else if (key == "warmup_epochs") warmup_epochs = u64();
        else if (key == "anneal_epochs") anneal_epochs = u64();
        else if (key == "rl_baseline") rl_baseline = flag();
        else if (key == "keep_all") keep_all = flag();
        else if (key == "u_clip_tmax") u_clip_tmax = u64();
        else if (key == "n_classes") n_classes = u64();
        else if (key == "dim") dim = u64();
        else if (key == "gen_classes") gen_classes = u64();
        else if (key == "gen_subactivities") gen_subactivities = u64();
        else if (key == "gen_disc_per_class") gen_disc_per_class = u64();
        else if (key == "gen_segments") gen_segments = u64();
        else if (key == "gen_dur_min") gen_dur_min = u64();
        else if (key == "gen_dur_max") gen_dur_max = u64();
        else if (key == "gen_dim") gen_dim = u64();
        else if (key == "gen_noise") gen_noise = dbl();
        else if (key == "gen_separation") gen_separation = dbl();
        else if (key == "gen_confusable_cos") gen_confusable_cos = dbl();
        else if (key == "gen_noise_smooth") gen_noise_smooth = dbl();
        else if (key == "gen_train") gen_train = u64();
        else if (key == "gen_test") gen_test = u64();
        else throw ConfigError("unknown config key: " + key);
    }

    std::string get(const std::string& key) const {
        auto num = [](double v) {
            std::ostringstream out;
            out.precision(17);
            out << v;
            return out.str();
        };
        if (key == "variant") return variant;
        if (key == "data") return data;
        if (key == "seed") return std::to_string(seed);
        if (key == "cls_cell") return cls_cell;
        if (key == "cls_hidden") return std::to_string(cls_hidden);
        if (key == "cls_fc") return std::to_string(cls_fc);
        if (key == "sel_hidden") return std::to_string(sel_hidden);
        if (key == "sel_fc1") return std::to_string(sel_fc1);
        if (key == "sel_keep_bias") return num(sel_keep_bias);
        if (key == "m_r") return num(m_r);
        if (key == "lambda") return num(lambda);
        if (key == "gamma") return num(gamma);
        if (key == "lr") return num(lr);
        if (key == "beta1") return num(beta1);
        if (key == "beta2") return num(beta2);
        if (key == "adam_eps") return num(adam_eps);
        if (key == "epochs") return std::to_string(epochs);
        if (key == "accum") return std::to_string(accum);
        if (key == "patience") return std::to_string(patience);
        if (key == "val_fraction") return num(val_fraction);
        if (key == "scenarios") return scenarios;
        if (key == "s3_repeats") return std::to_string(s3_repeats);
        if (key == "train_stride") return std::to_string(train_stride);
        if (key == "train_trim") return std::to_string(train_trim);
        if (key == "warmup_epochs") return std::to_string(warmup_epochs);
        if (key == "anneal_epochs") return std::to_string(anneal_epochs);
        if (key == "rl_baseline") return rl_baseline ? "1" : "0";
        if (key == "keep_all") return keep_all ? "1" : "0";
        if (key == "u_clip_tmax") return std::to_string(u_clip_tmax);
        if (key == "n_classes") return std::to_string(n_classes);
        if (key == "dim") return std::to_string(dim);
        if (key == "gen_classes") return std::to_string(gen_classes);
        if (key == "gen_subactivities") return std::to_string(gen_subactivities);
        if (key == "gen_disc_per_class") return std::to_string(gen_disc_per_class);
        if (key == "gen_segments") return std::to_string(gen_segments);
        if (key == "gen_dur_min") return std::to_string(gen_dur_min);
        if (key == "gen_dur_max") return std::to_string(gen_dur_max);
        if (key == "gen_dim") return std::to_string(gen_dim);
        if (key == "gen_noise") return num(gen_noise);
        if (key == "gen_separation") return num(gen_separation);
        if (key == "gen_confusable_cos") return num(gen_confusable_cos);
        if (key == "gen_noise_smooth") return num(gen_noise_smooth);
        if (key == "gen_train") return std::to_string(gen_train);
        if (key == "gen_test") return std::to_string(gen_test);
        throw ConfigError("unknown config key: " + key);
    }

    // Stable echo; embedded in checkpoints and logs.
    std::string to_text() const {
        std::ostringstream out;
        for (const auto& key : key_names()) out << key << "=" << get(key) << "\n";
        return out.str();
    }

    void load_text(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
                line.pop_back();
            std::size_t start = line.find_first_not_of(" \t");
            if (start == std::string::npos) continue;
            auto eq = line.find('=', start);
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + " has no '='");
            std::string key = line.substr(start, eq - start);
            while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
            std::string value = line.substr(eq + 1);
            std::size_t vstart = value.find_first_not_of(" \t");
            value = vstart == std::string::npos ? "" : value.substr(vstart);
            set(key, value);
        }
    }

    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config: " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        load_text(buf.str());
    }

    ModelVariant model_variant() const { return parse_variant(variant); }

    void validate_for_train() const {
        if (!seed_set) throw ConfigError("seed is required for training");
        if (data.empty()) throw ConfigError("data directory is required");
        if (!std::filesystem::exists(data)) throw ConfigError("data path does not exist: " + data);
        ModelVariant v = model_variant();
        if (keep_all && v != ModelVariant::rnn_plus && v != ModelVariant::srnn_plus)
            throw ConfigError("keep_all applies only to rnn_plus/srnn_plus");
        if (accum < 1) throw ConfigError("accum must be >= 1");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (val_fraction <= 0.0 || val_fraction >= 1.0)
            throw ConfigError("val_fraction must be in (0,1)");
        if (!(m_r > 0.0 && m_r < 1.0)) throw ConfigError("m_r must be in (0,1)");
        if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
        if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
    }
};

} // namespace framesel
