// framesel: frame-selection + event-recognition pipelines over frame-feature
// sequences, with rhythm-perturbation evaluation and a synthetic benchmark.
//
// Subcommands: generate, train, eval, resample, gradcheck, sweep, trace.
// Exit codes: 0 success, 1 CLI usage, 2 config, 3 I/O, 4 format, 5 shape,
// 6 numeric/divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "framesel/framesel.hpp"
#include "framesel/verify.hpp"

using namespace framesel;

namespace {

// Every config key becomes a CLI override flag of the same name; overrides are
// applied on top of --config.
struct ConfigCli {
    std::vector<std::string> config_files;
    std::vector<std::pair<std::string, std::string>> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_files, "config file(s), key=value lines")
            ->check(CLI::ExistingFile);
        for (const auto& key : ExperimentConfig::key_names()) {
            cmd->add_option_function<std::string>(
                "--" + key,
                [this, key](const std::string& value) { overrides.emplace_back(key, value); },
                "override config key " + key);
        }
    }

    ExperimentConfig resolve() const {
        ExperimentConfig cfg;
        for (const auto& file : config_files) cfg.load_file(file);
        for (const auto& [key, value] : overrides) cfg.set(key, value);
        return cfg;
    }
};

SyntheticSpec synthetic_spec(const ExperimentConfig& cfg) {
    SyntheticSpec spec;
    spec.n_classes = cfg.gen_classes;
    spec.n_subactivities = cfg.gen_subactivities;
    spec.disc_per_class = cfg.gen_disc_per_class;
    spec.segments_per_seq = cfg.gen_segments;
    spec.dur_min = cfg.gen_dur_min;
    spec.dur_max = cfg.gen_dur_max;
    spec.dim = cfg.gen_dim;
    spec.noise = cfg.gen_noise;
    spec.separation = cfg.gen_separation;
    spec.confusable_cos = cfg.gen_confusable_cos;
    spec.noise_smooth = cfg.gen_noise_smooth;
    spec.n_train = cfg.gen_train;
    spec.n_test = cfg.gen_test;
    return spec;
}

void resolve_geometry(ExperimentConfig& cfg, const Dataset& ds) {
    std::size_t classes = dataset_n_classes(ds);
    std::size_t dim = dataset_dim(ds);
    if (cfg.n_classes == 0) cfg.n_classes = classes;
    if (cfg.dim == 0) cfg.dim = dim;
    if (cfg.n_classes < classes)
        throw ConfigError("dataset has " + std::to_string(classes) + " classes, config says " +
                          std::to_string(cfg.n_classes));
    if (cfg.dim != dim)
        throw ShapeError("dataset dimension " + std::to_string(dim) + " != config dim " +
                         std::to_string(cfg.dim));
}

std::vector<double> parse_value_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        if (part.empty()) continue;
        try {
            out.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw ConfigError("bad value in list: " + part);
        }
    }
    return out;
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"frame selection + event recognition over feature sequences"};
    app.require_subcommand(1);

    // --- generate ---
    auto* generate_cmd = app.add_subcommand("generate", "generate a synthetic dataset directory");
    ConfigCli generate_cfg;
    generate_cfg.attach(generate_cmd);
    std::string generate_out;
    generate_cmd->add_option("--out", generate_out, "output dataset directory")->required();

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    ConfigCli train_cfg;
    train_cfg.attach(train_cmd);
    std::string train_out = "model.fscp";
    std::string train_log_path;
    train_cmd->add_option("--out", train_out, "output checkpoint path");
    train_cmd->add_option("--log", train_log_path, "also write the per-epoch log to this file");

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint under rhythm scenarios");
    std::string eval_ckpt, eval_data, eval_scenarios, eval_out;
    std::optional<std::uint64_t> eval_seed;
    std::optional<std::size_t> eval_repeats;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "trained checkpoint")->required();
    eval_cmd->add_option("--data", eval_data, "dataset directory (test split is used)");
    eval_cmd->add_option("--scenarios", eval_scenarios, "comma list, e.g. original,s1,s2,s3");
    eval_cmd->add_option("--seed", eval_seed, "seed for S3 subsampling (default: training seed)");
    eval_cmd->add_option("--s3_repeats", eval_repeats, "S3 repeat count");
    eval_cmd->add_option("--out", eval_out, "write metrics here instead of stdout");

    // --- resample ---
    auto* resample_cmd =
        app.add_subcommand("resample", "apply a rhythm scenario to a dataset, for inspection");
    std::string resample_data, resample_scenario = "s1", resample_out;
    std::uint64_t resample_seed = 0;
    resample_cmd->add_option("--data", resample_data, "input dataset directory")->required();
    resample_cmd->add_option("--scenario", resample_scenario, "original|s1|s2|s3|custom:a,b,c");
    resample_cmd->add_option("--seed", resample_seed, "seed (S3 only)");
    resample_cmd->add_option("--out", resample_out, "output dataset directory")->required();

    // --- gradcheck ---
    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "run the 64-bit gradient verification suite");
    std::size_t gradcheck_seeds = 20;
    gradcheck_cmd->add_option("--seeds", gradcheck_seeds, "number of random instances per check");

    // --- sweep ---
    auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate across m_R values");
    ConfigCli sweep_cfg;
    sweep_cfg.attach(sweep_cmd);
    std::string sweep_values = "0.1,0.25,0.5";
    std::string sweep_out;
    sweep_cmd->add_option("--values", sweep_values, "comma list of m_R values");
    sweep_cmd->add_option("--out", sweep_out, "write the sweep table here instead of stdout");

    // --- trace ---
    auto* trace_cmd = app.add_subcommand("trace", "export per-sequence selection traces");
    std::string trace_ckpt, trace_data, trace_out;
    trace_cmd->add_option("--checkpoint", trace_ckpt, "trained checkpoint")->required();
    trace_cmd->add_option("--data", trace_data, "dataset directory (test split is used)");
    trace_cmd->add_option("--out", trace_out, "output trace file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate_cmd) {
            ExperimentConfig cfg = generate_cfg.resolve();
            if (!cfg.seed_set) throw ConfigError("--seed is required for generate");
            Dataset ds = generate_dataset(synthetic_spec(cfg), cfg.seed);
            write_dataset(generate_out, ds);
            std::cout << "wrote " << ds.train.size() << " train / " << ds.test.size()
                      << " test sequences to " << generate_out << "\n";
        } else if (*train_cmd) {
            ExperimentConfig cfg = train_cfg.resolve();
            cfg.validate_for_train();
            Dataset ds = read_dataset(cfg.data);
            resolve_geometry(cfg, ds);

            Pipeline<float> pipeline = build_pipeline<float>(cfg);
            TrainLog log;
            if (!train_log_path.empty()) {
                std::ostringstream buffer;
                log = train(pipeline, ds, &buffer, train_out + ".dump");
                std::cout << buffer.str();
                std::ofstream log_file(train_log_path);
                if (!log_file) throw IoError("cannot open log file: " + train_log_path);
                log_file << buffer.str();
            } else {
                log = train(pipeline, ds, &std::cout, train_out + ".dump");
            }
            save_checkpoint(train_out, make_checkpoint(pipeline));
            std::cout << "trained " << cfg.variant << " for " << log.epochs.size() << " epochs"
                      << (log.early_stopped ? " (early stop)" : "") << "; checkpoint: " << train_out
                      << "\n";
        } else if (*eval_cmd) {
            Pipeline<float> pipeline = pipeline_from_checkpoint(load_checkpoint(eval_ckpt));
            std::string data_dir = eval_data.empty() ? pipeline.cfg.data : eval_data;
            if (data_dir.empty()) throw ConfigError("no dataset: give --data");
            Dataset ds = read_dataset(data_dir);
            if (dataset_dim(ds) != pipeline.cfg.dim)
                throw ShapeError("checkpoint dimension " + std::to_string(pipeline.cfg.dim) +
                                 " does not match dataset");
            std::string scen = eval_scenarios.empty() ? pipeline.cfg.scenarios : eval_scenarios;
            std::size_t repeats = eval_repeats.value_or(pipeline.cfg.s3_repeats);
            std::uint64_t seed = eval_seed.value_or(pipeline.cfg.seed);
            MetricsTable table = evaluate(pipeline, ds.test, parse_scenarios(scen, repeats), seed);
            write_or_print(eval_out, table.human_table() + table.machine_records());
        } else if (*resample_cmd) {
            ScenarioSpec scenario = ScenarioSpec::parse(resample_scenario);
            Dataset ds = read_dataset(resample_data);
            Dataset out;
            for (const auto& seq : ds.train)
                out.train.push_back(resample(seq, scenario, resample_seed));
            for (const auto& seq : ds.test)
                out.test.push_back(resample(seq, scenario, resample_seed));
            write_dataset(resample_out, out);
            std::cout << "resampled " << (out.train.size() + out.test.size()) << " sequences under "
                      << scenario.name() << " into " << resample_out << "\n";
        } else if (*gradcheck_cmd) {
            VerifyResult result = run_gradcheck_suite(&std::cout, gradcheck_seeds);
            if (!result.all_pass) return static_cast<int>(ErrorCategory::numeric);
        } else if (*sweep_cmd) {
            ExperimentConfig cfg = sweep_cfg.resolve();
            cfg.validate_for_train();
            Dataset ds = read_dataset(cfg.data);
            resolve_geometry(cfg, ds);
            auto rows = sweep_mr(cfg, parse_value_list(sweep_values), ds, &std::cout);
            write_or_print(sweep_out, sweep_table(rows));
        } else if (*trace_cmd) {
            Pipeline<float> pipeline = pipeline_from_checkpoint(load_checkpoint(trace_ckpt));
            std::string data_dir = trace_data.empty() ? pipeline.cfg.data : trace_data;
            if (data_dir.empty()) throw ConfigError("no dataset: give --data");
            Dataset ds = read_dataset(data_dir);
            std::ofstream out(trace_out);
            if (!out) throw IoError("cannot open trace file: " + trace_out);
            export_traces(pipeline, ds.test, out);
            std::cout << "wrote " << ds.test.size() << " traces to " << trace_out << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
