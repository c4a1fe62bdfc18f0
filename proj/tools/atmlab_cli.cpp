// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "atmlab/ablation.hpp"
#include "atmlab/config.hpp"
#include "atmlab/errors.hpp"
#include "atmlab/pipeline.hpp"
#include "atmlab/serialize.hpp"

namespace {

using namespace atmlab;

struct ConfigFlags {
    std::string config_path;
    std::string preset = "desk";
    std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
    cmd->add_option("--config", flags.config_path,
                    "configuration file (flat key = value lines)");
    cmd->add_option("--preset", flags.preset,
                    "baseline configuration: desk or paper-scale")
        ->capture_default_str();
    cmd->add_option("--set", flags.sets, "KEY=VALUE override (repeatable)");
}

// Precedence: preset, then config file, then --set overrides.
TrainConfig resolve_config(const ConfigFlags& flags) {
    TrainConfig cfg = preset_config(flags.preset);
    if (!flags.config_path.empty())
        cfg = parse_config(read_text(flags.config_path), cfg);
    for (const std::string& s : flags.sets) apply_override(cfg, s);
    cfg.validate();
    return cfg;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir + ": " +
                      ec.message());
}

bool parse_u64_strict(std::string_view v, std::uint64_t& out) {
    const char* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    return ec == std::errc{} && p == end;
}

std::size_t thread_cap() {
    const char* env = std::getenv("ATM_LAB_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    std::uint64_t n = 0;
    if (!parse_u64_strict(env, n) || n == 0)
        throw ConfigError(
            std::string("ATM_LAB_THREADS must be a positive integer, got '") +
            env + "'");
    return static_cast<std::size_t>(n);
}

// "1..5" (inclusive range) or "1,2,3".
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    const std::size_t dots = text.find("..");
    if (dots != std::string::npos) {
        std::uint64_t lo = 0, hi = 0;
        if (!parse_u64_strict(std::string_view(text).substr(0, dots), lo) ||
            !parse_u64_strict(std::string_view(text).substr(dots + 2), hi) ||
            lo > hi)
            throw ConfigError("bad seed range '" + text + "'");
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    std::string_view rest = text;
    while (!rest.empty()) {
        const std::size_t comma = rest.find(',');
        const std::string_view field =
            comma == std::string_view::npos ? rest : rest.substr(0, comma);
        std::uint64_t s = 0;
        if (!parse_u64_strict(field, s))
            throw ConfigError("bad seed '" + std::string(field) + "' in '" +
                              text + "'");
        seeds.push_back(s);
        rest.remove_prefix(comma == std::string_view::npos ? rest.size()
                                                           : comma + 1);
    }
    if (seeds.empty()) throw ConfigError("empty seed list");
    return seeds;
}

std::vector<AblationArm> parse_arm_list(const std::string& text) {
    std::vector<AblationArm> arms;
    std::string_view rest = text;
    while (!rest.empty()) {
        const std::size_t comma = rest.find(',');
        const std::string_view field =
            comma == std::string_view::npos ? rest : rest.substr(0, comma);
        arms.push_back(parse_arm(field));
        rest.remove_prefix(comma == std::string_view::npos ? rest.size()
                                                           : comma + 1);
    }
    if (arms.empty()) throw ConfigError("empty arm list");
    return arms;
}

std::vector<double> parse_csv_doubles(const std::string& text) {
    std::vector<double> out;
    std::string_view rest = text;
    while (!rest.empty()) {
        const std::size_t comma = rest.find(',');
        const std::string_view field =
            comma == std::string_view::npos ? rest : rest.substr(0, comma);
        double v = 0.0;
        const char* end = field.data() + field.size();
        const auto [p, ec] = std::from_chars(field.data(), end, v);
        if (ec != std::errc{} || p != end)
            throw ConfigError("bad number '" + std::string(field) +
                              "' in input vector");
        out.push_back(v);
        rest.remove_prefix(comma == std::string_view::npos ? rest.size()
                                                           : comma + 1);
    }
    return out;
}

int cmd_train(const ConfigFlags& flags, const std::string& out_dir) {
    const TrainConfig cfg = resolve_config(flags);
    ensure_out_dir(out_dir);

    using clock = std::chrono::steady_clock;
    TrainState state = init_state(cfg);
    const auto t0 = clock::now();
    stage1_train(state);
    const auto t1 = clock::now();
    stage2_train(state);
    const auto t2 = clock::now();
    stage3_train(state);
    const auto t3 = clock::now();

    const std::vector<SynthSample> eval = eval_samples(state);
    const auto [sep_raw, sep_retrieved] = separation_ratios(state, eval);
    const MetricReport metrics{
        .gate_accuracy = gate_accuracy(state, eval),
        .separation_ratio_raw = sep_raw,
        .separation_ratio_retrieved = sep_retrieved,
        .final_loss = final_loss(state),
        .struc_sim_value = structure_similarity(state, eval),
    };

    const auto secs = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };
    const RunReport report{
        .config = cfg,
        .arm = state.arm,
        .stage1_losses = state.stage1_losses,
        .stage2_losses = state.stage2_losses,
        .stage3_losses = state.stage3_losses,
        .metrics = metrics,
        .stage1_seconds = secs(t0, t1),
        .stage2_seconds = secs(t1, t2),
        .stage3_seconds = secs(t2, t3),
    };
    write_text_atomic(out_dir + "/report.txt", render_report(report));
    write_text_atomic(out_dir + "/resolved.cfg", serialize_config(cfg));
    save_checkpoint(state, out_dir + "/checkpoint.atm");

    std::cout << "gate_accuracy " << metrics.gate_accuracy << "\n"
              << "separation_ratio_raw " << sep_raw << "\n"
              << "separation_ratio_retrieved " << sep_retrieved << "\n"
              << "final_loss " << metrics.final_loss << "\n"
              << "struc_sim " << metrics.struc_sim_value << "\n"
              << "wrote " << out_dir << "/report.txt, resolved.cfg, "
              << "checkpoint.atm\n";
    return 0;
}

int cmd_ablate(const ConfigFlags& flags, const std::string& arms_text,
               const std::string& seeds_text, const std::string& out_dir) {
    const TrainConfig base = resolve_config(flags);
    const std::vector<AblationArm> arms = parse_arm_list(arms_text);
    const std::vector<std::uint64_t> seeds =
        seeds_text.empty() ? std::vector<std::uint64_t>{base.seed}
                           : parse_seed_list(seeds_text);
    ensure_out_dir(out_dir);

    std::vector<AblationRow> rows(arms.size() * seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= rows.size()) return;
            try {
                TrainConfig cfg = base;
                cfg.seed = seeds[i % seeds.size()];
                const AblationArm arm = arms[i / seeds.size()];
                rows[i] = AblationRow{arm, cfg.seed, run_ablation(cfg, arm)};
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const std::size_t workers =
        std::min(thread_cap(), rows.size() == 0 ? std::size_t{1} : rows.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    const std::string path = out_dir + "/ablation.csv";
    write_text_atomic(path, render_ablation_csv(rows));
    std::cout << "wrote " << path << " (" << rows.size() << " rows)\n";
    return 0;
}

int cmd_export(const std::string& checkpoint, const std::string& what,
               const std::string& out_dir) {
    const TrainState state = load_checkpoint(checkpoint);
    ensure_out_dir(out_dir);
    if (what == "memory") {
        export_memory_csv(state.bank, out_dir);
        std::cout << "wrote " << state.bank.items.size()
                  << " memory item files under " << out_dir << "\n";
        return 0;
    }
    if (what == "projection") {
        const std::string path = out_dir + "/projection.csv";
        write_text_atomic(path, render_projection_csv(state));
        std::cout << "wrote " << path << "\n";
        return 0;
    }
    throw ConfigError("unknown export kind '" + what +
                      "'; valid kinds: memory, projection");
}

int cmd_infer(const std::string& checkpoint, const std::string& input,
              std::int64_t task) {
    const TrainState state = load_checkpoint(checkpoint);
    const std::vector<double> values = parse_csv_doubles(input);
    if (values.size() != state.config.dims.d)
        throw ConfigError("input vector has " + std::to_string(values.size()) +
                          " values, config expects dims.d = " +
                          std::to_string(state.config.dims.d));
    Matrix x(1, values.size());
    for (std::size_t j = 0; j < values.size(); ++j) x.at(0, j) = values[j];

    std::optional<std::size_t> label;
    if (task >= 0) {
        if (static_cast<std::size_t>(task) >= state.config.dims.n)
            throw ConfigError("task index " + std::to_string(task) +
                              " out of range (dims.n = " +
                              std::to_string(state.config.dims.n) + ")");
        label = static_cast<std::size_t>(task);
    }
    const Matrix y = infer(state, x, label);
    for (std::size_t j = 0; j < y.cols(); ++j) {
        if (j != 0) std::cout << ',';
        std::cout << y.at(0, j);
    }
    std::cout << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive task memory trainer"};
    app.require_subcommand(1);

    ConfigFlags train_flags;
    std::string train_out = ".";
    CLI::App* train = app.add_subcommand(
        "train", "run the three-stage schedule; write report and checkpoint");
    add_config_flags(train, train_flags);
    train->add_option("--out", train_out, "output directory")
        ->capture_default_str();

    ConfigFlags ablate_flags;
    std::string ablate_out = ".";
    std::string arms_text =
        "full,no_memory,no_gate,no_queries,no_details";
    std::string seeds_text;
    CLI::App* ablate = app.add_subcommand(
        "ablate", "train each arm x seed and write one CSV row per run");
    add_config_flags(ablate, ablate_flags);
    ablate->add_option("--arms", arms_text, "comma-separated arm names")
        ->capture_default_str();
    ablate->add_option("--seeds", seeds_text,
                       "seed list: 1,2,3 or 1..5 (default: config seed)");
    ablate->add_option("--out", ablate_out, "output directory")
        ->capture_default_str();

    std::string export_ckpt, export_what, export_out = ".";
    CLI::App* exp = app.add_subcommand(
        "export", "dump memory CSVs or the 2-D projection from a checkpoint");
    exp->add_option("--checkpoint", export_ckpt, "checkpoint file")
        ->required();
    exp->add_option("--what", export_what, "memory or projection")
        ->required();
    exp->add_option("--out", export_out, "output directory")
        ->capture_default_str();

    std::string infer_ckpt, infer_input;
    std::int64_t infer_task = -1;
    CLI::App* inf = app.add_subcommand(
        "infer", "run one condition vector through a trained checkpoint");
    inf->add_option("--checkpoint", infer_ckpt, "checkpoint file")
        ->required();
    inf->add_option("--input", infer_input,
                    "comma-separated condition vector (dims.d values)")
        ->required();
    inf->add_option("--task", infer_task,
                    "teacher-forced task index (default: gate routing)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // help
        app.exit(e);
        return 2;  // malformed usage is a configuration error
    }

    try {
        if (train->parsed()) return cmd_train(train_flags, train_out);
        if (ablate->parsed())
            return cmd_ablate(ablate_flags, arms_text, seeds_text,
                              ablate_out);
        if (exp->parsed()) return cmd_export(export_ckpt, export_what,
                                             export_out);
        if (inf->parsed()) return cmd_infer(infer_ckpt, infer_input,
                                            infer_task);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
