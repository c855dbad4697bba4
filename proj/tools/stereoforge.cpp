#include "stereoforge/error.hpp"
#include "stereoforge/log.hpp"
#include "stereoforge/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

using namespace stereoforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
}

struct BackendFlags {
    std::string diarizer, separator, verifier;
    std::optional<double> timeout_s;

    void add(CLI::App* cmd) {
        cmd->add_option("--diarizer", diarizer, "builtin:<name> or external:<command>");
        cmd->add_option("--separator", separator, "builtin:<name> or external:<command>");
        cmd->add_option("--verifier", verifier, "builtin:<name> or external:<command>");
        cmd->add_option("--timeout-s", timeout_s, "per-request timeout for external backends");
    }
    void apply(BackendOptions& o) const {
        if (!diarizer.empty()) o.diarizer = BackendDescriptor::parse(BackendKind::Diarizer, diarizer);
        if (!separator.empty()) o.separator = BackendDescriptor::parse(BackendKind::Separator, separator);
        if (!verifier.empty()) o.verifier = BackendDescriptor::parse(BackendKind::Verifier, verifier);
        if (timeout_s) o.request_timeout = std::chrono::milliseconds(int64_t(*timeout_s * 1000.0));
    }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stereoforge: pseudo-stereo dialogue from single-channel recordings"};
    app.require_subcommand(1);
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");
    app.add_flag("-q,--quiet", quiet, "warnings and errors only");

    // generate
    auto* gen = app.add_subcommand("generate", "diarize, window, separate and assemble stereo dialogue");
    std::string gen_input, gen_out, gen_config;
    double min_window_s = 30.0, max_window_s = 120.0;
    std::optional<uint64_t> gen_seed;
    std::optional<int> gen_workers, gen_pool;
    BackendFlags gen_backends;
    gen->add_option("--input", gen_input, "directory of mono WAVs, .jsonl manifest, or path list")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--config", gen_config, "JSON config file; flags override it");
    auto* min_opt = gen->add_option("--min-window-s", min_window_s, "shortest window")->capture_default_str();
    auto* max_opt = gen->add_option("--max-window-s", max_window_s, "longest window")->capture_default_str();
    gen->add_option("--seed", gen_seed, "base seed");
    gen->add_option("--workers", gen_workers, "concurrent recordings (default: CPU count)");
    gen->add_option("--backend-pool", gen_pool, "worker cap when external backends are used");
    gen_backends.add(gen);

    // stats
    auto* stats = app.add_subcommand("stats", "turn-taking statistics of stereo dialogue");
    std::vector<std::string> stats_inputs;
    std::string stats_out, stats_ref, stats_vad;
    bool stats_json = false;
    stats->add_option("--input", stats_inputs, "stereo WAVs, directories, or a generate manifest")->required();
    stats->add_option("--reference", stats_ref, "named reference for deltas (fisher-table1)");
    stats->add_option("--vad", stats_vad, "JSON file with VAD parameters");
    stats->add_option("--out", stats_out, "directory for stats.json and stats.txt");
    stats->add_flag("--json", stats_json, "print the JSON report instead of the table");

    // split
    auto* split = app.add_subcommand("split", "seeded train/eval split of a manifest");
    std::string split_input, split_out;
    SplitSpec split_spec;
    split->add_option("--input", split_input, "manifest.jsonl")->required();
    split->add_option("--out", split_out, "output directory (default: next to the manifest)");
    split->add_option("--eval-fraction", split_spec.eval_fraction, "fraction of ok records held out")->capture_default_str();
    split->add_option("--seed", split_spec.seed, "split seed")->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic two-speaker corpus");
    std::string synth_out, synth_script;
    int synth_count = 1;
    std::optional<uint64_t> synth_seed;
    std::optional<double> synth_duration, synth_overlap;
    synth->add_option("--out", synth_out, "corpus directory")->required();
    synth->add_option("--count", synth_count, "number of dialogues")->capture_default_str();
    synth->add_option("--script", synth_script, "JSON dialogue script");
    synth->add_option("--seed", synth_seed, "base seed");
    synth->add_option("--duration-s", synth_duration, "dialogue length");
    synth->add_option("--overlap-prob", synth_overlap, "target overlap fraction of speech time");

    // backends check
    auto* backends = app.add_subcommand("backends", "backend utilities");
    backends->require_subcommand(1);
    auto* check = backends->add_subcommand("check", "run the backend contract suite");
    BackendFlags check_backends_flags;
    std::vector<std::string> check_kinds;
    check_backends_flags.add(check);
    check->add_option("--kind", check_kinds, "diarizer, separator or verifier (default: all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    log::set_level(verbose ? log::Level::Debug : quiet ? log::Level::Warn : log::Level::Info);

    try {
        if (*gen) {
            PipelineConfig config;
            if (!gen_config.empty()) config.apply(read_json_file(gen_config));
            json overrides = json::object();
            if (min_opt->count() || gen_config.empty()) overrides["min_window_s"] = min_window_s;
            if (max_opt->count() || gen_config.empty()) overrides["max_window_s"] = max_window_s;
            if (gen_seed) overrides["seed"] = *gen_seed;
            if (gen_workers) overrides["workers"] = *gen_workers;
            if (gen_pool) overrides["backend_pool"] = *gen_pool;
            config.apply(overrides);
            gen_backends.apply(config.backends);

            const auto summary = run_generate(gen_input, gen_out, config);
            std::printf("recordings %zu, windows ok %zu, skipped %zu, output %.6f h\n", summary.recordings,
                        summary.windows_ok, summary.records_skipped, summary.output_hours);
            return summary.partial() ? 2 : 0;
        }
        if (*stats) {
            StatsOptions opts;
            opts.reference = stats_ref;
            if (!stats_vad.empty()) opts.vad = read_json_file(stats_vad).get<VadParams>();
            std::vector<fs::path> inputs(stats_inputs.begin(), stats_inputs.end());
            const auto result = run_stats(inputs, opts);
            const auto report = report_json(result, opts.vad);
            if (!stats_out.empty()) {
                fs::create_directories(stats_out);
                write_text(fs::path(stats_out) / "stats.json", report.dump(2) + "\n");
                write_text(fs::path(stats_out) / "stats.txt", report_text(result));
            }
            if (stats_json) std::cout << report.dump(2) << '\n';
            else std::cout << report_text(result);
            return 0;
        }
        if (*split) {
            const fs::path manifest = split_input;
            const fs::path out = split_out.empty() ? manifest.parent_path() : fs::path(split_out);
            const auto r = run_split(manifest, out.empty() ? fs::path(".") : out, split_spec);
            std::printf("train %zu, eval %zu\n", r.train.size(), r.eval.size());
            return 0;
        }
        if (*synth) {
            DialogueScript script;
            if (!synth_script.empty()) script = read_json_file(synth_script).get<DialogueScript>();
            if (synth_seed) script.seed = *synth_seed;
            if (synth_duration) script.duration_s = *synth_duration;
            if (synth_overlap) script.overlap_prob = *synth_overlap;
            const auto ids = run_synth(script, synth_count, synth_out);
            std::printf("wrote %zu dialogues to %s\n", ids.size(), synth_out.c_str());
            return 0;
        }
        if (*check) {
            BackendOptions opts;
            check_backends_flags.apply(opts);
            std::vector<BackendKind> kinds;
            for (const auto& k : check_kinds) kinds.push_back(parse_backend_kind(k));
            if (kinds.empty()) {
                if (!check_backends_flags.diarizer.empty()) kinds.push_back(BackendKind::Diarizer);
                if (!check_backends_flags.separator.empty()) kinds.push_back(BackendKind::Separator);
                if (!check_backends_flags.verifier.empty()) kinds.push_back(BackendKind::Verifier);
                if (kinds.empty()) kinds = {BackendKind::Diarizer, BackendKind::Separator, BackendKind::Verifier};
            }
            bool all = true;
            for (const auto& r : check_backends(opts, kinds)) {
                std::printf("%s  %-28s %-24s %s\n", r.passed ? "PASS" : "FAIL", r.backend.c_str(), r.contract.c_str(),
                            r.detail.c_str());
                all = all && r.passed;
            }
            return all ? 0 : 2;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "stereoforge: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "stereoforge: %s\n", e.what());
        return 1;
    }
    return 0;
}
