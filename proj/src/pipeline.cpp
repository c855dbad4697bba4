#include "stereoforge/pipeline.hpp"

#include "stereoforge/error.hpp"
#include "stereoforge/external.hpp"
#include "stereoforge/log.hpp"
#include "stereoforge/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <thread>

#include <unistd.h>

namespace stereoforge {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int64_t secs(double s) { return int64_t(std::llround(s * kCanonicalRate)); }
double to_s(int64_t samples) { return double(samples) / kCanonicalRate; }

std::chrono::milliseconds ms_from_s(double s) { return std::chrono::milliseconds(int64_t(std::llround(s * 1000.0))); }

} // namespace

void PipelineConfig::apply(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        auto num = [&] {
            if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, "config key '" + key + "' must be a number");
            return v.get<double>();
        };
        auto str = [&] {
            if (!v.is_string()) throw Error(ErrorCode::InvalidConfig, "config key '" + key + "' must be a string");
            return v.get<std::string>();
        };
        if (key == "min_window_s") timeline.min_len = secs(num());
        else if (key == "max_window_s") timeline.max_len = secs(num());
        else if (key == "cut_slack_s") timeline.cut_slack = secs(num());
        else if (key == "merge_gap_s") timeline.merge_gap = backends.merge_gap = secs(num());
        else if (key == "min_overlap_s") assembly.min_overlap = secs(num());
        else if (key == "ref_target_s") assembly.ref_target = secs(num());
        else if (key == "ref_min_s") assembly.ref_min = secs(num());
        else if (key == "verify_min_s") assembly.verify_min = secs(num());
        else if (key == "gain_min") assembly.gain_min = num();
        else if (key == "gain_max") assembly.gain_max = num();
        else if (key == "low_margin") assembly.low_margin = num();
        else if (key == "seed") {
            if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<int64_t>() < 0))
                throw Error(ErrorCode::InvalidConfig, "seed must be a non-negative integer");
            seed = v.get<uint64_t>();
        } else if (key == "workers") workers = int(num());
        else if (key == "backend_pool") backend_pool = int(num());
        else if (key == "timeout_s") backends.request_timeout = ms_from_s(num());
        else if (key == "handshake_timeout_s") backends.handshake_timeout = ms_from_s(num());
        else if (key == "diarizer") backends.diarizer = BackendDescriptor::parse(BackendKind::Diarizer, str());
        else if (key == "separator") backends.separator = BackendDescriptor::parse(BackendKind::Separator, str());
        else if (key == "verifier") backends.verifier = BackendDescriptor::parse(BackendKind::Verifier, str());
        else if (key == "separator_cutoff_hz") backends.band_split.cutoff_hz = num();
        else if (key == "separator_taps") backends.band_split.taps = int(num());
        else if (key == "output_bit_depth") {
            const int bits = int(num());
            if (bits != 16 && bits != 32) throw Error(ErrorCode::InvalidConfig, "output_bit_depth must be 16 or 32");
            output_depth = bits == 16 ? BitDepth::Pcm16 : BitDepth::Float32;
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
        }
    }
    if (timeline.min_len <= 0 || timeline.max_len < timeline.min_len)
        throw Error(ErrorCode::InvalidConfig, "need 0 < min_window_s <= max_window_s");
    if (assembly.ref_min <= 0 || assembly.ref_target < assembly.ref_min)
        throw Error(ErrorCode::InvalidConfig, "need 0 < ref_min_s <= ref_target_s");
    if (!(assembly.gain_min > 0.0 && assembly.gain_min <= assembly.gain_max))
        throw Error(ErrorCode::InvalidConfig, "need 0 < gain_min <= gain_max");
    if (backend_pool < 1) throw Error(ErrorCode::InvalidConfig, "backend_pool must be >= 1");
    if (workers < 0) throw Error(ErrorCode::InvalidConfig, "workers must be >= 0");
}

json PipelineConfig::to_json() const {
    return json{{"min_window_s", to_s(timeline.min_len)},
                {"max_window_s", to_s(timeline.max_len)},
                {"cut_slack_s", to_s(timeline.cut_slack)},
                {"merge_gap_s", to_s(timeline.merge_gap)},
                {"min_overlap_s", to_s(assembly.min_overlap)},
                {"ref_target_s", to_s(assembly.ref_target)},
                {"ref_min_s", to_s(assembly.ref_min)},
                {"verify_min_s", to_s(assembly.verify_min)},
                {"gain_min", assembly.gain_min},
                {"gain_max", assembly.gain_max},
                {"low_margin", assembly.low_margin},
                {"seed", seed},
                {"workers", resolved_workers()},
                {"backend_pool", backend_pool},
                {"timeout_s", double(backends.request_timeout.count()) / 1000.0},
                {"handshake_timeout_s", double(backends.handshake_timeout.count()) / 1000.0},
                {"diarizer", backends.diarizer.to_string()},
                {"separator", backends.separator.to_string()},
                {"verifier", backends.verifier.to_string()},
                {"separator_cutoff_hz", backends.band_split.cutoff_hz},
                {"separator_taps", backends.band_split.taps},
                {"output_bit_depth", output_depth == BitDepth::Pcm16 ? 16 : 32}};
}

int PipelineConfig::resolved_workers() const {
    if (workers > 0) return workers;
    return int(std::max(1u, std::thread::hardware_concurrency()));
}

void to_json(json& j, const ManifestRecord& r) {
    j = json{{"id", r.id},
             {"source_path", r.source_path},
             {"window_start_s", r.window_start_s},
             {"window_end_s", r.window_end_s},
             {"output_path", r.output_path},
             {"speakers", r.speakers},
             {"overlap_total_s", r.overlap_total_s},
             {"n_overlaps", r.n_overlaps},
             {"n_skipped_overlaps", r.n_skipped_overlaps},
             {"status", r.status}};
}

void from_json(const json& j, ManifestRecord& r) {
    r.id = j.at("id").get<std::string>();
    r.source_path = j.at("source_path").get<std::string>();
    r.window_start_s = j.at("window_start_s").get<double>();
    r.window_end_s = j.at("window_end_s").get<double>();
    r.output_path = j.at("output_path").get<std::string>();
    r.speakers = j.at("speakers").get<std::array<std::string, 2>>();
    r.overlap_total_s = j.at("overlap_total_s").get<double>();
    r.n_overlaps = j.at("n_overlaps").get<int>();
    r.n_skipped_overlaps = j.at("n_skipped_overlaps").get<int>();
    r.status = j.at("status").get<std::string>();
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
    std::vector<ManifestRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line).get<ManifestRecord>());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(lineno) + ": bad manifest record: " + e.what());
        }
    }
    return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write manifest " + path.string());
    for (const auto& r : records) out << json(r).dump() << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

std::vector<fs::path> list_inputs(const fs::path& input) {
    std::vector<fs::path> out;
    std::error_code ec;
    if (fs::is_directory(input, ec)) {
        for (const auto& e : fs::directory_iterator(input)) {
            const auto name = e.path().filename().string();
            if (e.is_regular_file() && e.path().extension() == ".wav" && !ends_with(name, ".truth.wav"))
                out.push_back(e.path());
        }
        std::sort(out.begin(), out.end());
        return out;
    }
    std::ifstream in(input);
    if (!in) throw Error(ErrorCode::IoError, "cannot read input " + input.string());
    const auto base = input.parent_path();
    const bool jsonl = input.extension() == ".jsonl";
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
        fs::path p;
        if (jsonl) {
            try {
                p = json::parse(line).at("source_path").get<std::string>();
            } catch (const json::exception& e) {
                throw Error(ErrorCode::IoError, input.string() + ": bad input record: " + e.what());
            }
        } else {
            p = line;
        }
        out.push_back(p.is_relative() ? base / p : p);
    }
    return out;
}

std::string recording_id(const fs::path& source) {
    std::string name = source.filename().string();
    for (const std::string suffix : {".mix.wav", ".wav"}) {
        if (ends_with(name, suffix)) return name.substr(0, name.size() - suffix.size());
    }
    return source.stem().string();
}

std::vector<ManifestRecord> process_recording(const fs::path& source, const std::string& id, const fs::path& out_dir,
                                              const PipelineConfig& config, BackendSet& backends) {
    auto skipped = [&](const std::string& reason, const std::string& detail) {
        log::warn(id + ": skipped (" + reason + "): " + detail);
        ManifestRecord r;
        r.id = id;
        r.source_path = source.string();
        r.status = "skipped:" + reason;
        return r;
    };

    AudioBuffer audio;
    try {
        audio = read_wav(source);
    } catch (const Error& e) {
        return {skipped("io", e.what())};
    }
    if (audio.channels() != 1) return {skipped("not_mono", std::to_string(audio.channels()) + " channels")};
    if (audio.sample_rate() != kCanonicalRate)
        return {skipped("sample_rate", std::to_string(audio.sample_rate()) + " Hz input; resample to " +
                                           std::to_string(kCanonicalRate) + " Hz first")};

    DiarizationAnnotation annotation;
    try {
        annotation = backends.diarizer->diarize(audio, RecordingContext{source});
    } catch (const Error& e) {
        return {skipped("diarize", e.what())};
    }
    const auto windows = build_windows(annotation, config.timeline);
    if (windows.empty()) return {skipped("no_windows", "no two-speaker region of admissible length")};

    std::vector<ManifestRecord> records;
    for (size_t k = 0; k < windows.size(); ++k) {
        const auto& w = windows[k];
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, "_w%03zu", k);
        ManifestRecord r;
        r.id = id + suffix;
        r.source_path = source.string();
        r.window_start_s = to_s(w.source_interval.start);
        r.window_end_s = to_s(w.source_interval.end);

        const AudioBuffer mix = audio.slice(w.source_interval);
        PseudoStereoResult res;
        try {
            res = assemble_pseudo_stereo(mix, w, *backends.separator, *backends.verifier, config.assembly,
                                         derive_seed(config.seed, id, k));
        } catch (const Error& e) {
            log::warn(r.id + ": window skipped: " + e.what());
            r.status = e.code() == ErrorCode::InsufficientSoloSpeech ? "skipped:insufficient_solo" : "skipped:assembly";
            records.push_back(r);
            continue;
        }
        const fs::path rel = fs::path("wav") / (r.id + ".wav");
        try {
            write_wav(res.stereo, out_dir / rel, config.output_depth);
        } catch (const Error& e) {
            log::error(r.id + ": " + e.what());
            r.status = "skipped:io_write";
            records.push_back(r);
            continue;
        }
        r.output_path = rel.generic_string();
        r.speakers = res.channel_speakers;
        int64_t overlap = 0;
        for (const auto& p : res.provenance) {
            if (p.kind == Provenance::Separated || p.kind == Provenance::PassthroughShortOverlap ||
                p.kind == Provenance::SkippedOverlap) {
                overlap += p.interval.length();
                ++r.n_overlaps;
            }
        }
        r.overlap_total_s = to_s(overlap);
        r.n_skipped_overlaps = int(res.skipped_overlaps.size());
        records.push_back(r);
    }
    return records;
}

GenerateSummary run_generate(const fs::path& input, const fs::path& out_dir, const PipelineConfig& config) {
    std::error_code ec;
    fs::create_directories(out_dir / "wav", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + out_dir.string() + ": " + ec.message());
    {
        std::ofstream snap(out_dir / "config.resolved.json", std::ios::trunc);
        if (!snap) throw Error(ErrorCode::IoError, "output directory is not writable: " + out_dir.string());
        snap << config.to_json().dump(2) << '\n';
    }

    const auto inputs = list_inputs(input);
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& p : inputs) {
        std::string id = recording_id(p);
        for (int n = 1; seen.count(id); ++n) id = recording_id(p) + "_" + std::to_string(n);
        seen.insert(id);
        ids.push_back(id);
    }

    int n_workers = config.resolved_workers();
    const bool external = config.backends.diarizer.transport == BackendDescriptor::Transport::External ||
                          config.backends.separator.transport == BackendDescriptor::Transport::External ||
                          config.backends.verifier.transport == BackendDescriptor::Transport::External;
    if (external) n_workers = std::min(n_workers, config.backend_pool);
    n_workers = std::max(1, std::min<int>(n_workers, int(std::max<size_t>(1, inputs.size()))));

    std::vector<BackendSet> sets;
    for (int w = 0; w < n_workers; ++w) {
        try {
            sets.push_back(make_backends(config.backends));
        } catch (const Error& e) {
            log::error(std::string("backend start failed: ") + e.what());
        }
    }
    if (sets.empty()) throw Error(ErrorCode::SpawnError, "no backend set could be started");

    std::ofstream manifest(out_dir / "manifest.jsonl", std::ios::trunc);
    if (!manifest) throw Error(ErrorCode::IoError, "cannot write manifest in " + out_dir.string());

    GenerateSummary summary;
    summary.recordings = inputs.size();
    std::vector<std::optional<std::vector<ManifestRecord>>> results(inputs.size());
    size_t next_to_write = 0;
    std::mutex mutex;
    std::atomic<size_t> next_job{0};

    // Records are written in input order so reruns produce identical manifests.
    auto deliver = [&](size_t i, std::vector<ManifestRecord> recs) {
        std::lock_guard<std::mutex> lock(mutex);
        results[i] = std::move(recs);
        while (next_to_write < results.size() && results[next_to_write]) {
            for (const auto& r : *results[next_to_write]) {
                manifest << json(r).dump() << '\n';
                if (r.ok()) {
                    ++summary.windows_ok;
                    summary.output_samples += secs(r.window_end_s) - secs(r.window_start_s);
                } else {
                    ++summary.records_skipped;
                }
            }
            manifest.flush();
            results[next_to_write].reset();
            ++next_to_write;
        }
    };

    auto work = [&](BackendSet& backends) {
        for (;;) {
            const size_t i = next_job++;
            if (i >= inputs.size()) return;
            std::vector<ManifestRecord> recs;
            try {
                recs = process_recording(inputs[i], ids[i], out_dir, config, backends);
            } catch (const std::exception& e) {
                log::error(ids[i] + ": " + e.what());
                ManifestRecord r;
                r.id = ids[i];
                r.source_path = inputs[i].string();
                r.status = "skipped:internal";
                recs.push_back(r);
            }
            deliver(i, std::move(recs));
        }
    };

    if (sets.size() == 1) {
        work(sets[0]);
    } else {
        std::vector<std::thread> threads;
        for (auto& s : sets) threads.emplace_back(work, std::ref(s));
        for (auto& t : threads) t.join();
    }
    if (!manifest) throw Error(ErrorCode::IoError, "manifest write failed in " + out_dir.string());

    summary.output_hours = double(summary.output_samples) / kCanonicalRate / 3600.0;
    std::ofstream sum(out_dir / "summary.json", std::ios::trunc);
    sum << json{{"recordings", summary.recordings},
                {"windows_ok", summary.windows_ok},
                {"records_skipped", summary.records_skipped},
                {"output_samples", summary.output_samples},
                {"output_hours", summary.output_hours}}
               .dump(2)
        << '\n';
    return summary;
}

SplitResult split_records(const std::vector<ManifestRecord>& records, const SplitSpec& spec) {
    if (!(spec.eval_fraction > 0.0 && spec.eval_fraction < 1.0))
        throw Error(ErrorCode::InvalidConfig, "eval fraction must lie strictly between 0 and 1");
    std::vector<size_t> ok;
    for (size_t i = 0; i < records.size(); ++i)
        if (records[i].ok()) ok.push_back(i);
    if (ok.empty()) throw Error(ErrorCode::EmptyManifest, "manifest has no ok records");

    const size_t n = ok.size();
    const size_t k = size_t(std::llround(spec.eval_fraction * double(n)));
    std::mt19937_64 rng(spec.seed);
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    for (size_t i = 0; i < k; ++i) std::swap(perm[i], perm[i + size_t(rng() % uint64_t(n - i))]);
    std::vector<bool> is_eval(n, false);
    for (size_t i = 0; i < k; ++i) is_eval[perm[i]] = true;

    SplitResult out;
    for (size_t i = 0; i < n; ++i) (is_eval[i] ? out.eval : out.train).push_back(records[ok[i]]);
    return out;
}

SplitResult run_split(const fs::path& manifest, const fs::path& out_dir, const SplitSpec& spec) {
    auto records = read_manifest(manifest);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const auto from = fs::absolute(manifest).parent_path().lexically_normal();
    const auto to = fs::absolute(out_dir).lexically_normal();
    if (from != to) {
        for (auto& r : records) {
            if (!r.output_path.empty() && fs::path(r.output_path).is_relative())
                r.output_path = (from / r.output_path).lexically_normal().lexically_relative(to).generic_string();
        }
    }
    auto split = split_records(records, spec);
    write_manifest(out_dir / "train.jsonl", split.train);
    write_manifest(out_dir / "eval.jsonl", split.eval);
    return split;
}

std::vector<fs::path> list_stereo_inputs(const std::vector<fs::path>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        std::error_code ec;
        if (fs::is_directory(in, ec)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(in))
                if (e.is_regular_file() && e.path().extension() == ".wav") found.push_back(e.path());
            std::sort(found.begin(), found.end());
            for (const auto& p : found) {
                // Directories may mix mono and stereo files (a synthetic corpus does); keep the stereo ones.
                try {
                    if (read_wav(p).channels() == 2) out.push_back(p);
                    else log::debug("stats: skipping non-stereo " + p.string());
                } catch (const Error& e) {
                    log::warn(std::string("stats: skipping unreadable ") + e.what());
                }
            }
        } else if (in.extension() == ".jsonl") {
            const auto base = in.parent_path();
            for (const auto& r : read_manifest(in))
                if (r.ok()) out.push_back(fs::path(r.output_path).is_relative() ? base / r.output_path : fs::path(r.output_path));
        } else {
            out.push_back(in);
        }
    }
    return out;
}

TurnTakingStats run_stats(const std::vector<fs::path>& inputs, const StatsOptions& options) {
    std::optional<NamedReference> ref;
    if (!options.reference.empty()) {
        ref = builtin_reference(options.reference);
        if (!ref) throw Error(ErrorCode::InvalidConfig, "unknown reference '" + options.reference + "'");
    }
    options.vad.validate();
    const auto files = list_stereo_inputs(inputs);
    std::vector<TurnTakingEvents> events;
    int rate = 0;
    for (const auto& p : files) {
        const auto audio = read_wav(p);
        if (audio.channels() != 2)
            throw Error(ErrorCode::NotStereo, p.string() + " has " + std::to_string(audio.channels()) + " channels");
        if (rate == 0) rate = audio.sample_rate();
        if (audio.sample_rate() != rate)
            throw Error(ErrorCode::SampleRateMismatch, p.string() + ": all inputs must share one sample rate");
        events.push_back(events_for_stereo(audio, options.vad));
    }
    return aggregate(events, rate == 0 ? kCanonicalRate : rate, ref);
}

std::vector<std::string> run_synth(const DialogueScript& base, int count, const fs::path& out_dir) {
    if (count < 1) throw Error(ErrorCode::InvalidScript, "count must be >= 1");
    base.validate();
    std::vector<std::string> ids;
    for (int i = 0; i < count; ++i) {
        DialogueScript s = base;
        s.seed = derive_seed(base.seed, "synth", uint64_t(i));
        char id[32];
        std::snprintf(id, sizeof id, "synth_%04d", i);
        write_corpus_item(out_dir, id, s, generate(s));
        ids.emplace_back(id);
    }
    return ids;
}

namespace {

AudioBuffer probe_noise(int64_t len, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<float> x(static_cast<size_t>(len));
    for (auto& v : x) v = float(double(rng() >> 11) * 0x1.0p-53 - 0.5) * 0.2f;
    return AudioBuffer::mono(std::move(x), kCanonicalRate);
}

} // namespace

std::vector<ContractResult> check_backends(const BackendOptions& options, const std::vector<BackendKind>& kinds) {
    std::vector<ContractResult> results;
    DialogueScript probe_script;
    probe_script.seed = 7;
    probe_script.duration_s = 6.0;
    const auto probe = generate(probe_script);

    const fs::path scratch = temp_root() / ("stereoforge-check-" + std::to_string(::getpid()));
    fs::create_directories(scratch);

    for (BackendKind kind : kinds) {
        const BackendDescriptor& d = kind == BackendKind::Diarizer    ? options.diarizer
                                     : kind == BackendKind::Separator ? options.separator
                                                                      : options.verifier;
        const std::string name = std::string(to_string(kind)) + " " + d.to_string();
        auto record = [&](const std::string& contract, bool passed, const std::string& detail) {
            results.push_back({name, contract, passed, detail});
        };
        auto attempt = [&](const std::string& contract, auto&& fn) {
            try {
                const std::string detail = fn();
                record(contract, detail.empty(), detail.empty() ? "ok" : detail);
            } catch (const std::exception& e) {
                record(contract, false, e.what());
            }
        };

        std::shared_ptr<ExternalBackend> ext;
        std::unique_ptr<Diarizer> diarizer;
        std::unique_ptr<Separator> separator;
        std::unique_ptr<Verifier> verifier;
        try {
            if (d.transport == BackendDescriptor::Transport::External) {
                ext = spawn_external_backend(d, options.request_timeout, options.handshake_timeout);
                if (kind == BackendKind::Diarizer) diarizer = std::make_unique<ExternalDiarizer>(ext, options.merge_gap);
                if (kind == BackendKind::Separator) separator = std::make_unique<ExternalSeparator>(ext);
                if (kind == BackendKind::Verifier) verifier = std::make_unique<ExternalVerifier>(ext);
            } else {
                BackendOptions o = options;
                o.diarizer = o.separator = o.verifier = d;
                if (kind == BackendKind::Diarizer) diarizer = make_diarizer(o);
                if (kind == BackendKind::Separator) separator = make_separator(o);
                if (kind == BackendKind::Verifier) verifier = make_verifier(o);
            }
            record("handshake", true, "ok");
        } catch (const std::exception& e) {
            record("handshake", false, e.what());
            continue;
        }

        if (diarizer) {
            const fs::path mix_path = scratch / "probe.mix.wav";
            write_wav(probe.mix, mix_path, BitDepth::Float32);
            write_annotation(scratch / "probe.truth.tsv", probe.annotation, kCanonicalRate);
            attempt("annotation-bounds", [&]() -> std::string {
                const auto a = diarizer->diarize(probe.mix, RecordingContext{mix_path});
                if (a.total_len != probe.mix.frames()) return "annotation length differs from input";
                for (const auto& e : a.entries)
                    if (e.interval.start < 0 || e.interval.end > a.total_len || e.interval.end <= e.interval.start)
                        return "entry outside the recording";
                return "";
            });
        }
        if (separator) {
            for (int64_t len : {int64_t(1600), int64_t(12345), int64_t(48000)}) {
                attempt("length-preservation/" + std::to_string(len), [&]() -> std::string {
                    const auto pair = separator->separate(probe_noise(len, uint64_t(len)));
                    if (pair.first.frames() != len || pair.second.frames() != len) return "output length differs from input";
                    if (pair.first.channels() != 1 || pair.second.channels() != 1) return "outputs must be mono";
                    return "";
                });
            }
        }
        if (verifier) {
            attempt("similarity-range", [&]() -> std::string {
                const auto a = probe.mix.slice({0, 2 * kCanonicalRate});
                const auto b = probe.mix.slice({2 * kCanonicalRate, 4 * kCanonicalRate});
                for (const auto* x : {&a, &b})
                    for (const auto* y : {&a, &b}) {
                        const double v = verifier->verify(*x, *y).value;
                        if (!(v >= -1.0 && v <= 1.0)) return "similarity " + std::to_string(v) + " outside [-1, 1]";
                    }
                return "";
            });
        }
        attempt("failure-reporting", [&]() -> std::string {
            if (ext) {
                const std::string op = kind == BackendKind::Diarizer ? "diarize" : kind == BackendKind::Separator ? "separate" : "verify";
                const std::string missing = (scratch / "does-not-exist.wav").string();
                try {
                    ext->request(op, {{"audio", missing}, {"audio2", missing}, {"out_dir", scratch.string()}});
                    return "request on a missing file did not fail";
                } catch (const BackendError& e) {
                    if (e.code() != ErrorCode::BackendFailure) return std::string("unexpected error kind: ") + e.what();
                }
                return "";
            }
            // Builtins report precondition violations as errors.
            const AudioBuffer stereo(2, 8000, kCanonicalRate);
            try {
                if (diarizer) diarizer->diarize(stereo);
                if (separator) separator->separate(stereo);
                if (verifier) verifier->verify(probe_noise(100, 1), probe_noise(100, 2));
                return "invalid input was accepted";
            } catch (const Error&) {
                return "";
            }
        });
    }
    std::error_code ec;
    fs::remove_all(scratch, ec);
    return results;
}

} // namespace stereoforge
