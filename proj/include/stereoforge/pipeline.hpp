#pragma once

#include "stereoforge/assembly.hpp"
#include "stereoforge/audio.hpp"
#include "stereoforge/backends.hpp"
#include "stereoforge/metrics.hpp"
#include "stereoforge/synth.hpp"
#include "stereoforge/timeline.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace stereoforge {

struct PipelineConfig {
    TimelineParams timeline;
    AssemblyConfig assembly;
    BackendOptions backends;
    uint64_t seed = 0;
    int workers = 0;        // 0: hardware concurrency
    int backend_pool = 1;   // worker cap when any backend is an external process
    BitDepth output_depth = BitDepth::Pcm16;

    // Applies the documented keys of a config document; unknown keys are rejected.
    void apply(const nlohmann::json& j);
    nlohmann::json to_json() const;
    int resolved_workers() const;
};

struct ManifestRecord {
    std::string id;
    std::string source_path;
    double window_start_s = 0.0;
    double window_end_s = 0.0;
    std::string output_path;  // relative to the manifest's directory
    std::array<std::string, 2> speakers;  // channel 1, channel 2
    double overlap_total_s = 0.0;
    int n_overlaps = 0;
    int n_skipped_overlaps = 0;
    std::string status = "ok";  // "ok" or "skipped:<reason>"

    bool ok() const { return status == "ok"; }
};

void to_json(nlohmann::json& j, const ManifestRecord& r);
void from_json(const nlohmann::json& j, ManifestRecord& r);

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

// Input recordings: a directory of .wav files (excluding *.truth.wav), a .jsonl manifest with
// `source_path` fields, or a text file with one path per line.
std::vector<std::filesystem::path> list_inputs(const std::filesystem::path& input);

// `synth_0001.mix.wav` -> `synth_0001`
std::string recording_id(const std::filesystem::path& source);

struct GenerateSummary {
    size_t recordings = 0;
    size_t windows_ok = 0;
    size_t records_skipped = 0;
    int64_t output_samples = 0;
    double output_hours = 0.0;

    bool partial() const { return records_skipped > 0; }
};

std::vector<ManifestRecord> process_recording(const std::filesystem::path& source, const std::string& id,
                                              const std::filesystem::path& out_dir, const PipelineConfig& config,
                                              BackendSet& backends);

GenerateSummary run_generate(const std::filesystem::path& input, const std::filesystem::path& out_dir,
                             const PipelineConfig& config);

struct SplitSpec {
    double eval_fraction = 0.01;
    uint64_t seed = 0;
};

struct SplitResult {
    std::vector<ManifestRecord> train;
    std::vector<ManifestRecord> eval;
};

SplitResult split_records(const std::vector<ManifestRecord>& records, const SplitSpec& spec);
SplitResult run_split(const std::filesystem::path& manifest, const std::filesystem::path& out_dir, const SplitSpec& spec);

struct StatsOptions {
    VadParams vad;
    std::string reference;  // empty: no deltas
};

// Every input must be (or resolve to) 2-channel audio.
std::vector<std::filesystem::path> list_stereo_inputs(const std::vector<std::filesystem::path>& inputs);
TurnTakingStats run_stats(const std::vector<std::filesystem::path>& inputs, const StatsOptions& options);

std::vector<std::string> run_synth(const DialogueScript& base, int count, const std::filesystem::path& out_dir);

struct ContractResult {
    std::string backend;
    std::string contract;
    bool passed = false;
    std::string detail;
};

// The shared contract suite: handshake, result ranges, length preservation, failure reporting.
std::vector<ContractResult> check_backends(const BackendOptions& options, const std::vector<BackendKind>& kinds);

} // namespace stereoforge
