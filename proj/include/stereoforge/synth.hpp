#pragma once

#include "stereoforge/audio.hpp"
#include "stereoforge/timeline.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

namespace stereoforge {

// A synthetic "voice": band-limited Gaussian noise under a slow amplitude modulation.
struct VoiceSpec {
    double f_lo_hz = 200.0;
    double f_hi_hz = 700.0;
    double am_rate_hz = 3.0;
    double level = 0.2;  // RMS of the unmodulated carrier
};

struct DialogueScript {
    uint64_t seed = 0;
    double duration_s = 60.0;
    // Turn lengths are log-normal in seconds, clamped to [turn_min_s, turn_max_s].
    double turn_log_mean = 0.8;
    double turn_log_sigma = 0.5;
    double turn_min_s = 0.6;
    double turn_max_s = 8.0;
    // Target fraction of speech time during which both speakers talk.
    double overlap_prob = 0.15;
    double pause_prob = 0.25;
    double overlap_min_s = 0.3;
    double overlap_max_s = 1.5;
    double gap_min_s = 0.15;
    double gap_max_s = 0.8;
    double pause_min_s = 0.3;
    double pause_max_s = 1.0;
    double lead_s = 0.5;
    double ramp_s = 0.01;
    int fir_taps = 513;
    int sample_rate = kCanonicalRate;
    std::array<VoiceSpec, 2> speakers{VoiceSpec{200.0, 700.0, 3.0, 0.2}, VoiceSpec{1500.0, 3500.0, 4.5, 0.2}};

    void validate() const;
};

void to_json(nlohmann::json& j, const DialogueScript& s);
void from_json(const nlohmann::json& j, DialogueScript& s);

struct SynthDialogue {
    AudioBuffer mix;
    AudioBuffer truth;  // channel k holds speaker "spk<k>"
    DiarizationAnnotation annotation;
};

SynthDialogue generate(const DialogueScript& script);

// Writes <id>.mix.wav, <id>.truth.wav, <id>.truth.tsv and <id>.meta.json under root.
void write_corpus_item(const std::filesystem::path& root, const std::string& id, const DialogueScript& script,
                       const SynthDialogue& dialogue);

} // namespace stereoforge
