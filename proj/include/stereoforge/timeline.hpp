#pragma once

#include "stereoforge/audio.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stereoforge {

using SpeakerLabel = std::string;

struct SpeakerTurn {
    SpeakerLabel speaker;
    SampleInterval interval;

    friend bool operator==(const SpeakerTurn&, const SpeakerTurn&) = default;
};

struct DiarizationAnnotation {
    std::vector<SpeakerTurn> entries;
    int64_t total_len = 0;

    // Distinct labels in order of first appearance.
    std::vector<SpeakerLabel> speakers() const;

    friend bool operator==(const DiarizationAnnotation&, const DiarizationAnnotation&) = default;
};

// The three-way partition of a two-speaker window: solo turns, overlaps, silence.
struct FrameClassification {
    std::array<SpeakerLabel, 2> speakers;
    std::vector<SpeakerTurn> solo;
    std::vector<SampleInterval> overlap;
    std::vector<SampleInterval> silence;
    int64_t total_len = 0;

    std::vector<SampleInterval> solo_of(const SpeakerLabel& speaker) const;
};

struct DialogueWindow {
    SampleInterval source_interval;
    DiarizationAnnotation annotation;
};

struct TimelineParams {
    int sample_rate = kCanonicalRate;
    int64_t merge_gap = 3200;     // 0.2 s
    int64_t min_len = 30 * kCanonicalRate;
    int64_t max_len = 120 * kCanonicalRate;
    int64_t cut_slack = 2 * kCanonicalRate;
};

// Merges same-speaker turns that overlap or are separated by less than merge_gap samples.
DiarizationAnnotation normalize_annotation(std::vector<SpeakerTurn> raw, int64_t total_len,
                                           int64_t merge_gap = 3200);

FrameClassification classify_frames(const DiarizationAnnotation& annotation);

std::vector<DialogueWindow> build_windows(const DiarizationAnnotation& annotation,
                                          const TimelineParams& params = {});

// Restrict an annotation to [window) and shift it to window-local sample indices.
DiarizationAnnotation rebase(const DiarizationAnnotation& annotation, const SampleInterval& window);

// Tab-separated `start_seconds end_seconds speaker` lines.
int64_t seconds_to_samples(double seconds, int sample_rate);
std::vector<SpeakerTurn> parse_annotation(std::istream& in, int sample_rate);
std::vector<SpeakerTurn> read_annotation(const std::filesystem::path& path, int sample_rate);
void write_annotation(std::ostream& out, const DiarizationAnnotation& annotation, int sample_rate);
void write_annotation(const std::filesystem::path& path, const DiarizationAnnotation& annotation,
                      int sample_rate);

} // namespace stereoforge
