#pragma once

#include "stereoforge/audio.hpp"
#include "stereoforge/backends.hpp"
#include "stereoforge/timeline.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace stereoforge {

struct AssemblyConfig {
    int64_t min_overlap = 3200;        // shorter overlaps are passed through unseparated
    int64_t ref_target = 5 * kCanonicalRate;
    int64_t ref_min = 2 * kCanonicalRate;
    int64_t verify_min = kCanonicalRate / 2;  // separated candidates below this are tiled for scoring
    double gain_min = 0.25;
    double gain_max = 4.0;
    double low_margin = 0.05;
};

// Sim[i][j]: similarity of reference clip i against separated stream j.
using SimilarityMatrix = std::array<std::array<double, 2>, 2>;

// True when stream 2 should go to channel 1. Ties keep the identity assignment.
bool assignment_swapped(const SimilarityMatrix& sim);

struct ReferenceClips {
    std::array<AudioBuffer, 2> clips;
    std::array<std::vector<SampleInterval>, 2> source_intervals;
};

struct AssignmentDecision {
    SampleInterval overlap_interval;
    SimilarityMatrix sim{};
    bool swapped = false;
    bool low_margin = false;
    double gain = 1.0;
};

enum class Provenance { Silence, CopiedSolo, Separated, PassthroughShortOverlap, SkippedOverlap };
const char* to_string(Provenance p);

struct ProvenanceSpan {
    SampleInterval interval;
    Provenance kind;
};

struct SkippedOverlap {
    SampleInterval interval;
    std::string reason;
};

struct PseudoStereoResult {
    AudioBuffer stereo;
    std::array<SpeakerLabel, 2> channel_speakers;
    std::vector<AssignmentDecision> decisions;
    std::vector<SkippedOverlap> skipped_overlaps;
    std::vector<ProvenanceSpan> provenance;
};

// Speaker whose first solo turn starts earliest goes to channel 1.
std::array<SpeakerLabel, 2> channel_order(const FrameClassification& classification);

ReferenceClips select_reference_clips(const AudioBuffer& mix, const FrameClassification& classification,
                                      const std::array<SpeakerLabel, 2>& order, uint64_t seed,
                                      const AssemblyConfig& config = {});

void copy_non_overlap(const AudioBuffer& mix, const FrameClassification& classification,
                      const std::array<SpeakerLabel, 2>& order, PseudoStereoResult& out);

struct ResolvedOverlap {
    std::vector<float> channel1;
    std::vector<float> channel2;
    AssignmentDecision decision;
};

ResolvedOverlap resolve_overlap(const AudioBuffer& mix, const SampleInterval& interval, const ReferenceClips& refs,
                                Separator& separator, Verifier& verifier, const AssemblyConfig& config = {});

PseudoStereoResult assemble_pseudo_stereo(const AudioBuffer& mix, const DialogueWindow& window, Separator& separator,
                                          Verifier& verifier, const AssemblyConfig& config, uint64_t seed);

} // namespace stereoforge
