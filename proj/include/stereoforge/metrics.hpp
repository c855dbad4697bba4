#pragma once

#include "stereoforge/audio.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stereoforge {

struct VadParams {
    double frame_len_s = 0.01;
    double energy_floor_db = -35.0;  // relative to the channel's 95th-percentile frame energy
    double min_speech_s = 0.2;
    double min_silence_s = 0.15;

    void validate() const;
};

void to_json(nlohmann::json& j, const VadParams& p);
void from_json(const nlohmann::json& j, VadParams& p);

std::vector<SampleInterval> vad(const AudioBuffer& channel, const VadParams& params = {});

// Turn-taking events over a two-channel timeline.
struct TurnTakingEvents {
    std::array<std::vector<SampleInterval>, 2> ipu;
    std::vector<SampleInterval> gap;
    std::vector<SampleInterval> pause;
    std::vector<SampleInterval> overlap;
    std::vector<SampleInterval> single;  // exactly one channel speaking
    int64_t total_len = 0;
};

TurnTakingEvents extract_events(std::span<const SampleInterval> speech1, std::span<const SampleInterval> speech2,
                                int64_t total_len);

TurnTakingEvents events_for_stereo(const AudioBuffer& stereo, const VadParams& params = {});

struct EventStat {
    double dur_mean_s = 0.0;
    double occur_mean = 0.0;
};

struct StatBlock {
    EventStat ipu, gap, overlap, pause;
};

struct NamedReference {
    std::string name;
    StatBlock stats;
};

// Named references shipped with the tool; currently only "fisher-table1".
std::optional<NamedReference> builtin_reference(const std::string& name);

struct TurnTakingStats {
    StatBlock stats;
    std::optional<StatBlock> delta;
    std::string reference_name;
    size_t n_dialogues = 0;
    double length_min_s = 0.0;
    double length_mean_s = 0.0;
    double length_max_s = 0.0;
};

TurnTakingStats aggregate(std::span<const TurnTakingEvents> dialogues, int sample_rate,
                          const std::optional<NamedReference>& reference = std::nullopt);

nlohmann::json report_json(const TurnTakingStats& stats, const VadParams& params);
std::string report_text(const TurnTakingStats& stats);

} // namespace stereoforge
