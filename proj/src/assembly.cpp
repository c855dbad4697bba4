#include "stereoforge/assembly.hpp"

#include "stereoforge/error.hpp"
#include "stereoforge/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace stereoforge {

namespace {
constexpr float kMinus6dB = 0.501187233627272f;
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::Silence: return "silence";
        case Provenance::CopiedSolo: return "copied-solo";
        case Provenance::Separated: return "separated";
        case Provenance::PassthroughShortOverlap: return "passthrough-short-overlap";
        case Provenance::SkippedOverlap: return "skipped-overlap";
    }
    return "unknown";
}

bool assignment_swapped(const SimilarityMatrix& sim) {
    return !(sim[0][0] + sim[1][1] >= sim[0][1] + sim[1][0]);
}

std::array<SpeakerLabel, 2> channel_order(const FrameClassification& fc) {
    std::array<int64_t, 2> first{std::numeric_limits<int64_t>::max(), std::numeric_limits<int64_t>::max()};
    for (const auto& t : fc.solo) {
        for (int i = 0; i < 2; ++i)
            if (t.speaker == fc.speakers[size_t(i)]) first[size_t(i)] = std::min(first[size_t(i)], t.interval.start);
    }
    if (first[1] < first[0]) return {fc.speakers[1], fc.speakers[0]};
    return fc.speakers;
}

ReferenceClips select_reference_clips(const AudioBuffer& mix, const FrameClassification& fc,
                                      const std::array<SpeakerLabel, 2>& order, uint64_t seed,
                                      const AssemblyConfig& config) {
    require_canonical_mono(mix, "select_reference_clips");
    std::mt19937_64 rng(seed);
    ReferenceClips refs;
    for (size_t i = 0; i < 2; ++i) {
        const auto solo = fc.solo_of(order[i]);
        int64_t total = 0;
        for (const auto& iv : solo) total += iv.length();
        if (total < config.ref_min)
            throw Error(ErrorCode::InsufficientSoloSpeech,
                        "speaker '" + order[i] + "' has " + std::to_string(total) + " solo samples, need " +
                            std::to_string(config.ref_min));
        const int64_t len = std::min(config.ref_target, total);
        const int64_t offset = int64_t(rng() % uint64_t(total - len + 1));

        // Walk the concatenated solo material from `offset` for `len` samples.
        std::vector<float> clip;
        clip.reserve(size_t(len));
        int64_t skip = offset, need = len;
        const auto x = mix.channel(0);
        for (const auto& iv : solo) {
            if (need == 0) break;
            if (skip >= iv.length()) {
                skip -= iv.length();
                continue;
            }
            const int64_t s = iv.start + skip;
            const int64_t e = std::min(iv.end, s + need);
            clip.insert(clip.end(), x.begin() + s, x.begin() + e);
            refs.source_intervals[i].push_back({s, e});
            need -= e - s;
            skip = 0;
        }
        refs.clips[i] = AudioBuffer::mono(std::move(clip), mix.sample_rate());
    }
    return refs;
}

void copy_non_overlap(const AudioBuffer& mix, const FrameClassification& fc, const std::array<SpeakerLabel, 2>& order,
                      PseudoStereoResult& out) {
    const auto x = mix.channel(0);
    for (const auto& t : fc.solo) {
        const int ch = t.speaker == order[0] ? 0 : 1;
        auto dst = out.stereo.mutable_channel(ch);
        std::copy(x.begin() + t.interval.start, x.begin() + t.interval.end, dst.begin() + t.interval.start);
    }
}

namespace {

AudioBuffer tiled(const AudioBuffer& b, int64_t min_len) {
    if (b.frames() >= min_len || b.frames() == 0) return b;
    const auto src = b.channel(0);
    std::vector<float> out(static_cast<size_t>(min_len));
    for (size_t i = 0; i < out.size(); ++i) out[i] = src[i % src.size()];
    return AudioBuffer::mono(std::move(out), b.sample_rate());
}

} // namespace

ResolvedOverlap resolve_overlap(const AudioBuffer& mix, const SampleInterval& interval, const ReferenceClips& refs,
                                Separator& separator, Verifier& verifier, const AssemblyConfig& config) {
    const AudioBuffer segment = mix.slice(interval);
    SeparatedPair pair = separator.separate(segment);
    for (const AudioBuffer* s : {&pair.first, &pair.second}) {
        if (s->channels() != 1 || s->frames() != segment.frames())
            throw Error(ErrorCode::BackendFailure, "separator returned " + std::to_string(s->frames()) +
                                                       " samples for a " + std::to_string(segment.frames()) +
                                                       "-sample segment");
    }

    const std::array<AudioBuffer, 2> candidates{tiled(pair.first, config.verify_min), tiled(pair.second, config.verify_min)};
    ResolvedOverlap r;
    r.decision.overlap_interval = interval;
    for (size_t i = 0; i < 2; ++i)
        for (size_t j = 0; j < 2; ++j) r.decision.sim[i][j] = verifier.verify(refs.clips[i], candidates[j]).value;
    r.decision.swapped = assignment_swapped(r.decision.sim);
    const auto& sim = r.decision.sim;
    const double margin = std::abs((sim[0][0] + sim[1][1]) - (sim[0][1] + sim[1][0]));
    r.decision.low_margin = margin < config.low_margin;
    if (r.decision.low_margin)
        log::warn("low assignment margin " + std::to_string(margin) + " on overlap [" + std::to_string(interval.start) +
                  ", " + std::to_string(interval.end) + ")");

    // Both streams share one gain so their sum matches the mixture level.
    const auto a = pair.first.channel(0);
    const auto b = pair.second.channel(0);
    double sum_sq = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        const double v = double(a[k]) + double(b[k]);
        sum_sq += v * v;
    }
    const double sum_rms = std::sqrt(sum_sq / double(a.size()));
    const double mix_rms = rms(segment.channel(0));
    double gain = sum_rms > 0.0 ? mix_rms / sum_rms : 1.0;
    gain = std::clamp(gain, config.gain_min, config.gain_max);
    r.decision.gain = gain;

    auto scaled = [gain](std::span<const float> s) {
        std::vector<float> out(s.size());
        for (size_t k = 0; k < s.size(); ++k) out[k] = float(double(s[k]) * gain);
        return out;
    };
    r.channel1 = scaled(r.decision.swapped ? b : a);
    r.channel2 = scaled(r.decision.swapped ? a : b);
    return r;
}

PseudoStereoResult assemble_pseudo_stereo(const AudioBuffer& mix, const DialogueWindow& window, Separator& separator,
                                          Verifier& verifier, const AssemblyConfig& config, uint64_t seed) {
    require_canonical_mono(mix, "assemble_pseudo_stereo");
    if (mix.frames() != window.annotation.total_len)
        throw Error(ErrorCode::OutOfBounds, "window audio has " + std::to_string(mix.frames()) +
                                                " samples but its annotation covers " +
                                                std::to_string(window.annotation.total_len));
    const FrameClassification fc = classify_frames(window.annotation);
    const auto order = channel_order(fc);

    PseudoStereoResult out;
    out.stereo = AudioBuffer(2, mix.frames(), mix.sample_rate());
    out.channel_speakers = order;

    copy_non_overlap(mix, fc, order, out);
    for (const auto& t : fc.solo) out.provenance.push_back({t.interval, Provenance::CopiedSolo});
    for (const auto& s : fc.silence) out.provenance.push_back({s, Provenance::Silence});

    const ReferenceClips refs = select_reference_clips(mix, fc, order, seed, config);

    const auto x = mix.channel(0);
    auto fill = [&](int ch, const SampleInterval& iv, float gain) {
        auto dst = out.stereo.mutable_channel(ch);
        for (int64_t t = iv.start; t < iv.end; ++t) dst[size_t(t)] = x[size_t(t)] * gain;
    };
    auto flank = [&](int64_t at, bool left) -> int {
        for (const auto& t : fc.solo) {
            if ((left && t.interval.end == at) || (!left && t.interval.start == at)) return t.speaker == order[0] ? 0 : 1;
        }
        return -1;
    };

    for (const auto& iv : fc.overlap) {
        if (iv.length() < config.min_overlap) {
            const int l = flank(iv.start, true);
            const int r = flank(iv.end, false);
            if (l >= 0 && l == r) {
                fill(l, iv, 1.0f);
            } else {
                fill(0, iv, kMinus6dB);
                fill(1, iv, kMinus6dB);
            }
            out.provenance.push_back({iv, Provenance::PassthroughShortOverlap});
            continue;
        }
        try {
            auto res = resolve_overlap(mix, iv, refs, separator, verifier, config);
            auto c1 = out.stereo.mutable_channel(0);
            auto c2 = out.stereo.mutable_channel(1);
            std::copy(res.channel1.begin(), res.channel1.end(), c1.begin() + iv.start);
            std::copy(res.channel2.begin(), res.channel2.end(), c2.begin() + iv.start);
            out.decisions.push_back(res.decision);
            out.provenance.push_back({iv, Provenance::Separated});
        } catch (const Error& e) {
            log::warn(std::string("overlap skipped: ") + e.what());
            fill(0, iv, kMinus6dB);
            fill(1, iv, kMinus6dB);
            out.skipped_overlaps.push_back({iv, e.what()});
            out.provenance.push_back({iv, Provenance::SkippedOverlap});
        }
    }
    std::sort(out.provenance.begin(), out.provenance.end(),
              [](const ProvenanceSpan& a, const ProvenanceSpan& b) { return a.interval.start < b.interval.start; });
    return out;
}

} // namespace stereoforge
