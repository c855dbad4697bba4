#include "stereoforge/metrics.hpp"

#include "stereoforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace stereoforge {

using nlohmann::json;

void VadParams::validate() const {
    if (!(frame_len_s > 0.0) || !(min_speech_s > 0.0) || !(min_silence_s > 0.0))
        throw Error(ErrorCode::InvalidConfig, "VAD durations must be positive");
    if (min_speech_s < frame_len_s) throw Error(ErrorCode::InvalidConfig, "min_speech must be >= frame_len");
}

void to_json(json& j, const VadParams& p) {
    j = json{{"frame_len_s", p.frame_len_s},
             {"energy_floor_db", p.energy_floor_db},
             {"min_speech_s", p.min_speech_s},
             {"min_silence_s", p.min_silence_s}};
}

void from_json(const json& j, VadParams& p) {
    p.frame_len_s = j.value("frame_len_s", p.frame_len_s);
    p.energy_floor_db = j.value("energy_floor_db", p.energy_floor_db);
    p.min_speech_s = j.value("min_speech_s", p.min_speech_s);
    p.min_silence_s = j.value("min_silence_s", p.min_silence_s);
}

std::vector<SampleInterval> vad(const AudioBuffer& channel, const VadParams& params) {
    params.validate();
    if (channel.channels() != 1) throw Error(ErrorCode::ChannelCountMismatch, "vad expects a mono channel");
    const int64_t n = channel.frames();
    if (n == 0) return {};
    const int64_t flen = std::max<int64_t>(1, std::llround(params.frame_len_s * channel.sample_rate()));
    const size_t frames = size_t((n + flen - 1) / flen);
    const auto x = channel.channel(0);

    std::vector<double> energy(frames, 0.0);
    for (size_t f = 0; f < frames; ++f) {
        const int64_t s = int64_t(f) * flen, e = std::min(n, s + flen);
        double acc = 0.0;
        for (int64_t t = s; t < e; ++t) acc += double(x[size_t(t)]) * double(x[size_t(t)]);
        energy[f] = acc / double(e - s);
    }
    auto sorted = energy;
    std::sort(sorted.begin(), sorted.end());
    const size_t rank = size_t(std::ceil(0.95 * double(frames)));
    const double ref = sorted[std::min(frames - 1, rank == 0 ? 0 : rank - 1)];
    const double thr = std::max(ref * std::pow(10.0, params.energy_floor_db / 10.0), 1e-10);

    std::vector<bool> speech(frames);
    for (size_t f = 0; f < frames; ++f) speech[f] = energy[f] > thr;

    const size_t min_sil = size_t(std::max<int64_t>(1, std::llround(params.min_silence_s / params.frame_len_s)));
    const size_t min_sp = size_t(std::max<int64_t>(1, std::llround(params.min_speech_s / params.frame_len_s)));
    auto for_runs = [&](bool value, auto&& fn) {
        size_t i = 0;
        while (i < frames) {
            if (speech[i] != value) {
                ++i;
                continue;
            }
            size_t j = i;
            while (j < frames && speech[j] == value) ++j;
            fn(i, j);
            i = j;
        }
    };
    for_runs(false, [&](size_t i, size_t j) {
        if (i > 0 && j < frames && j - i < min_sil) std::fill(speech.begin() + long(i), speech.begin() + long(j), true);
    });
    for_runs(true, [&](size_t i, size_t j) {
        if (j - i < min_sp) std::fill(speech.begin() + long(i), speech.begin() + long(j), false);
    });

    std::vector<SampleInterval> out;
    for_runs(true, [&](size_t i, size_t j) { out.push_back({int64_t(i) * flen, std::min(n, int64_t(j) * flen)}); });
    return out;
}

namespace {

void check_intervals(std::span<const SampleInterval> s, int64_t total_len, const char* which) {
    int64_t prev = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i].end <= s[i].start || s[i].start < 0 || s[i].end > total_len || (i > 0 && s[i].start < prev))
            throw Error(ErrorCode::MalformedIntervals, std::string(which) + " interval " + std::to_string(i) + " [" +
                                                           std::to_string(s[i].start) + ", " + std::to_string(s[i].end) +
                                                           ") is not sorted, disjoint and within the timeline");
        prev = s[i].end;
    }
}

void append(std::vector<SampleInterval>& v, SampleInterval iv) {
    if (!v.empty() && v.back().end == iv.start) v.back().end = iv.end;
    else v.push_back(iv);
}

} // namespace

TurnTakingEvents extract_events(std::span<const SampleInterval> speech1, std::span<const SampleInterval> speech2,
                                int64_t total_len) {
    check_intervals(speech1, total_len, "channel 1");
    check_intervals(speech2, total_len, "channel 2");
    TurnTakingEvents ev;
    ev.total_len = total_len;
    ev.ipu[0].assign(speech1.begin(), speech1.end());
    ev.ipu[1].assign(speech2.begin(), speech2.end());

    // Maximal pieces of constant (ch1 active, ch2 active) state.
    struct Piece {
        SampleInterval iv;
        bool a, b;
    };
    std::vector<Piece> pieces;
    size_t i = 0, j = 0;
    int64_t t = 0;
    while (t < total_len) {
        while (i < speech1.size() && speech1[i].end <= t) ++i;
        while (j < speech2.size() && speech2[j].end <= t) ++j;
        const bool a = i < speech1.size() && speech1[i].start <= t;
        const bool b = j < speech2.size() && speech2[j].start <= t;
        int64_t next = total_len;
        if (i < speech1.size()) next = std::min(next, a ? speech1[i].end : speech1[i].start);
        if (j < speech2.size()) next = std::min(next, b ? speech2[j].end : speech2[j].start);
        if (!pieces.empty() && pieces.back().a == a && pieces.back().b == b) pieces.back().iv.end = next;
        else pieces.push_back({{t, next}, a, b});
        t = next;
    }

    for (size_t k = 0; k < pieces.size(); ++k) {
        const auto& p = pieces[k];
        if (p.a && p.b) {
            ev.overlap.push_back(p.iv);
        } else if (p.a || p.b) {
            append(ev.single, p.iv);
        } else {
            // Flanks: which channels are speaking right before and right after the silence.
            const int left = k > 0 ? int(pieces[k - 1].a) + 2 * int(pieces[k - 1].b) : 0;
            const int right = k + 1 < pieces.size() ? int(pieces[k + 1].a) + 2 * int(pieces[k + 1].b) : 0;
            bool gap;
            if (left == 3 || right == 3) gap = true;
            else if (left == 0 || right == 0) gap = false;
            else gap = left != right;
            (gap ? ev.gap : ev.pause).push_back(p.iv);
        }
    }
    return ev;
}

TurnTakingEvents events_for_stereo(const AudioBuffer& stereo, const VadParams& params) {
    if (stereo.channels() != 2)
        throw Error(ErrorCode::NotStereo, "turn-taking analysis needs 2 channels, got " + std::to_string(stereo.channels()));
    std::array<std::vector<SampleInterval>, 2> speech;
    for (int c = 0; c < 2; ++c) {
        std::vector<float> ch(stereo.channel(c).begin(), stereo.channel(c).end());
        speech[size_t(c)] = vad(AudioBuffer::mono(std::move(ch), stereo.sample_rate()), params);
    }
    return extract_events(speech[0], speech[1], stereo.frames());
}

std::optional<NamedReference> builtin_reference(const std::string& name) {
    if (name == "fisher-table1") {
        NamedReference r;
        r.name = name;
        r.stats.ipu = {56.86, 19.86};
        r.stats.gap = {2.61, 2.88};
        r.stats.overlap = {4.29, 3.96};
        r.stats.pause = {4.83, 7.42};
        return r;
    }
    return std::nullopt;
}

TurnTakingStats aggregate(std::span<const TurnTakingEvents> dialogues, int sample_rate,
                          const std::optional<NamedReference>& reference) {
    if (dialogues.empty()) throw Error(ErrorCode::EmptyCorpus, "no dialogues to aggregate");
    struct Sum {
        int64_t samples = 0;
        int64_t count = 0;
    };
    Sum ipu, gap, overlap, pause;
    auto add = [](Sum& s, const std::vector<SampleInterval>& v) {
        for (const auto& iv : v) s.samples += iv.length();
        s.count += int64_t(v.size());
    };
    TurnTakingStats out;
    out.n_dialogues = dialogues.size();
    out.length_min_s = std::numeric_limits<double>::infinity();
    double len_sum = 0.0;
    for (const auto& d : dialogues) {
        add(ipu, d.ipu[0]);
        add(ipu, d.ipu[1]);
        add(gap, d.gap);
        add(overlap, d.overlap);
        add(pause, d.pause);
        const double len = double(d.total_len) / sample_rate;
        out.length_min_s = std::min(out.length_min_s, len);
        out.length_max_s = std::max(out.length_max_s, len);
        len_sum += len;
    }
    const double n = double(dialogues.size());
    out.length_mean_s = len_sum / n;
    auto mean = [&](const Sum& s) {
        return EventStat{double(s.samples) / sample_rate / n, double(s.count) / n};
    };
    out.stats = {mean(ipu), mean(gap), mean(overlap), mean(pause)};
    if (reference) {
        auto diff = [](const EventStat& a, const EventStat& b) {
            return EventStat{a.dur_mean_s - b.dur_mean_s, a.occur_mean - b.occur_mean};
        };
        const auto& r = reference->stats;
        out.delta = StatBlock{diff(out.stats.ipu, r.ipu), diff(out.stats.gap, r.gap), diff(out.stats.overlap, r.overlap),
                              diff(out.stats.pause, r.pause)};
        out.reference_name = reference->name;
    }
    return out;
}

namespace {

json block_json(const StatBlock& b) {
    auto e = [](const EventStat& s) { return json{{"dur_mean_s", s.dur_mean_s}, {"occur_mean", s.occur_mean}}; };
    return json{{"ipu", e(b.ipu)}, {"gap", e(b.gap)}, {"pause", e(b.pause)}, {"overlap", e(b.overlap)}};
}

} // namespace

json report_json(const TurnTakingStats& stats, const VadParams& params) {
    json j;
    j["params"] = params;
    j["n_dialogues"] = stats.n_dialogues;
    j["stats"] = block_json(stats.stats);
    j["delta"] = stats.delta ? block_json(*stats.delta) : json(nullptr);
    j["reference_name"] = stats.delta ? json(stats.reference_name) : json(nullptr);
    j["dialogue_length_s"] = {{"min", stats.length_min_s}, {"mean", stats.length_mean_s}, {"max", stats.length_max_s}};
    return j;
}

std::string report_text(const TurnTakingStats& stats) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s | %-23s | %-23s | %-23s | %-23s\n", "", "IPU", "Gap", "Overlap", "Pause");
    os << buf;
    std::snprintf(buf, sizeof buf, "%-10s | %-11s %-11s | %-11s %-11s | %-11s %-11s | %-11s %-11s\n", "", "Dur.",
                  "Occur.", "Dur.", "Occur.", "Dur.", "Occur.", "Dur.", "Occur.");
    os << buf;
    auto row = [&](const char* name, const StatBlock& b) {
        std::snprintf(buf, sizeof buf, "%-10s | %-11.2f %-11.2f | %-11.2f %-11.2f | %-11.2f %-11.2f | %-11.2f %-11.2f\n",
                      name, b.ipu.dur_mean_s, b.ipu.occur_mean, b.gap.dur_mean_s, b.gap.occur_mean,
                      b.overlap.dur_mean_s, b.overlap.occur_mean, b.pause.dur_mean_s, b.pause.occur_mean);
        os << buf;
    };
    row("value", stats.stats);
    if (stats.delta) row("delta", *stats.delta);
    os << "dialogues: " << stats.n_dialogues;
    if (stats.delta) os << "  reference: " << stats.reference_name;
    os << '\n';
    return os.str();
}

} // namespace stereoforge
