#include "stereoforge/synth.hpp"

#include "stereoforge/dsp.hpp"
#include "stereoforge/error.hpp"
#include "stereoforge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace stereoforge {

using nlohmann::json;

void DialogueScript::validate() const {
    auto bad = [](const std::string& why) { return Error(ErrorCode::InvalidScript, why); };
    if (sample_rate <= 0) throw bad("sample_rate must be positive");
    if (!(duration_s >= 1.0)) throw bad("duration_s must be at least 1 s");
    if (!(overlap_prob >= 0.0 && overlap_prob < 1.0)) throw bad("overlap_prob must lie in [0, 1)");
    if (!(pause_prob >= 0.0 && pause_prob < 1.0)) throw bad("pause_prob must lie in [0, 1)");
    if (!(turn_min_s > 0.0 && turn_min_s <= turn_max_s)) throw bad("need 0 < turn_min_s <= turn_max_s");
    if (!(turn_log_sigma >= 0.0)) throw bad("turn_log_sigma must be >= 0");
    if (!(overlap_min_s > 0.0 && overlap_min_s <= overlap_max_s)) throw bad("need 0 < overlap_min_s <= overlap_max_s");
    if (!(gap_min_s > 0.0 && gap_min_s <= gap_max_s)) throw bad("need 0 < gap_min_s <= gap_max_s");
    if (!(pause_min_s > 0.0 && pause_min_s <= pause_max_s)) throw bad("need 0 < pause_min_s <= pause_max_s");
    if (!(lead_s >= 0.0 && ramp_s > 0.0)) throw bad("lead_s must be >= 0 and ramp_s > 0");
    const double nyquist = sample_rate / 2.0;
    for (const auto& v : speakers) {
        if (!(v.f_lo_hz > 0.0 && v.f_lo_hz < v.f_hi_hz && v.f_hi_hz < nyquist))
            throw bad("voice band must satisfy 0 < f_lo < f_hi < Nyquist");
        if (!(v.level > 0.0 && v.level < 0.5)) throw bad("voice level must lie in (0, 0.5)");
        if (!(v.am_rate_hz >= 0.0)) throw bad("am_rate_hz must be >= 0");
    }
    const auto& a = speakers[0];
    const auto& b = speakers[1];
    const double margin = std::max(b.f_lo_hz - a.f_hi_hz, a.f_lo_hz - b.f_hi_hz);
    if (margin < 500.0) throw bad("voice bands must be disjoint with at least 500 Hz margin");
}

void to_json(json& j, const DialogueScript& s) {
    json voices = json::array();
    for (const auto& v : s.speakers)
        voices.push_back({{"f_lo_hz", v.f_lo_hz}, {"f_hi_hz", v.f_hi_hz}, {"am_rate_hz", v.am_rate_hz}, {"level", v.level}});
    j = json{{"seed", s.seed},
             {"duration_s", s.duration_s},
             {"turn_log_mean", s.turn_log_mean},
             {"turn_log_sigma", s.turn_log_sigma},
             {"turn_min_s", s.turn_min_s},
             {"turn_max_s", s.turn_max_s},
             {"overlap_prob", s.overlap_prob},
             {"pause_prob", s.pause_prob},
             {"overlap_min_s", s.overlap_min_s},
             {"overlap_max_s", s.overlap_max_s},
             {"gap_min_s", s.gap_min_s},
             {"gap_max_s", s.gap_max_s},
             {"pause_min_s", s.pause_min_s},
             {"pause_max_s", s.pause_max_s},
             {"lead_s", s.lead_s},
             {"ramp_s", s.ramp_s},
             {"fir_taps", s.fir_taps},
             {"sample_rate", s.sample_rate},
             {"speakers", voices}};
}

void from_json(const json& j, DialogueScript& s) {
    s.seed = j.value("seed", s.seed);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.turn_log_mean = j.value("turn_log_mean", s.turn_log_mean);
    s.turn_log_sigma = j.value("turn_log_sigma", s.turn_log_sigma);
    s.turn_min_s = j.value("turn_min_s", s.turn_min_s);
    s.turn_max_s = j.value("turn_max_s", s.turn_max_s);
    s.overlap_prob = j.value("overlap_prob", s.overlap_prob);
    s.pause_prob = j.value("pause_prob", s.pause_prob);
    s.overlap_min_s = j.value("overlap_min_s", s.overlap_min_s);
    s.overlap_max_s = j.value("overlap_max_s", s.overlap_max_s);
    s.gap_min_s = j.value("gap_min_s", s.gap_min_s);
    s.gap_max_s = j.value("gap_max_s", s.gap_max_s);
    s.pause_min_s = j.value("pause_min_s", s.pause_min_s);
    s.pause_max_s = j.value("pause_max_s", s.pause_max_s);
    s.lead_s = j.value("lead_s", s.lead_s);
    s.ramp_s = j.value("ramp_s", s.ramp_s);
    s.fir_taps = j.value("fir_taps", s.fir_taps);
    s.sample_rate = j.value("sample_rate", s.sample_rate);
    if (j.contains("speakers")) {
        const auto& v = j.at("speakers");
        if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::InvalidScript, "speakers must list two voices");
        for (size_t i = 0; i < 2; ++i) {
            auto& sp = s.speakers[i];
            sp.f_lo_hz = v[i].value("f_lo_hz", sp.f_lo_hz);
            sp.f_hi_hz = v[i].value("f_hi_hz", sp.f_hi_hz);
            sp.am_rate_hz = v[i].value("am_rate_hz", sp.am_rate_hz);
            sp.level = v[i].value("level", sp.level);
        }
    }
}

namespace {

// Portable uniform and normal draws on top of mt19937_64 (std distributions are implementation-defined).
class Draw {
public:
    explicit Draw(uint64_t seed) : rng_(seed) {}
    double uniform() { return double(rng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 rng_;
};

struct Turn {
    int speaker;
    double start, end;
};

std::vector<Turn> schedule(const DialogueScript& s, Draw& draw) {
    std::vector<Turn> turns;
    const double tail = 0.2;
    const double horizon = s.duration_s - tail;
    std::array<double, 2> last_end{-1e9, -1e9};
    double t = s.lead_s;
    int cur = 0;
    double min_len = 0.0;
    double union_end = 0.0, speech = 0.0, overlapped = 0.0;

    while (t < horizon) {
        double len = std::exp(s.turn_log_mean + s.turn_log_sigma * draw.normal());
        len = std::clamp(len, s.turn_min_s, s.turn_max_s);
        len = std::max(len, min_len);
        const double start = t;
        const double end = std::min(start + len, horizon);
        // Only the horizon can cut a turn this short.
        if (end - start < s.turn_min_s || end <= union_end + 0.3) break;
        turns.push_back({cur, start, end});
        last_end[size_t(cur)] = end;
        speech += end - std::max(start, union_end);
        union_end = std::max(union_end, end);
        min_len = 0.0;

        if (draw.uniform() < s.pause_prob) {
            t = end + draw.uniform(s.pause_min_s, s.pause_max_s);
            continue;
        }
        const int next = 1 - cur;
        cur = next;
        // Feedback on the running overlap ratio keeps it close to the target.
        if (s.overlap_prob > 0.0 && overlapped < s.overlap_prob * speech) {
            double ov = draw.uniform(s.overlap_min_s, s.overlap_max_s);
            ov = std::min(ov, (end - start) - 0.3);
            double onset = end - ov;
            onset = std::max(onset, last_end[size_t(next)] + s.pause_min_s);
            ov = end - onset;
            if (ov >= s.overlap_min_s) {
                overlapped += ov;
                t = onset;
                min_len = ov + 0.6;
                continue;
            }
        }
        t = end + draw.uniform(s.gap_min_s, s.gap_max_s);
    }
    return turns;
}

} // namespace

SynthDialogue generate(const DialogueScript& script) {
    script.validate();
    const int rate = script.sample_rate;
    const int64_t n = int64_t(std::llround(script.duration_s * rate));

    Draw sched_draw(derive_seed(script.seed, "schedule"));
    const auto turns = schedule(script, sched_draw);

    std::vector<std::vector<float>> channels(2, std::vector<float>(size_t(n), 0.0f));
    std::vector<SpeakerTurn> entries;
    const int64_t ramp = std::max<int64_t>(1, std::llround(script.ramp_s * rate));

    for (int k = 0; k < 2; ++k) {
        const auto& voice = script.speakers[size_t(k)];
        Draw noise_draw(derive_seed(script.seed, "voice", uint64_t(k)));
        std::vector<float> white(static_cast<size_t>(n));
        for (auto& v : white) v = float(noise_draw.normal());
        const auto kernel = dsp::design_bandpass(script.fir_taps, voice.f_lo_hz, voice.f_hi_hz, rate);
        auto carrier = dsp::filter_same(white, kernel);
        const double carrier_rms = std::max(rms(carrier), 1e-12);
        const double phase = noise_draw.uniform(0.0, 2.0 * std::numbers::pi);

        auto& out = channels[size_t(k)];
        for (const auto& turn : turns) {
            if (turn.speaker != k) continue;
            const int64_t s = std::llround(turn.start * rate);
            const int64_t e = std::min(n, int64_t(std::llround(turn.end * rate)));
            if (e <= s) continue;
            entries.push_back({"spk" + std::to_string(k), {s, e}});
            const int64_t r = std::min(ramp, (e - s) / 2 == 0 ? int64_t(1) : (e - s) / 2);
            for (int64_t t = s; t < e; ++t) {
                const double tt = double(t - s) / rate;
                const double am = 0.7 + 0.3 * std::sin(2.0 * std::numbers::pi * voice.am_rate_hz * tt + phase);
                double w = 1.0;
                const int64_t from_start = t - s, to_end = e - 1 - t;
                if (from_start < r) w = std::pow(std::sin(0.5 * std::numbers::pi * (double(from_start) + 0.5) / double(r)), 2.0);
                if (to_end < r) w = std::min(w, std::pow(std::sin(0.5 * std::numbers::pi * (double(to_end) + 0.5) / double(r)), 2.0));
                double v = voice.level * carrier[size_t(t)] / carrier_rms * am * w;
                v = std::clamp(v, -0.99, 0.99);
                // Active samples are strictly non-zero so activity can be read back from the audio.
                if (std::abs(v) < 1e-6) v = v < 0.0 ? -1e-6 : 1e-6;
                out[size_t(t)] = float(v);
            }
        }
    }

    SynthDialogue d;
    d.truth = AudioBuffer(std::move(channels), rate);
    d.mix = mixdown(d.truth);
    d.annotation = normalize_annotation(std::move(entries), n, 0);
    return d;
}

void write_corpus_item(const std::filesystem::path& root, const std::string& id, const DialogueScript& script,
                       const SynthDialogue& dialogue) {
    std::filesystem::create_directories(root);
    write_wav(dialogue.mix, root / (id + ".mix.wav"), BitDepth::Float32);
    write_wav(dialogue.truth, root / (id + ".truth.wav"), BitDepth::Float32);
    write_annotation(root / (id + ".truth.tsv"), dialogue.annotation, dialogue.mix.sample_rate());
    json meta;
    meta["id"] = id;
    meta["script"] = script;
    meta["duration_s"] = dialogue.mix.duration_s();
    meta["speakers"] = {"spk0", "spk1"};
    std::ofstream out(root / (id + ".meta.json"), std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write metadata for " + id);
    out << meta.dump(2) << '\n';
}

} // namespace stereoforge
