#include "oracles.hpp"

#include "stereoforge/error.hpp"
#include "stereoforge/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace stereoforge;

namespace {

int64_t total(const std::vector<SampleInterval>& v) {
    int64_t s = 0;
    for (const auto& iv : v) s += iv.length();
    return s;
}

std::vector<float> tone(int64_t n, double amp = 0.5) {
    std::vector<float> x(static_cast<size_t>(n));
    for (size_t t = 0; t < x.size(); ++t) x[t] = float(amp * std::sin(2.0 * std::numbers::pi * 500.0 * double(t) / 16000.0));
    return x;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

} // namespace

TEST(Vad, AllZerosIsEmpty) {
    EXPECT_TRUE(vad(AudioBuffer(1, 32000, kCanonicalRate)).empty());
    EXPECT_TRUE(vad(AudioBuffer(1, 0, kCanonicalRate)).empty());
}

TEST(Vad, ToneSilenceTone) {
    auto x = tone(16000);
    x.resize(32000, 0.0f);
    const auto t2 = tone(16000);
    x.insert(x.end(), t2.begin(), t2.end());
    const auto s = vad(AudioBuffer::mono(x, kCanonicalRate));
    ASSERT_EQ(s.size(), 2u);
    EXPECT_LE(std::abs(s[0].start - 0), 160);
    EXPECT_LE(std::abs(s[0].end - 16000), 160);
    EXPECT_LE(std::abs(s[1].start - 32000), 160);
    EXPECT_LE(std::abs(s[1].end - 48000), 160);
}

TEST(Vad, ShortBurstsAreDropped) {
    std::vector<float> x(static_cast<size_t>(5 * kCanonicalRate), 0.0f);
    const auto burst = tone(1600);
    for (int k = 0; k < 4; ++k) std::copy(burst.begin(), burst.end(), x.begin() + k * 16000);
    EXPECT_TRUE(vad(AudioBuffer::mono(x, kCanonicalRate)).empty());
    VadParams p;
    p.min_speech_s = 0.05;
    EXPECT_EQ(vad(AudioBuffer::mono(x, kCanonicalRate), p).size(), 4u);
}

TEST(Vad, ParamsValidate) {
    VadParams p;
    p.min_speech_s = 0.001;
    EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::InvalidConfig);
    p = {};
    p.frame_len_s = 0;
    EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::InvalidConfig);
}

TEST(Events, GapExample) {
    const std::vector<SampleInterval> a{{0, 10}}, b{{12, 20}};
    const auto e = extract_events(a, b, 20);
    EXPECT_EQ(e.gap, (std::vector<SampleInterval>{{10, 12}}));
    EXPECT_TRUE(e.pause.empty());
    EXPECT_TRUE(e.overlap.empty());
}

TEST(Events, PauseExample) {
    const std::vector<SampleInterval> a{{0, 10}, {12, 20}}, b{};
    const auto e = extract_events(a, b, 20);
    EXPECT_EQ(e.pause, (std::vector<SampleInterval>{{10, 12}}));
    EXPECT_TRUE(e.gap.empty());
}

TEST(Events, OverlapFlankCountsAsBothSpeakers) {
    // ch1 [0,10), ch2 [5,10), silence, ch1 [12,20): the left flank is an overlap.
    const std::vector<SampleInterval> a{{0, 10}, {12, 20}}, b{{5, 10}};
    const auto e = extract_events(a, b, 20);
    EXPECT_EQ(e.gap, (std::vector<SampleInterval>{{10, 12}}));
    EXPECT_EQ(e.overlap, (std::vector<SampleInterval>{{5, 10}}));
}

TEST(Events, MalformedIntervals) {
    const std::vector<SampleInterval> ok{{0, 5}};
    EXPECT_EQ(code_of([&] { extract_events(std::vector<SampleInterval>{{5, 3}}, ok, 10); }), ErrorCode::MalformedIntervals);
    EXPECT_EQ(code_of([&] { extract_events(std::vector<SampleInterval>{{0, 5}, {4, 8}}, ok, 10); }),
              ErrorCode::MalformedIntervals);
    EXPECT_EQ(code_of([&] { extract_events(ok, std::vector<SampleInterval>{{8, 11}}, 10); }), ErrorCode::MalformedIntervals);
}

TEST(Events, PerSampleOracle) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int64_t> len_d(1, 10000);
    for (int it = 0; it < 1500; ++it) {
        const int64_t n = len_d(rng);
        const auto s1 = oracle::random_intervals(rng, n, 12);
        const auto s2 = oracle::random_intervals(rng, n, 12);
        const auto e = extract_events(s1, s2, n);
        const auto lab = oracle::event_labels(s1, s2, n);
        ASSERT_EQ(e.overlap, oracle::runs(lab, 'O')) << "instance " << it;
        ASSERT_EQ(e.single, oracle::runs(lab, 'S')) << "instance " << it;
        // Adjacent gap and pause runs stay separate events when they meet, which they never do.
        ASSERT_EQ(e.gap, oracle::runs(lab, 'G')) << "instance " << it;
        ASSERT_EQ(e.pause, oracle::runs(lab, 'P')) << "instance " << it;
        ASSERT_EQ(e.ipu[0], s1);
        ASSERT_EQ(e.ipu[1], s2);
        ASSERT_EQ(total(e.gap) + total(e.pause) + total(e.overlap) + total(e.single), n);
        ASSERT_EQ(total(s1) + total(s2), total(e.single) + 2 * total(e.overlap));
    }
}

TEST(Events, ChannelSwapInvariance) {
    std::mt19937_64 rng(5);
    for (int it = 0; it < 300; ++it) {
        const int64_t n = std::uniform_int_distribution<int64_t>(1, 5000)(rng);
        const auto s1 = oracle::random_intervals(rng, n, 8);
        const auto s2 = oracle::random_intervals(rng, n, 8);
        const auto e = extract_events(s1, s2, n), f = extract_events(s2, s1, n);
        ASSERT_EQ(e.gap, f.gap);
        ASSERT_EQ(e.pause, f.pause);
        ASSERT_EQ(e.overlap, f.overlap);
        ASSERT_EQ(e.ipu[0], f.ipu[1]);
        const std::vector<TurnTakingEvents> a{e}, b{f};
        const auto sa = aggregate(a, kCanonicalRate).stats, sb = aggregate(b, kCanonicalRate).stats;
        ASSERT_EQ(sa.ipu.dur_mean_s, sb.ipu.dur_mean_s);
        ASSERT_EQ(sa.pause.occur_mean, sb.pause.occur_mean);
        ASSERT_EQ(sa.gap.dur_mean_s, sb.gap.dur_mean_s);
    }
}

TEST(Events, AppendingSilenceIsMonotone) {
    std::mt19937_64 rng(6);
    for (int it = 0; it < 300; ++it) {
        const int64_t n = std::uniform_int_distribution<int64_t>(1, 5000)(rng);
        const int64_t extra = std::uniform_int_distribution<int64_t>(1, 500)(rng);
        const auto s1 = oracle::random_intervals(rng, n, 8);
        const auto s2 = oracle::random_intervals(rng, n, 8);
        const auto e = extract_events(s1, s2, n), f = extract_events(s1, s2, n + extra);
        const int64_t before = total(e.gap) + total(e.pause), after = total(f.gap) + total(f.pause);
        ASSERT_EQ(after, before + extra);
        ASSERT_EQ(f.overlap, e.overlap);
        ASSERT_EQ(f.single, e.single);
        const auto count = [](const TurnTakingEvents& x) { return x.gap.size() + x.pause.size(); };
        ASSERT_LE(count(f) - count(e), 1u);
        // Only the trailing silence may change.
        size_t changed = 0;
        for (size_t k = 0; k < f.pause.size(); ++k) changed += k >= e.pause.size() || f.pause[k] != e.pause[k];
        for (size_t k = 0; k < f.gap.size(); ++k) changed += k >= e.gap.size() || f.gap[k] != e.gap[k];
        ASSERT_EQ(changed, 1u);
    }
}

TEST(Aggregate, HandTrace) {
    // Dialogue 1, 160 samples: ch1 [0,32) [48,96), ch2 [80,128). Gap none, pause [32,48), overlap [80,96), trailing pause.
    // Dialogue 2, 320 samples: ch1 [0,160), ch2 [176,320).
    const std::vector<SampleInterval> a1{{0, 32}, {48, 96}}, b1{{80, 128}};
    const std::vector<SampleInterval> a2{{0, 160}}, b2{{176, 320}};
    const std::vector<TurnTakingEvents> d{extract_events(a1, b1, 160), extract_events(a2, b2, 320)};
    EXPECT_EQ(d[0].pause, (std::vector<SampleInterval>{{32, 48}, {128, 160}}));
    EXPECT_EQ(d[1].gap, (std::vector<SampleInterval>{{160, 176}}));
    const double sr = 16.0;  // one "second" is 16 samples
    const auto s = aggregate(d, int(sr));
    EXPECT_DOUBLE_EQ(s.stats.ipu.dur_mean_s, ((32 + 48 + 48) + (160 + 144)) / sr / 2.0);
    EXPECT_DOUBLE_EQ(s.stats.ipu.occur_mean, (3 + 2) / 2.0);
    EXPECT_DOUBLE_EQ(s.stats.pause.dur_mean_s, (16 + 32) / sr / 2.0);
    EXPECT_DOUBLE_EQ(s.stats.pause.occur_mean, 1.0);
    EXPECT_DOUBLE_EQ(s.stats.gap.dur_mean_s, 16 / sr / 2.0);
    EXPECT_DOUBLE_EQ(s.stats.gap.occur_mean, 0.5);
    EXPECT_DOUBLE_EQ(s.stats.overlap.dur_mean_s, 16 / sr / 2.0);
    EXPECT_DOUBLE_EQ(s.stats.overlap.occur_mean, 0.5);
    EXPECT_DOUBLE_EQ(s.length_min_s, 10.0);
    EXPECT_DOUBLE_EQ(s.length_max_s, 20.0);
    EXPECT_FALSE(s.delta.has_value());
}

TEST(Aggregate, ReferenceAndDeltas) {
    const auto ref = builtin_reference("fisher-table1");
    ASSERT_TRUE(ref.has_value());
    EXPECT_EQ(ref->stats.ipu.dur_mean_s, 56.86);
    EXPECT_EQ(ref->stats.ipu.occur_mean, 19.86);
    EXPECT_EQ(ref->stats.gap.dur_mean_s, 2.61);
    EXPECT_EQ(ref->stats.gap.occur_mean, 2.88);
    EXPECT_EQ(ref->stats.overlap.dur_mean_s, 4.29);
    EXPECT_EQ(ref->stats.overlap.occur_mean, 3.96);
    EXPECT_EQ(ref->stats.pause.dur_mean_s, 4.83);
    EXPECT_EQ(ref->stats.pause.occur_mean, 7.42);
    EXPECT_FALSE(builtin_reference("nope").has_value());

    const std::vector<SampleInterval> a{{0, 32}}, b{{48, 64}};
    const std::vector<TurnTakingEvents> d{extract_events(a, b, 64)};
    const auto s = aggregate(d, 16, ref);
    ASSERT_TRUE(s.delta.has_value());
    EXPECT_DOUBLE_EQ(s.delta->ipu.dur_mean_s, 3.0 - 56.86);
    EXPECT_DOUBLE_EQ(s.delta->gap.occur_mean, 1.0 - 2.88);
    EXPECT_EQ(s.reference_name, "fisher-table1");
    const auto j = report_json(s, {});
    EXPECT_EQ(j["reference_name"], "fisher-table1");
    EXPECT_EQ(j["n_dialogues"], 1);
    EXPECT_TRUE(j["params"].contains("energy_floor_db"));
    EXPECT_NE(report_text(s).find("delta"), std::string::npos);
}

TEST(Aggregate, EmptyCorpus) {
    EXPECT_EQ(code_of([] { aggregate(std::span<const TurnTakingEvents>{}, kCanonicalRate); }), ErrorCode::EmptyCorpus);
}

TEST(Stereo, RequiresTwoChannels) {
    EXPECT_EQ(code_of([] { events_for_stereo(AudioBuffer(1, 100, kCanonicalRate)); }), ErrorCode::NotStereo);
    const auto e = events_for_stereo(AudioBuffer(2, 16000, kCanonicalRate));
    EXPECT_TRUE(e.overlap.empty());
    EXPECT_EQ(e.pause, (std::vector<SampleInterval>{{0, 16000}}));
}
