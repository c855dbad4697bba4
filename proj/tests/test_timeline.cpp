#include "oracles.hpp"

#include "stereoforge/error.hpp"
#include "stereoforge/timeline.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace stereoforge;

namespace {

DiarizationAnnotation ann(std::vector<SpeakerTurn> turns, int64_t n, int64_t merge_gap = 0) {
    return normalize_annotation(std::move(turns), n, merge_gap);
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;  // sentinel: nothing thrown
}

constexpr int64_t S = kCanonicalRate;

} // namespace

TEST(Normalize, MergesSameSpeaker) {
    const auto a = ann({{"A", {0, 10}}, {"A", {5, 20}}}, 30);
    ASSERT_EQ(a.entries.size(), 1u);
    EXPECT_EQ(a.entries[0].interval, (SampleInterval{0, 20}));
}

TEST(Normalize, KeepsCrossSpeakerOverlap) {
    const auto a = ann({{"A", {0, 10}}, {"B", {5, 20}}}, 30);
    ASSERT_EQ(a.entries.size(), 2u);
    EXPECT_EQ(a.entries[0].speaker, "A");
    EXPECT_EQ(a.entries[1].speaker, "B");
}

TEST(Normalize, MergeGapIsStrict) {
    EXPECT_EQ(ann({{"A", {0, 10}}, {"A", {15, 20}}}, 30, 5).entries.size(), 2u);
    EXPECT_EQ(ann({{"A", {0, 10}}, {"A", {14, 20}}}, 30, 5).entries.size(), 1u);
    EXPECT_EQ(ann({{"A", {0, 10}}, {"A", {10, 20}}}, 30, 0).entries.size(), 1u);
}

TEST(Normalize, Errors) {
    EXPECT_EQ(code_of([] { ann({{"A", {5, 5}}}, 10); }), ErrorCode::MalformedAnnotation);
    EXPECT_EQ(code_of([] { ann({{"A", {5, 11}}}, 10); }), ErrorCode::OutOfBounds);
    EXPECT_EQ(code_of([] { ann({{"A", {-1, 3}}}, 10); }), ErrorCode::OutOfBounds);
}

TEST(Normalize, BitmapOracle) {
    std::mt19937_64 rng(101);
    for (int it = 0; it < 1000; ++it) {
        const int64_t n = std::uniform_int_distribution<int64_t>(20, 3000)(rng);
        const int64_t gap = std::uniform_int_distribution<int64_t>(0, 60)(rng);
        const auto raw = oracle::random_turns(rng, n, {"A", "B", "C"}, 12);
        const auto a = normalize_annotation(raw, n, gap);
        for (const std::string s : {"A", "B", "C"}) {
            const auto want = oracle::close_gaps(oracle::activity(raw, s, n), gap);
            ASSERT_EQ(oracle::activity(a, s), want) << "iteration " << it << " speaker " << s;
        }
        for (size_t i = 1; i < a.entries.size(); ++i) ASSERT_LE(a.entries[i - 1].interval.start, a.entries[i].interval.start);
        for (size_t i = 0; i < a.entries.size(); ++i)
            for (size_t j = i + 1; j < a.entries.size(); ++j) {
                if (a.entries[i].speaker != a.entries[j].speaker) continue;
                const auto& x = a.entries[i].interval;
                const auto& y = a.entries[j].interval;
                ASSERT_TRUE(y.start - x.end >= std::max<int64_t>(gap, 1) || x.start - y.end >= std::max<int64_t>(gap, 1));
            }
    }
}

TEST(Classify, DisjointTurns) {
    const auto fc = classify_frames(ann({{"A", {0, 100}}, {"B", {200, 300}}}, 400));
    ASSERT_EQ(fc.solo.size(), 2u);
    EXPECT_EQ(fc.solo[0], (SpeakerTurn{"A", {0, 100}}));
    EXPECT_EQ(fc.solo[1], (SpeakerTurn{"B", {200, 300}}));
    EXPECT_TRUE(fc.overlap.empty());
    EXPECT_EQ(fc.silence, (std::vector<SampleInterval>{{100, 200}, {300, 400}}));
}

TEST(Classify, DefiningOverlapCase) {
    const auto fc = classify_frames(ann({{"A", {0, 200}}, {"B", {100, 300}}}, 300));
    ASSERT_EQ(fc.solo.size(), 2u);
    EXPECT_EQ(fc.solo[0], (SpeakerTurn{"A", {0, 100}}));
    EXPECT_EQ(fc.solo[1], (SpeakerTurn{"B", {200, 300}}));
    EXPECT_EQ(fc.overlap, (std::vector<SampleInterval>{{100, 200}}));
    EXPECT_TRUE(fc.silence.empty());
}

TEST(Classify, SpeakerCount) {
    EXPECT_EQ(code_of([] { classify_frames(ann({{"A", {0, 10}}}, 20)); }), ErrorCode::SpeakerCountError);
    EXPECT_EQ(code_of([] { classify_frames(ann({{"A", {0, 10}}, {"B", {0, 10}}, {"C", {5, 15}}}, 20)); }),
              ErrorCode::SpeakerCountError);
    EXPECT_EQ(code_of([] { classify_frames(DiarizationAnnotation{{}, 20}); }), ErrorCode::SpeakerCountError);
}

TEST(Classify, PerSampleOracle) {
    std::mt19937_64 rng(202);
    for (int it = 0; it < 1000; ++it) {
        const int64_t n = std::uniform_int_distribution<int64_t>(2, 10000)(rng);
        const int64_t gap = std::uniform_int_distribution<int64_t>(0, 40)(rng);
        const auto a = normalize_annotation(oracle::random_turns(rng, n, {"A", "B"}, 15), n, gap);
        const auto fc = classify_frames(a);
        const auto spk = a.speakers();
        ASSERT_EQ(fc.speakers[0], spk[0]);
        ASSERT_EQ(fc.speakers[1], spk[1]);
        ASSERT_EQ(oracle::rasterize(fc), oracle::label_samples(a, fc.speakers)) << "iteration " << it;

        int64_t total = 0;
        for (const auto& s : fc.solo) total += s.interval.length();
        for (const auto& o : fc.overlap) total += o.length();
        for (const auto& s : fc.silence) total += s.length();
        ASSERT_EQ(total, n);

        // Maximality: same-class neighbours never touch.
        for (size_t i = 1; i < fc.overlap.size(); ++i) ASSERT_LT(fc.overlap[i - 1].end, fc.overlap[i].start);
        for (size_t i = 1; i < fc.silence.size(); ++i) ASSERT_LT(fc.silence[i - 1].end, fc.silence[i].start);
        for (size_t i = 0; i < fc.solo.size(); ++i)
            for (size_t j = 0; j < fc.solo.size(); ++j)
                if (i != j && fc.solo[i].speaker == fc.solo[j].speaker) ASSERT_NE(fc.solo[i].interval.end, fc.solo[j].interval.start);

        // Every overlap lies inside one turn of each speaker.
        for (const auto& o : fc.overlap)
            for (const auto& s : fc.speakers) {
                int holders = 0;
                for (const auto& e : a.entries)
                    if (e.speaker == s && e.interval.contains(o)) ++holders;
                ASSERT_EQ(holders, 1);
            }
    }
}

TEST(Classify, SwapSymmetry) {
    std::mt19937_64 rng(303);
    for (int it = 0; it < 200; ++it) {
        const int64_t n = std::uniform_int_distribution<int64_t>(10, 5000)(rng);
        const auto raw = oracle::random_turns(rng, n, {"A", "B"}, 10);
        auto swapped = raw;
        for (auto& t : swapped) t.speaker = t.speaker == "A" ? "B" : "A";
        const auto f1 = classify_frames(normalize_annotation(raw, n, 0));
        const auto f2 = classify_frames(normalize_annotation(swapped, n, 0));
        EXPECT_EQ(f1.overlap, f2.overlap);
        EXPECT_EQ(f1.silence, f2.silence);
        ASSERT_EQ(f1.solo.size(), f2.solo.size());
        for (size_t i = 0; i < f1.solo.size(); ++i) {
            EXPECT_EQ(f1.solo[i].interval, f2.solo[i].interval);
            EXPECT_NE(f1.solo[i].speaker, f2.solo[i].speaker);
        }
    }
}

TEST(Rebase, ClipsAndShifts) {
    const auto a = ann({{"A", {0, 100}}, {"B", {50, 300}}, {"A", {250, 400}}}, 400);
    const auto r = rebase(a, {80, 260});
    EXPECT_EQ(r.total_len, 180);
    ASSERT_EQ(r.entries.size(), 3u);
    EXPECT_EQ(r.entries[0], (SpeakerTurn{"A", {0, 20}}));
    EXPECT_EQ(r.entries[1], (SpeakerTurn{"B", {0, 180}}));
    EXPECT_EQ(r.entries[2], (SpeakerTurn{"A", {170, 180}}));
}

// ---------------------------------------------------------------------------

namespace {

// Alternating A/B turns of fixed length with no gaps over [from, to).
std::vector<SpeakerTurn> alternating(int64_t from, int64_t to, int64_t turn, const std::string& a = "A",
                                     const std::string& b = "B") {
    std::vector<SpeakerTurn> out;
    bool first = true;
    for (int64_t t = from; t < to; t += turn, first = !first) out.push_back({first ? a : b, {t, std::min(to, t + turn)}});
    return out;
}

// Checks the window policy on one annotation with nothing but interval arithmetic.
void check_windows(const DiarizationAnnotation& a, const TimelineParams& p, const std::vector<DialogueWindow>& ws) {
    int64_t prev_end = 0;
    for (const auto& w : ws) {
        const auto& iv = w.source_interval;
        ASSERT_GE(iv.length(), p.min_len);
        ASSERT_LE(iv.length(), p.max_len);
        ASSERT_GE(iv.start, prev_end);
        ASSERT_LE(iv.end, a.total_len);
        prev_end = iv.end;

        std::set<std::string> present;
        for (const auto& e : a.entries)
            if (e.interval.start < iv.end && e.interval.end > iv.start) present.insert(e.speaker);
        ASSERT_EQ(present.size(), 2u) << "window [" << iv.start << ", " << iv.end << ")";
        ASSERT_EQ(w.annotation.speakers().size(), 2u);
        ASSERT_EQ(w.annotation, rebase(a, iv));

        // No overlap of two speakers may straddle a cut.
        for (size_t i = 0; i < a.entries.size(); ++i)
            for (size_t j = i + 1; j < a.entries.size(); ++j) {
                if (a.entries[i].speaker == a.entries[j].speaker) continue;
                const int64_t s = std::max(a.entries[i].interval.start, a.entries[j].interval.start);
                const int64_t e = std::min(a.entries[i].interval.end, a.entries[j].interval.end);
                if (s >= e) continue;
                for (int64_t cut : {iv.start, iv.end}) ASSERT_FALSE(s < cut && cut < e) << "overlap bisected at " << cut;
            }
    }
}

} // namespace

TEST(Windows, ThreeSimultaneousSpeakers) {
    const auto a = ann({{"A", {0, 200 * S}}, {"B", {0, 200 * S}}, {"C", {0, 200 * S}}}, 200 * S);
    EXPECT_TRUE(build_windows(a).empty());
}

TEST(Windows, NinetySecondRegion) {
    const auto a = ann(alternating(5 * S, 95 * S, 3 * S), 200 * S);
    const auto ws = build_windows(a);
    ASSERT_EQ(ws.size(), 1u);
    EXPECT_EQ(ws[0].source_interval, (SampleInterval{5 * S, 95 * S}));
    check_windows(a, {}, ws);
}

TEST(Windows, GreedySplitDropsShortRemainder) {
    const auto a = ann(alternating(0, 250 * S, 4 * S), 250 * S);
    const auto ws = build_windows(a);
    ASSERT_EQ(ws.size(), 2u);
    EXPECT_EQ(ws[0].source_interval, (SampleInterval{0, 120 * S}));
    EXPECT_EQ(ws[1].source_interval, (SampleInterval{120 * S, 240 * S}));
}

TEST(Windows, TooShortRegionYieldsNothing) {
    const auto a = ann(alternating(0, 29 * S, 3 * S), 60 * S);
    EXPECT_TRUE(build_windows(a).empty());
}

TEST(Windows, SingleSpeakerRegionYieldsNothing) {
    const auto a = ann({{"A", {0, 100 * S}}}, 100 * S);
    EXPECT_TRUE(build_windows(a).empty());
}

TEST(Windows, CutSnapsOutOfOverlap) {
    // Overlap straddles the 120 s target; the cut has to move before it.
    auto turns = alternating(0, 118 * S, 2 * S);
    turns.push_back({"A", {118 * S, 122 * S}});
    turns.push_back({"B", {119 * S, 200 * S}});
    const auto a = ann(turns, 200 * S);
    const auto ws = build_windows(a);
    ASSERT_FALSE(ws.empty());
    EXPECT_LE(ws[0].source_interval.end, 119 * S);
    check_windows(a, {}, ws);
}

TEST(Windows, ThirdSpeakerSplitsRegions) {
    auto turns = alternating(0, 60 * S, 3 * S);
    turns.push_back({"C", {61 * S, 63 * S}});
    auto tail = alternating(64 * S, 110 * S, 3 * S);
    turns.insert(turns.end(), tail.begin(), tail.end());
    const auto a = ann(turns, 120 * S);
    const auto ws = build_windows(a);
    ASSERT_EQ(ws.size(), 2u);
    EXPECT_EQ(ws[0].source_interval, (SampleInterval{0, 60 * S}));
    EXPECT_EQ(ws[1].source_interval, (SampleInterval{64 * S, 110 * S}));
    check_windows(a, {}, ws);
}

TEST(Windows, RandomPolicyProperties) {
    std::mt19937_64 rng(404);
    TimelineParams p;
    p.min_len = 3000;
    p.max_len = 12000;
    p.cut_slack = 400;
    p.merge_gap = 0;
    size_t emitted = 0;
    for (int it = 0; it < 400; ++it) {
        const int64_t n = std::uniform_int_distribution<int64_t>(5000, 60000)(rng);
        const int n_spk = std::uniform_int_distribution<int>(2, 4)(rng);
        std::vector<std::string> spk;
        for (int k = 0; k < n_spk; ++k) spk.push_back(std::string(1, char('A' + k)));
        std::vector<SpeakerTurn> raw;
        // Dense two-speaker chatter with occasional intruders.
        int64_t t = std::uniform_int_distribution<int64_t>(0, 500)(rng);
        while (t < n - 10) {
            const int who = std::uniform_int_distribution<int>(0, 99)(rng) < 93 ? int(rng() % 2) : int(rng() % uint64_t(n_spk));
            const int64_t len = std::uniform_int_distribution<int64_t>(50, 1500)(rng);
            raw.push_back({spk[size_t(who)], {t, std::min(n, t + len)}});
            t += std::uniform_int_distribution<int64_t>(-200, 400)(rng) + len;
            t = std::max<int64_t>(t, raw.back().interval.start + 1);
        }
        const auto a = normalize_annotation(raw, n, p.merge_gap);
        const auto ws = build_windows(a, p);
        emitted += ws.size();
        check_windows(a, p, ws);
        if (HasFatalFailure()) {
            ADD_FAILURE() << "iteration " << it;
            return;
        }
    }
    EXPECT_GT(emitted, 100u);
}

// ---------------------------------------------------------------------------

TEST(AnnotationText, RoundsHalfUp) {
    EXPECT_EQ(seconds_to_samples(0.25, 2), 1);
    EXPECT_EQ(seconds_to_samples(0.75, 2), 2);
    EXPECT_EQ(seconds_to_samples(1.25, 2), 3);
    EXPECT_EQ(seconds_to_samples(1.5, 16000), 24000);
}

TEST(AnnotationText, ParseAndRoundTrip) {
    std::istringstream in("# comment\n\n0.000\t1.500\tA\n1.250\t2.000\tB\n");
    const auto turns = parse_annotation(in, 16000);
    ASSERT_EQ(turns.size(), 2u);
    EXPECT_EQ(turns[0], (SpeakerTurn{"A", {0, 24000}}));
    EXPECT_EQ(turns[1], (SpeakerTurn{"B", {20000, 32000}}));

    const auto a = normalize_annotation(turns, 40000, 0);
    std::ostringstream out;
    write_annotation(out, a, 16000);
    std::istringstream back(out.str());
    EXPECT_EQ(normalize_annotation(parse_annotation(back, 16000), 40000, 0), a);
}

TEST(AnnotationText, RejectsMalformedLines) {
    for (const char* text : {"0.0\t1.0\n", "abc\t1.0\tA\n", "0.0\t1.0x\tA\n", "2.0\t1.0\tA\n"}) {
        std::istringstream in(text);
        EXPECT_EQ(code_of([&] { parse_annotation(in, 16000); }), ErrorCode::MalformedAnnotation) << text;
    }
}
