#include "oracles.hpp"

#include "stereoforge/error.hpp"
#include "stereoforge/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace stereoforge;
namespace fs = std::filesystem;

namespace {

DialogueScript script(uint64_t seed, double dur, double overlap = 0.15) {
    DialogueScript s;
    s.seed = seed;
    s.duration_s = dur;
    s.overlap_prob = overlap;
    return s;
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

TEST(Synth, SameSeedIsBitIdentical) {
    const auto a = generate(script(9, 20)), b = generate(script(9, 20));
    EXPECT_EQ(a.mix, b.mix);
    EXPECT_EQ(a.truth, b.truth);
    EXPECT_EQ(a.annotation, b.annotation);
    EXPECT_NE(generate(script(10, 20)).mix, a.mix);
}

TEST(Synth, ZeroOverlapProbabilityGivesNoOverlap) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = generate(script(seed, 60, 0.0));
        EXPECT_TRUE(classify_frames(d.annotation).overlap.empty());
    }
}

TEST(Synth, SelfConsistencyOracle) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int it = 0; it < 50; ++it) {
        auto s = script(rng(), 5.0 + 40.0 * u(rng), 0.4 * u(rng));
        s.pause_prob = 0.5 * u(rng);
        s.turn_log_mean = 0.3 + u(rng);
        const auto d = generate(s);
        ASSERT_EQ(d.truth.channels(), 2);
        ASSERT_EQ(d.mix, mixdown(d.truth));
        ASSERT_EQ(d.annotation.total_len, d.mix.frames());
        for (int c = 0; c < 2; ++c) {
            const auto on = oracle::activity(d.annotation, "spk" + std::to_string(c));
            const auto x = d.truth.channel(c);
            for (size_t t = 0; t < on.size(); ++t) ASSERT_EQ(on[t], x[t] != 0.0f) << "item " << it << " ch " << c << " t " << t;
        }
    }
}

TEST(Synth, OverlapRatioTracksTarget) {
    for (double p : {0.1, 0.15, 0.25}) {
        for (uint64_t seed : {1, 2, 3}) {
            const auto d = generate(script(seed, 180, p));
            const auto fc = classify_frames(d.annotation);
            int64_t ov = 0, speech = 0;
            for (const auto& iv : fc.overlap) ov += iv.length();
            for (const auto& t : fc.solo) speech += t.interval.length();
            speech += ov;
            const double ratio = double(ov) / double(speech);
            EXPECT_NEAR(ratio, p, 0.2 * p) << "p " << p << " seed " << seed;
        }
    }
}

TEST(Synth, InvalidScript) {
    auto s = script(1, 10);
    s.speakers[1].f_lo_hz = 900.0;  // within 500 Hz of the other band
    EXPECT_EQ(code_of([&] { generate(s); }), ErrorCode::InvalidScript);
    s = script(1, 0.5);
    EXPECT_EQ(code_of([&] { generate(s); }), ErrorCode::InvalidScript);
    s = script(1, 10, 1.0);
    EXPECT_EQ(code_of([&] { generate(s); }), ErrorCode::InvalidScript);
}

TEST(Synth, ScriptJsonRoundTrip) {
    auto s = script(77, 33, 0.2);
    s.speakers[0].am_rate_hz = 2.5;
    const nlohmann::json j = s;
    const auto back = j.get<DialogueScript>();
    EXPECT_EQ(nlohmann::json(back), j);
    EXPECT_EQ(generate(back).mix, generate(s).mix);
}

TEST(Synth, CorpusLayout) {
    const auto root = fs::temp_directory_path() / ("sf_synth_" + std::to_string(::getpid()));
    fs::create_directories(root);
    const auto s = script(4, 8);
    const auto d = generate(s);
    write_corpus_item(root, "x", s, d);
    for (const char* f : {"x.mix.wav", "x.truth.wav", "x.truth.tsv", "x.meta.json"}) EXPECT_TRUE(fs::exists(root / f)) << f;
    EXPECT_EQ(read_wav(root / "x.truth.wav"), d.truth);
    EXPECT_EQ(read_wav(root / "x.mix.wav"), d.mix);
    EXPECT_EQ(normalize_annotation(read_annotation(root / "x.truth.tsv", kCanonicalRate), d.mix.frames(), 0), d.annotation);
    fs::remove_all(root);
}
