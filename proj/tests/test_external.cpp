#include "stereoforge/external.hpp"
#include "stereoforge/pipeline.hpp"
#include "stereoforge/synth.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <limits>

using namespace stereoforge;
using namespace std::chrono_literals;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

BackendDescriptor echo(BackendKind kind, const std::string& extra = "") {
    return BackendDescriptor::parse(kind, std::string("external:") + ECHO_BACKEND + " --kind " + to_string(kind) +
                                              (extra.empty() ? "" : " " + extra));
}

std::shared_ptr<ExternalBackend> spawn(BackendKind kind, const std::string& extra = "",
                                       std::chrono::milliseconds req = 10s, std::chrono::milliseconds hs = 10s) {
    return spawn_external_backend(echo(kind, extra), req, hs);
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

SynthDialogue dialogue(uint64_t seed, double dur = 12.0) {
    DialogueScript s;
    s.seed = seed;
    s.duration_s = dur;
    return generate(s);
}

} // namespace

TEST(Handshake, WellBehavedBackend) {
    for (auto kind : {BackendKind::Diarizer, BackendKind::Separator, BackendKind::Verifier}) {
        auto b = spawn(kind);
        EXPECT_EQ(b->kind(), kind);
    }
}

TEST(Handshake, ProtocolVersionMismatch) {
    EXPECT_EQ(code_of([] { spawn(BackendKind::Separator, "--proto 2"); }), ErrorCode::ProtocolVersionMismatch);
}

TEST(Handshake, KindMismatch) {
    EXPECT_EQ(code_of([] { spawn(BackendKind::Separator, "--handshake-kind verifier"); }), ErrorCode::BackendFailure);
}

TEST(Handshake, Timeout) {
    EXPECT_EQ(code_of([] { spawn(BackendKind::Separator, "--handshake-delay-ms 3000", 10s, 300ms); }),
              ErrorCode::HandshakeTimeout);
}

TEST(Handshake, CommandThatExits) {
    const auto d = BackendDescriptor::parse(BackendKind::Verifier, "external:/nonexistent/adapter --kind verifier");
    EXPECT_EQ(code_of([&] { spawn_external_backend(d, 1s, 5s); }), ErrorCode::SpawnError);
}

TEST(Requests, EchoPayloadRoundTripsBitIdentical) {
    auto b = spawn(BackendKind::Verifier);
    const json payload = {{"f", 0.1},
                          {"tiny", 4.9406564584124654e-324},
                          {"big", std::numeric_limits<uint64_t>::max()},
                          {"neg", -123456789012345},
                          {"s", "turn \"taking\"\té中"},
                          {"list", {1.0 / 3.0, -0.0, 1e300}},
                          {"nested", {{"k", nullptr}, {"b", true}}}};
    const auto resp = b->request("echo", {{"payload", payload}});
    EXPECT_EQ(resp["result"], payload);
    EXPECT_EQ(resp["result"].dump(), payload.dump());
}

TEST(Requests, KilledMidRequestReportsRequestId) {
    auto b = spawn(BackendKind::Separator, "--die-after 1");
    b->request("echo", {{"payload", 1}});
    try {
        b->request("echo", {{"payload", 2}});
        FAIL() << "expected a failure";
    } catch (const BackendError& e) {
        EXPECT_EQ(e.code(), ErrorCode::BackendFailure);
        EXPECT_EQ(e.request_id(), 2u);
        EXPECT_NE(std::string(e.what()).find("request 2"), std::string::npos);
    }
    // The next call gets a fresh process.
    EXPECT_EQ(b->request("echo", {{"payload", 3}})["result"], 3);
}

TEST(Requests, Timeout) {
    auto b = spawn(BackendKind::Separator, "--hang-after 0", 300ms);
    try {
        b->request("echo", {{"payload", 1}});
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.code(), ErrorCode::Timeout);
        EXPECT_EQ(e.request_id(), 1u);
    }
}

TEST(Requests, FailureResponseKeepsProcess) {
    auto b = spawn(BackendKind::Verifier);
    EXPECT_EQ(code_of([&] { b->request("no-such-op", {}); }), ErrorCode::BackendFailure);
    EXPECT_EQ(b->request("echo", {{"payload", "still here"}})["result"], "still here");
}

TEST(Requests, ProtocolViolations) {
    EXPECT_EQ(code_of([] { spawn(BackendKind::Verifier, "--bad-json-after 0")->request("echo", {}); }),
              ErrorCode::BackendFailure);
    EXPECT_EQ(code_of([] { spawn(BackendKind::Verifier, "--wrong-id")->request("echo", {}); }), ErrorCode::BackendFailure);
}

TEST(ExternalSeparator, AudioRoundTripIsBitIdentical) {
    ExternalSeparator sep(spawn(BackendKind::Separator, "--separator-mode echo"));
    const auto d = dialogue(1);
    const auto pair = sep.separate(d.mix);
    EXPECT_EQ(pair.first, d.mix);
    for (float v : pair.second.channel(0)) ASSERT_EQ(v, 0.0f);
}

TEST(ExternalSeparator, MatchesBuiltin) {
    ExternalSeparator ext(spawn(BackendKind::Separator));
    BandSplitSeparator builtin;
    const auto d = dialogue(2);
    const auto a = ext.separate(d.mix), b = builtin.separate(d.mix);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(ExternalSeparator, WrongLengthIsRejected) {
    ExternalSeparator sep(spawn(BackendKind::Separator, "--wrong-length"));
    EXPECT_EQ(code_of([&] { sep.separate(dialogue(3).mix); }), ErrorCode::BackendFailure);
}

TEST(ExternalVerifier, OutOfRangeSimilarityIsRejected) {
    ExternalVerifier v(spawn(BackendKind::Verifier, "--similarity 1.7"));
    const auto d = dialogue(4);
    EXPECT_EQ(code_of([&] { v.verify(d.mix, d.mix); }), ErrorCode::BackendFailure);
}

TEST(ExternalVerifier, MatchesBuiltin) {
    ExternalVerifier ext(spawn(BackendKind::Verifier));
    BandEnergyVerifier builtin;
    const auto d = dialogue(5);
    const auto a = d.mix.slice({0, 4 * kCanonicalRate}), b = d.mix.slice({4 * kCanonicalRate, 9 * kCanonicalRate});
    EXPECT_EQ(ext.verify(a, b).value, builtin.verify(a, b).value);
}

TEST(ExternalDiarizer, MatchesBuiltin) {
    ExternalDiarizer ext(spawn(BackendKind::Diarizer), 3200);
    BandEnergyDiarizer builtin;
    const auto d = dialogue(6, 30.0);
    EXPECT_EQ(ext.diarize(d.mix), builtin.diarize(d.mix));
}

TEST(Scratch, HonoursTmpdirAndCleansUp) {
    const auto root = fs::temp_directory_path() / ("sf_scratch_" + std::to_string(::getpid()));
    fs::create_directories(root);
    ::setenv("STEREOFORGE_TMPDIR", root.c_str(), 1);
    EXPECT_EQ(temp_root(), root);
    {
        auto b = spawn(BackendKind::Separator);
        EXPECT_EQ(b->scratch_dir().parent_path(), root);
        ExternalSeparator sep(b);
        sep.separate(dialogue(7, 3.0).mix);
        size_t wavs = 0;
        for (const auto& e : fs::recursive_directory_iterator(b->scratch_dir())) wavs += e.path().extension() == ".wav";
        EXPECT_EQ(wavs, 0u);
    }
    EXPECT_TRUE(fs::is_empty(root));
    ::unsetenv("STEREOFORGE_TMPDIR");
    fs::remove_all(root);
}

// ---------------------------------------------------------------------------

namespace {

BackendOptions echo_options(const std::string& extra = "") {
    BackendOptions o;
    o.diarizer = echo(BackendKind::Diarizer, extra);
    o.separator = echo(BackendKind::Separator, extra);
    o.verifier = echo(BackendKind::Verifier, extra);
    o.request_timeout = 2s;
    o.handshake_timeout = 5s;
    return o;
}

const std::vector<BackendKind> kAll{BackendKind::Diarizer, BackendKind::Separator, BackendKind::Verifier};

} // namespace

TEST(ContractSuite, BuiltinsPass) {
    BackendOptions o;
    o.diarizer = BackendDescriptor::parse(BackendKind::Diarizer, "builtin:oracle");
    for (const auto& r : check_backends(o, kAll)) EXPECT_TRUE(r.passed) << r.backend << " " << r.contract << ": " << r.detail;
    o.diarizer = BackendDescriptor::parse(BackendKind::Diarizer, "builtin:band-energy");
    for (const auto& r : check_backends(o, {BackendKind::Diarizer})) EXPECT_TRUE(r.passed) << r.contract << ": " << r.detail;
}

TEST(ContractSuite, EchoBackendPasses) {
    const auto results = check_backends(echo_options(), kAll);
    EXPECT_GE(results.size(), 8u);
    for (const auto& r : results) EXPECT_TRUE(r.passed) << r.backend << " " << r.contract << ": " << r.detail;
}

TEST(ContractSuite, RangeViolationFails) {
    bool flagged = false;
    for (const auto& r : check_backends(echo_options("--similarity 1.7"), {BackendKind::Verifier}))
        if (r.contract == "similarity-range") flagged = !r.passed;
    EXPECT_TRUE(flagged);
}

TEST(ContractSuite, TimeoutFails) {
    auto o = echo_options("--hang-after 0");
    o.request_timeout = 300ms;
    const auto results = check_backends(o, {BackendKind::Separator});
    bool timed_out = false;
    for (const auto& r : results)
        if (!r.passed && r.detail.find("Timeout") != std::string::npos) timed_out = true;
    EXPECT_TRUE(timed_out);
}

TEST(ContractSuite, WrongLengthFails) {
    size_t failed = 0;
    for (const auto& r : check_backends(echo_options("--wrong-length"), {BackendKind::Separator}))
        failed += r.contract.rfind("length-preservation", 0) == 0 && !r.passed;
    EXPECT_EQ(failed, 3u);
}
