#pragma once

#include "stereoforge/audio.hpp"
#include "stereoforge/timeline.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace stereoforge {

struct SimilarityScore {
    double value = 0.0;
};

// Two streams of a separated segment, in no particular speaker order.
struct SeparatedPair {
    AudioBuffer first;
    AudioBuffer second;
};

enum class BackendKind { Diarizer, Separator, Verifier };

const char* to_string(BackendKind kind);
BackendKind parse_backend_kind(const std::string& text);

// `builtin:<name>` or `external:<command line>`.
struct BackendDescriptor {
    enum class Transport { Builtin, External };

    BackendKind kind = BackendKind::Diarizer;
    Transport transport = Transport::Builtin;
    std::string target;

    static BackendDescriptor parse(BackendKind kind, const std::string& text);
    std::string to_string() const;
};

struct RecordingContext {
    std::filesystem::path source;
};

class Diarizer {
public:
    virtual ~Diarizer() = default;
    virtual DiarizationAnnotation diarize(const AudioBuffer& audio, const RecordingContext& ctx = {}) = 0;
};

class Separator {
public:
    virtual ~Separator() = default;
    virtual SeparatedPair separate(const AudioBuffer& segment) = 0;
};

class Verifier {
public:
    virtual ~Verifier() = default;
    virtual SimilarityScore verify(const AudioBuffer& reference, const AudioBuffer& candidate) = 0;
};

// Throws unless the buffer is mono at the canonical rate.
void require_canonical_mono(const AudioBuffer& audio, const char* what);

// ---------------------------------------------------------------------------
// Builtin reference backends. These are test-grade: they only work on audio whose
// two speakers occupy disjoint frequency bands, such as the synthetic corpus.

struct FrequencyBand {
    double lo_hz = 0.0;
    double hi_hz = 0.0;
};

// Reads ground truth from a sidecar `<id>.truth.tsv` (or `<stem>.tsv`) next to the source.
class OracleDiarizer final : public Diarizer {
public:
    explicit OracleDiarizer(int64_t merge_gap = 3200) : merge_gap_(merge_gap) {}
    DiarizationAnnotation diarize(const AudioBuffer& audio, const RecordingContext& ctx = {}) override;

    static std::filesystem::path sidecar_for(const std::filesystem::path& source);

private:
    int64_t merge_gap_;
};

struct BandEnergyDiarizerParams {
    FrequencyBand band_a{150.0, 900.0};
    FrequencyBand band_b{1300.0, 4000.0};
    int n_fft = 256;
    int hop = 160;
    double threshold_db = -30.0;  // relative to the band's 95th-percentile frame energy
    double min_speech_s = 0.1;
    double min_silence_s = 0.1;
    int64_t merge_gap = 3200;
};

class BandEnergyDiarizer final : public Diarizer {
public:
    explicit BandEnergyDiarizer(BandEnergyDiarizerParams params = {}) : params_(params) {}
    DiarizationAnnotation diarize(const AudioBuffer& audio, const RecordingContext& ctx = {}) override;

private:
    BandEnergyDiarizerParams params_;
};

struct BandSplitSeparatorParams {
    double cutoff_hz = 1000.0;
    int taps = 513;
};

// Complementary linear-phase low/high split: first + second reproduces the input.
class BandSplitSeparator final : public Separator {
public:
    explicit BandSplitSeparator(BandSplitSeparatorParams params = {});
    SeparatedPair separate(const AudioBuffer& segment) override;

private:
    BandSplitSeparatorParams params_;
    std::vector<double> lowpass_;
};

struct BandEnergyVerifierParams {
    int n_bands = 16;
    int n_fft = 512;
    int hop = 256;
    double min_len_s = 0.5;
};

// Embedding: mean-removed log energies over mel-spaced bands, unit normalised. Score: cosine.
class BandEnergyVerifier final : public Verifier {
public:
    explicit BandEnergyVerifier(BandEnergyVerifierParams params = {});
    SimilarityScore verify(const AudioBuffer& reference, const AudioBuffer& candidate) override;

    std::vector<double> embedding(const AudioBuffer& audio) const;

private:
    BandEnergyVerifierParams params_;
    std::vector<std::vector<double>> filterbank_;
};

// ---------------------------------------------------------------------------

struct BackendOptions {
    BackendDescriptor diarizer = BackendDescriptor::parse(BackendKind::Diarizer, "builtin:oracle");
    BackendDescriptor separator = BackendDescriptor::parse(BackendKind::Separator, "builtin:band-split");
    BackendDescriptor verifier = BackendDescriptor::parse(BackendKind::Verifier, "builtin:band-energy");
    std::chrono::milliseconds request_timeout{300'000};
    std::chrono::milliseconds handshake_timeout{120'000};
    int64_t merge_gap = 3200;
    BandEnergyDiarizerParams band_diarizer;
    BandSplitSeparatorParams band_split;
    BandEnergyVerifierParams band_verifier;
};

struct BackendSet {
    std::unique_ptr<Diarizer> diarizer;
    std::unique_ptr<Separator> separator;
    std::unique_ptr<Verifier> verifier;

    bool any_external = false;
};

std::unique_ptr<Diarizer> make_diarizer(const BackendOptions& opts);
std::unique_ptr<Separator> make_separator(const BackendOptions& opts);
std::unique_ptr<Verifier> make_verifier(const BackendOptions& opts);
BackendSet make_backends(const BackendOptions& opts);

} // namespace stereoforge
