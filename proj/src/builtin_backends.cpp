#include "stereoforge/backends.hpp"

#include "stereoforge/dsp.hpp"
#include "stereoforge/error.hpp"

#include <algorithm>
#include <cmath>

namespace stereoforge {

const char* to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::Diarizer: return "diarizer";
        case BackendKind::Separator: return "separator";
        case BackendKind::Verifier: return "verifier";
    }
    return "unknown";
}

BackendKind parse_backend_kind(const std::string& text) {
    if (text == "diarizer") return BackendKind::Diarizer;
    if (text == "separator") return BackendKind::Separator;
    if (text == "verifier") return BackendKind::Verifier;
    throw Error(ErrorCode::InvalidConfig, "unknown backend kind '" + text + "'");
}

BackendDescriptor BackendDescriptor::parse(BackendKind kind, const std::string& text) {
    BackendDescriptor d;
    d.kind = kind;
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon + 1 >= text.size())
        throw Error(ErrorCode::InvalidConfig, "backend descriptor must be builtin:<name> or external:<command>, got '" + text + "'");
    const std::string scheme = text.substr(0, colon);
    d.target = text.substr(colon + 1);
    if (scheme == "builtin") {
        d.transport = Transport::Builtin;
        static const std::vector<std::string> diarizers{"oracle", "band-energy"};
        static const std::vector<std::string> separators{"band-split"};
        static const std::vector<std::string> verifiers{"band-energy"};
        const auto& allowed = kind == BackendKind::Diarizer    ? diarizers
                              : kind == BackendKind::Separator ? separators
                                                               : verifiers;
        if (std::find(allowed.begin(), allowed.end(), d.target) == allowed.end())
            throw Error(ErrorCode::InvalidConfig, std::string("no builtin ") + stereoforge::to_string(kind) + " named '" + d.target + "'");
    } else if (scheme == "external") {
        d.transport = Transport::External;
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown backend transport '" + scheme + "'");
    }
    return d;
}

std::string BackendDescriptor::to_string() const {
    return std::string(transport == Transport::Builtin ? "builtin:" : "external:") + target;
}

void require_canonical_mono(const AudioBuffer& audio, const char* what) {
    if (audio.channels() != 1)
        throw Error(ErrorCode::ChannelCountMismatch, std::string(what) + " expects mono audio, got " +
                                                         std::to_string(audio.channels()) + " channels");
    if (audio.sample_rate() != kCanonicalRate)
        throw Error(ErrorCode::SampleRateMismatch, std::string(what) + " expects " + std::to_string(kCanonicalRate) +
                                                       " Hz audio, got " + std::to_string(audio.sample_rate()) + " Hz");
}

std::filesystem::path OracleDiarizer::sidecar_for(const std::filesystem::path& source) {
    const std::string s = source.string();
    const std::string mix_suffix = ".mix.wav";
    if (s.size() > mix_suffix.size() && s.compare(s.size() - mix_suffix.size(), mix_suffix.size(), mix_suffix) == 0)
        return s.substr(0, s.size() - mix_suffix.size()) + ".truth.tsv";
    auto p = source;
    p.replace_extension(".tsv");
    return p;
}

DiarizationAnnotation OracleDiarizer::diarize(const AudioBuffer& audio, const RecordingContext& ctx) {
    require_canonical_mono(audio, "oracle diarizer");
    if (ctx.source.empty()) throw Error(ErrorCode::BackendFailure, "oracle diarizer needs the source path");
    const auto sidecar = sidecar_for(ctx.source);
    if (!std::filesystem::exists(sidecar))
        throw Error(ErrorCode::BackendFailure, "oracle diarizer: no sidecar annotation " + sidecar.string());
    return normalize_annotation(read_annotation(sidecar, audio.sample_rate()), audio.frames(), merge_gap_);
}

namespace {

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t rank = size_t(std::ceil(q * double(v.size())));
    return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

// Bridge false runs shorter than min_off, then drop true runs shorter than min_on.
void smooth_runs(std::vector<bool>& flags, size_t min_on, size_t min_off) {
    const size_t n = flags.size();
    auto runs = [&](bool value, size_t min_len, bool interior_only) {
        size_t i = 0;
        while (i < n) {
            if (flags[i] != value) {
                ++i;
                continue;
            }
            size_t j = i;
            while (j < n && flags[j] == value) ++j;
            const bool interior = i > 0 && j < n;
            if (j - i < min_len && (interior || !interior_only))
                for (size_t k = i; k < j; ++k) flags[k] = !value;
            i = j;
        }
    };
    runs(false, min_off, true);
    runs(true, min_on, false);
}

} // namespace

DiarizationAnnotation BandEnergyDiarizer::diarize(const AudioBuffer& audio, const RecordingContext&) {
    require_canonical_mono(audio, "band-energy diarizer");
    const auto x = audio.channel(0);
    const int64_t n = audio.frames();
    DiarizationAnnotation out;
    out.total_len = n;
    if (n == 0) return out;

    const int hop = params_.hop;
    const int nfft = params_.n_fft;
    const int64_t blocks = (n + hop - 1) / hop;
    // Centre each analysis frame on its hop-sized block.
    const int lead = nfft / 2 - hop / 2;
    std::vector<float> padded(size_t(lead) + size_t(blocks * hop + nfft), 0.0f);
    std::copy(x.begin(), x.end(), padded.begin() + lead);
    const auto spec = dsp::power_spectrogram(padded, nfft, hop);

    const double bin_hz = double(audio.sample_rate()) / nfft;
    auto band_energy = [&](const FrequencyBand& b) {
        std::vector<double> e(size_t(blocks), 0.0);
        for (int64_t f = 0; f < blocks; ++f) {
            double acc = 0.0;
            for (size_t k = 0; k < spec[size_t(f)].size(); ++k) {
                const double hz = double(k) * bin_hz;
                if (hz >= b.lo_hz && hz <= b.hi_hz) acc += spec[size_t(f)][k];
            }
            e[size_t(f)] = acc;
        }
        return e;
    };

    const size_t min_on = size_t(std::ceil(params_.min_speech_s * audio.sample_rate() / hop));
    const size_t min_off = size_t(std::ceil(params_.min_silence_s * audio.sample_rate() / hop));
    std::vector<SpeakerTurn> turns;
    const std::pair<const char*, FrequencyBand> bands[] = {{"band_a", params_.band_a}, {"band_b", params_.band_b}};
    for (const auto& [label, band] : bands) {
        const auto e = band_energy(band);
        const double thr = std::max(percentile(e, 0.95) * std::pow(10.0, params_.threshold_db / 10.0), 1e-8);
        std::vector<bool> active(e.size());
        for (size_t f = 0; f < e.size(); ++f) active[f] = e[f] > thr;
        smooth_runs(active, min_on, min_off);
        size_t f = 0;
        while (f < active.size()) {
            if (!active[f]) {
                ++f;
                continue;
            }
            size_t g = f;
            while (g < active.size() && active[g]) ++g;
            turns.push_back({label, {int64_t(f) * hop, std::min<int64_t>(int64_t(g) * hop, n)}});
            f = g;
        }
    }
    return normalize_annotation(std::move(turns), n, params_.merge_gap);
}

BandSplitSeparator::BandSplitSeparator(BandSplitSeparatorParams params)
    : params_(params), lowpass_(dsp::design_lowpass(params.taps, params.cutoff_hz, kCanonicalRate)) {}

SeparatedPair BandSplitSeparator::separate(const AudioBuffer& segment) {
    require_canonical_mono(segment, "band-split separator");
    const auto x = segment.channel(0);
    auto low = dsp::filter_same(x, lowpass_);
    std::vector<float> high(x.size());
    for (size_t i = 0; i < x.size(); ++i) high[i] = x[i] - low[i];
    return {AudioBuffer::mono(std::move(low), segment.sample_rate()),
            AudioBuffer::mono(std::move(high), segment.sample_rate())};
}

BandEnergyVerifier::BandEnergyVerifier(BandEnergyVerifierParams params)
    : params_(params),
      filterbank_(dsp::mel_filterbank(params.n_bands, params.n_fft, kCanonicalRate, 0.0, kCanonicalRate / 2.0)) {}

std::vector<double> BandEnergyVerifier::embedding(const AudioBuffer& audio) const {
    require_canonical_mono(audio, "band-energy verifier");
    const auto frames = dsp::power_spectrogram(audio.channel(0), params_.n_fft, params_.hop);
    std::vector<double> mean_power(frames.front().size(), 0.0);
    for (const auto& row : frames)
        for (size_t k = 0; k < row.size(); ++k) mean_power[k] += row[k] / double(frames.size());

    std::vector<double> emb(filterbank_.size());
    double total = 0.0;
    for (size_t b = 0; b < filterbank_.size(); ++b) {
        double e = 0.0;
        for (size_t k = 0; k < mean_power.size(); ++k) e += filterbank_[b][k] * mean_power[k];
        total += e;
        emb[b] = std::log(e + 1e-10);
    }
    if (total <= 1e-12) return std::vector<double>(emb.size(), 0.0);
    double mean = 0.0;
    for (double v : emb) mean += v / double(emb.size());
    double norm = 0.0;
    for (double& v : emb) {
        v -= mean;
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) return std::vector<double>(emb.size(), 0.0);
    for (double& v : emb) v /= norm;
    return emb;
}

SimilarityScore BandEnergyVerifier::verify(const AudioBuffer& reference, const AudioBuffer& candidate) {
    const int64_t min_len = int64_t(std::ceil(params_.min_len_s * kCanonicalRate));
    for (const AudioBuffer* a : {&reference, &candidate}) {
        require_canonical_mono(*a, "band-energy verifier");
        if (a->frames() < min_len)
            throw Error(ErrorCode::TooShort, "verification input of " + std::to_string(a->frames()) +
                                                 " samples is shorter than " + std::to_string(min_len));
    }
    const auto a = embedding(reference);
    const auto b = embedding(candidate);
    double dot = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return {std::clamp(dot, -1.0, 1.0)};
}

} // namespace stereoforge
