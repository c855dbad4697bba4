#include "stereoforge/audio.hpp"

#include "stereoforge/error.hpp"
#include "stereoforge/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace stereoforge {

AudioBuffer::AudioBuffer(int channels, int64_t frames, int sample_rate)
    : data_(channels, std::vector<float>(static_cast<size_t>(frames), 0.0f)),
      sample_rate_(sample_rate) {
    if (channels < 1) throw Error(ErrorCode::ChannelCountMismatch, "channel count must be >= 1");
    if (sample_rate <= 0) throw Error(ErrorCode::SampleRateMismatch, "sample rate must be positive");
}

AudioBuffer::AudioBuffer(std::vector<std::vector<float>> channels, int sample_rate)
    : data_(std::move(channels)), sample_rate_(sample_rate) {
    if (data_.empty()) throw Error(ErrorCode::ChannelCountMismatch, "channel count must be >= 1");
    if (sample_rate <= 0) throw Error(ErrorCode::SampleRateMismatch, "sample rate must be positive");
    for (const auto& c : data_) {
        if (c.size() != data_[0].size())
            throw Error(ErrorCode::ChannelCountMismatch, "channels differ in length");
    }
}

AudioBuffer AudioBuffer::mono(std::vector<float> samples, int sample_rate) {
    std::vector<std::vector<float>> ch;
    ch.push_back(std::move(samples));
    return AudioBuffer(std::move(ch), sample_rate);
}

AudioBuffer AudioBuffer::slice(const SampleInterval& interval) const {
    if (interval.start < 0 || interval.end > frames() || interval.end < interval.start)
        throw Error(ErrorCode::OutOfBounds, "slice [" + std::to_string(interval.start) + ", " +
                                                std::to_string(interval.end) + ") outside buffer of " +
                                                std::to_string(frames()) + " samples");
    std::vector<std::vector<float>> out;
    out.reserve(data_.size());
    for (const auto& c : data_)
        out.emplace_back(c.begin() + interval.start, c.begin() + interval.end);
    return AudioBuffer(std::move(out), sample_rate_);
}

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint16_t le16(const unsigned char* p) { return uint16_t(p[0] | (p[1] << 8)); }
uint32_t le32(const unsigned char* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

void put16(std::string& s, uint16_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char(v >> 8));
}
void put32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

} // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());

    const auto fail = [&](const std::string& why) {
        return Error(ErrorCode::MalformedWav, path.string() + ": " + why);
    };
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw fail("not a RIFF/WAVE file");

    uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
    uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    size_t data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        const uint32_t len = le32(hdr + 4);
        const size_t body = pos + 8;
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (len < 16 || body + len > bytes.size()) throw fail("truncated fmt chunk");
            const unsigned char* f = bytes.data() + body;
            format = le16(f);
            channels = le16(f + 2);
            rate = le32(f + 4);
            block_align = le16(f + 12);
            bits = le16(f + 14);
            if (format == kFormatExtensible) {
                if (len < 40) throw fail("truncated extensible fmt chunk");
                format = le16(f + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            if (!have_fmt) throw fail("data chunk before fmt chunk");
            data = bytes.data() + body;
            data_len = std::min<size_t>(len, bytes.size() - body);
            if (data_len < len) throw fail("truncated data chunk");
            break;
        }
        pos = body + len + (len & 1);
    }
    if (!have_fmt) throw fail("missing fmt chunk");
    if (!data) throw fail("missing data chunk");
    if (channels == 0 || rate == 0) throw fail("zero channels or sample rate");

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32)
        throw Error(ErrorCode::UnsupportedEncoding,
                    path.string() + ": format " + std::to_string(format) + " with " +
                        std::to_string(bits) + " bits");
    const size_t bytes_per_sample = bits / 8;
    if (block_align != bytes_per_sample * channels) throw fail("inconsistent block alignment");
    if (data_len % block_align != 0) throw fail("data length is not a whole number of frames");

    const size_t n = data_len / block_align;
    std::vector<std::vector<float>> out(channels, std::vector<float>(n));
    for (size_t i = 0; i < n; ++i) {
        for (size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (i * channels + c) * bytes_per_sample;
            if (pcm16) {
                out[c][i] = float(int16_t(le16(p))) / 32768.0f;
            } else {
                uint32_t raw = le32(p);
                float v;
                std::memcpy(&v, &raw, sizeof v);
                out[c][i] = v;
            }
        }
    }
    return AudioBuffer(std::move(out), int(rate));
}

int64_t write_wav(const AudioBuffer& buffer, const std::filesystem::path& path, BitDepth depth) {
    if (buffer.empty()) throw Error(ErrorCode::EmptyBuffer, "refusing to write empty buffer to " + path.string());
    const int channels = buffer.channels();
    const int64_t n = buffer.frames();
    const uint16_t bits = depth == BitDepth::Pcm16 ? 16 : 32;
    const uint16_t block_align = uint16_t(channels * bits / 8);
    const uint64_t data_len = uint64_t(n) * block_align;
    if (data_len > 0xFFFFFFFFull - 36) throw Error(ErrorCode::IoError, "buffer too large for RIFF: " + path.string());

    std::string out;
    out.reserve(44 + data_len);
    out += "RIFF";
    put32(out, uint32_t(36 + data_len));
    out += "WAVEfmt ";
    put32(out, 16);
    put16(out, depth == BitDepth::Pcm16 ? kFormatPcm : kFormatFloat);
    put16(out, uint16_t(channels));
    put32(out, uint32_t(buffer.sample_rate()));
    put32(out, uint32_t(buffer.sample_rate()) * block_align);
    put16(out, block_align);
    put16(out, bits);
    out += "data";
    put32(out, uint32_t(data_len));

    int64_t clipped = 0;
    for (int64_t i = 0; i < n; ++i) {
        for (int c = 0; c < channels; ++c) {
            const float v = buffer.channel(c)[i];
            if (depth == BitDepth::Pcm16) {
                if (!(v >= -1.0f && v <= 1.0f)) ++clipped;
                double q = std::isnan(v) ? 0.0 : std::nearbyint(double(v) * 32768.0);
                q = std::clamp(q, -32768.0, 32767.0);
                put16(out, uint16_t(int16_t(q)));
            } else {
                float w = v;
                if (!(w >= -1.0f && w <= 1.0f)) {
                    ++clipped;
                    w = std::isnan(w) ? 0.0f : std::clamp(w, -1.0f, 1.0f);
                }
                uint32_t raw;
                std::memcpy(&raw, &w, sizeof raw);
                put32(out, raw);
            }
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
    if (clipped > 0)
        log::warn(path.string() + ": " + std::to_string(clipped) + " samples saturated on write");
    return clipped;
}

AudioBuffer mixdown(const AudioBuffer& stereo) {
    if (stereo.channels() != 2)
        throw Error(ErrorCode::ChannelCountMismatch,
                    "mixdown needs 2 channels, got " + std::to_string(stereo.channels()));
    const auto a = stereo.channel(0);
    const auto b = stereo.channel(1);
    std::vector<float> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = (a[i] + b[i]) * 0.5f;
    return AudioBuffer::mono(std::move(out), stereo.sample_rate());
}

double rms(std::span<const float> samples) {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (float v : samples) acc += double(v) * double(v);
    return std::sqrt(acc / double(samples.size()));
}

double rms(const AudioBuffer& buffer, const SampleInterval& interval) {
    if (buffer.channels() != 1)
        throw Error(ErrorCode::ChannelCountMismatch, "rms expects a mono buffer");
    if (interval.start < 0 || interval.end > buffer.frames() || interval.end < interval.start)
        throw Error(ErrorCode::OutOfBounds, "rms interval outside buffer");
    return rms(buffer.channel(0).subspan(size_t(interval.start), size_t(interval.length())));
}

} // namespace stereoforge
