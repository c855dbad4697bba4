#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace stereoforge {

inline constexpr int kCanonicalRate = 16000;

// Half-open range [start, end) of sample indices.
struct SampleInterval {
    int64_t start = 0;
    int64_t end = 0;

    int64_t length() const { return end - start; }
    bool empty() const { return end <= start; }
    bool contains(int64_t t) const { return t >= start && t < end; }
    bool contains(const SampleInterval& o) const { return o.start >= start && o.end <= end; }

    friend bool operator==(const SampleInterval&, const SampleInterval&) = default;
};

// Multi-channel float PCM, amplitudes nominally in [-1, 1].
class AudioBuffer {
public:
    AudioBuffer() = default;
    AudioBuffer(int channels, int64_t frames, int sample_rate);
    AudioBuffer(std::vector<std::vector<float>> channels, int sample_rate);

    static AudioBuffer mono(std::vector<float> samples, int sample_rate);

    int channels() const { return static_cast<int>(data_.size()); }
    int64_t frames() const { return data_.empty() ? 0 : static_cast<int64_t>(data_[0].size()); }
    int sample_rate() const { return sample_rate_; }
    bool empty() const { return frames() == 0; }
    double duration_s() const { return sample_rate_ > 0 ? double(frames()) / sample_rate_ : 0.0; }

    std::span<const float> channel(int c) const { return data_.at(c); }
    std::span<float> mutable_channel(int c) { return data_.at(c); }

    // Copy of [interval) as a new buffer with the same channel count.
    AudioBuffer slice(const SampleInterval& interval) const;

    friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

private:
    std::vector<std::vector<float>> data_;
    int sample_rate_ = 0;
};

enum class BitDepth { Pcm16, Float32 };

AudioBuffer read_wav(const std::filesystem::path& path);

// Returns the number of samples that were saturated to the representable range.
int64_t write_wav(const AudioBuffer& buffer, const std::filesystem::path& path,
                  BitDepth depth = BitDepth::Pcm16);

AudioBuffer mixdown(const AudioBuffer& stereo);

double rms(const AudioBuffer& buffer, const SampleInterval& interval);
double rms(std::span<const float> samples);

} // namespace stereoforge
