#include "stereoforge/dsp.hpp"

#include "stereoforge/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace stereoforge::dsp {

namespace {

// The FFTW planner is not reentrant; execution on distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(int n) : n_(n) {
        std::lock_guard<std::mutex> lock(planner_mutex());
        in_ = fftw_alloc_real(size_t(n));
        out_ = fftw_alloc_complex(size_t(n / 2 + 1));
        forward_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_1d(n, out_, in_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int size() const { return n_; }
    double* real() { return in_; }
    fftw_complex* spectrum() { return out_; }
    void forward() { fftw_execute(forward_); }
    void inverse() { fftw_execute(inverse_); }

private:
    int n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan forward_;
    fftw_plan inverse_;
};

RealFft& fft_for(int n) {
    thread_local std::map<int, std::unique_ptr<RealFft>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RealFft>(n);
    return *slot;
}

int next_pow2(int64_t v) {
    int p = 1;
    while (p < v) p <<= 1;
    return p;
}

size_t mirror(int64_t i, int64_t n) {
    if (n == 1) return 0;
    const int64_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    if (i >= n) i = period - i;
    return size_t(i);
}

} // namespace

std::vector<double> design_lowpass(int taps, double cutoff_hz, int sample_rate) {
    if (taps < 3 || taps % 2 == 0)
        throw Error(ErrorCode::InvalidConfig, "FIR length must be odd and >= 3");
    if (cutoff_hz <= 0.0 || cutoff_hz >= sample_rate / 2.0)
        throw Error(ErrorCode::InvalidConfig, "cutoff must lie strictly inside (0, Nyquist)");
    const double fc = cutoff_hz / sample_rate;
    const int m = taps - 1;
    std::vector<double> h(static_cast<size_t>(taps));
    double sum = 0.0;
    for (int i = 0; i < taps; ++i) {
        const double k = i - m / 2.0;
        const double sinc = k == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * k) / (std::numbers::pi * k);
        const double w = 0.42 - 0.5 * std::cos(2.0 * std::numbers::pi * i / m) +
                         0.08 * std::cos(4.0 * std::numbers::pi * i / m);
        h[size_t(i)] = sinc * w;
        sum += h[size_t(i)];
    }
    for (double& v : h) v /= sum;
    return h;
}

std::vector<double> design_bandpass(int taps, double lo_hz, double hi_hz, int sample_rate) {
    if (!(lo_hz < hi_hz)) throw Error(ErrorCode::InvalidConfig, "band edges must be increasing");
    auto hi = design_lowpass(taps, hi_hz, sample_rate);
    const auto lo = design_lowpass(taps, lo_hz, sample_rate);
    for (size_t i = 0; i < hi.size(); ++i) hi[i] -= lo[i];
    return hi;
}

std::vector<float> filter_same(std::span<const float> x, std::span<const double> kernel) {
    const int64_t n = int64_t(x.size());
    if (n == 0) return {};
    const int64_t taps = int64_t(kernel.size());
    const int64_t pad = (taps - 1) / 2;
    const int64_t ext_len = n + 2 * pad;

    const int fft_n = std::max(4096, next_pow2(4 * taps));
    const int64_t block = fft_n - taps + 1;
    RealFft& fft = fft_for(fft_n);
    const int bins = fft_n / 2 + 1;

    std::vector<std::array<double, 2>> kspec(static_cast<size_t>(bins));
    std::fill(fft.real(), fft.real() + fft_n, 0.0);
    std::copy(kernel.begin(), kernel.end(), fft.real());
    fft.forward();
    for (int k = 0; k < bins; ++k) kspec[size_t(k)] = {fft.spectrum()[k][0], fft.spectrum()[k][1]};

    // full[m] for m in [2*pad, 2*pad + n) is the centred output.
    std::vector<double> full(size_t(ext_len + taps - 1), 0.0);
    for (int64_t b0 = 0; b0 < ext_len; b0 += block) {
        const int64_t len = std::min(block, ext_len - b0);
        double* buf = fft.real();
        for (int64_t j = 0; j < len; ++j) buf[j] = x[mirror(b0 + j - pad, n)];
        std::fill(buf + len, buf + fft_n, 0.0);
        fft.forward();
        fftw_complex* s = fft.spectrum();
        for (int k = 0; k < bins; ++k) {
            const double re = s[k][0] * kspec[size_t(k)][0] - s[k][1] * kspec[size_t(k)][1];
            const double im = s[k][0] * kspec[size_t(k)][1] + s[k][1] * kspec[size_t(k)][0];
            s[k][0] = re;
            s[k][1] = im;
        }
        fft.inverse();
        const int64_t out_len = std::min<int64_t>(len + taps - 1, int64_t(full.size()) - b0);
        for (int64_t j = 0; j < out_len; ++j) full[size_t(b0 + j)] += buf[j] / fft_n;
    }
    std::vector<float> y(static_cast<size_t>(n));
    for (int64_t t = 0; t < n; ++t) y[size_t(t)] = float(full[size_t(t + 2 * pad)]);
    return y;
}

std::vector<std::vector<double>> power_spectrogram(std::span<const float> x, int n_fft, int hop) {
    if (n_fft < 2 || hop < 1) throw Error(ErrorCode::InvalidConfig, "bad STFT parameters");
    RealFft& fft = fft_for(n_fft);
    std::vector<double> window(static_cast<size_t>(n_fft));
    for (int i = 0; i < n_fft; ++i) window[size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n_fft);
    const int bins = n_fft / 2 + 1;
    const int64_t n = int64_t(x.size());
    const int64_t frames = n <= n_fft ? 1 : 1 + (n - n_fft + hop - 1) / hop;

    std::vector<std::vector<double>> out;
    out.reserve(size_t(frames));
    for (int64_t f = 0; f < frames; ++f) {
        const int64_t off = f * hop;
        double* buf = fft.real();
        for (int i = 0; i < n_fft; ++i) {
            const int64_t t = off + i;
            buf[i] = t < n ? double(x[size_t(t)]) * window[size_t(i)] : 0.0;
        }
        fft.forward();
        std::vector<double> row(static_cast<size_t>(bins));
        for (int k = 0; k < bins; ++k) {
            const auto& c = fft.spectrum()[k];
            row[size_t(k)] = c[0] * c[0] + c[1] * c[1];
        }
        out.push_back(std::move(row));
    }
    return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(int n_bands, int n_fft, int sample_rate, double fmin_hz,
                                                double fmax_hz) {
    const int bins = n_fft / 2 + 1;
    const double mlo = hz_to_mel(fmin_hz);
    const double mhi = hz_to_mel(fmax_hz);
    std::vector<double> edges(size_t(n_bands + 2));
    for (int i = 0; i < n_bands + 2; ++i) edges[size_t(i)] = mel_to_hz(mlo + (mhi - mlo) * i / (n_bands + 1));

    std::vector<std::vector<double>> fb(size_t(n_bands), std::vector<double>(size_t(bins), 0.0));
    for (int b = 0; b < n_bands; ++b) {
        const double lo = edges[size_t(b)], mid = edges[size_t(b + 1)], hi = edges[size_t(b + 2)];
        for (int k = 0; k < bins; ++k) {
            const double f = double(k) * sample_rate / n_fft;
            double w = 0.0;
            if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
            else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
            fb[size_t(b)][size_t(k)] = w;
        }
    }
    return fb;
}

double si_snr_db(std::span<const float> estimate, std::span<const float> reference) {
    if (estimate.size() != reference.size() || estimate.empty())
        throw Error(ErrorCode::OutOfBounds, "si_snr needs equal, non-empty inputs");
    const size_t n = estimate.size();
    double me = 0.0, mr = 0.0;
    for (size_t i = 0; i < n; ++i) {
        me += estimate[i];
        mr += reference[i];
    }
    me /= double(n);
    mr /= double(n);
    double dot = 0.0, rr = 0.0;
    for (size_t i = 0; i < n; ++i) {
        dot += (estimate[i] - me) * (reference[i] - mr);
        rr += (reference[i] - mr) * (reference[i] - mr);
    }
    if (rr <= 0.0) return -std::numeric_limits<double>::infinity();
    const double alpha = dot / rr;
    double target = 0.0, noise = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double s = alpha * (reference[i] - mr);
        const double e = (estimate[i] - me) - s;
        target += s * s;
        noise += e * e;
    }
    if (noise <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(target / std::max(noise, 1e-300));
}

} // namespace stereoforge::dsp
