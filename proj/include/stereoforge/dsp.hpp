#pragma once

#include <span>
#include <vector>

// Small signal-processing kit shared by the builtin backends and the synthetic corpus.
namespace stereoforge::dsp {

// Blackman-windowed sinc low-pass, odd length, unity gain at DC.
std::vector<double> design_lowpass(int taps, double cutoff_hz, int sample_rate);

// Difference of two low-pass designs; passes [lo_hz, hi_hz].
std::vector<double> design_bandpass(int taps, double lo_hz, double hi_hz, int sample_rate);

// Zero-delay filtering with a symmetric odd-length kernel. Output has the input length;
// edges are handled by mirror extension.
std::vector<float> filter_same(std::span<const float> x, std::span<const double> kernel);

// Hann-windowed power spectra, one row of n_fft/2+1 bins per frame.
// A trailing partial frame is zero-padded; a signal shorter than n_fft yields one frame.
std::vector<std::vector<double>> power_spectrogram(std::span<const float> x, int n_fft, int hop);

// Triangular filters evenly spaced on the mel scale, each row has n_fft/2+1 weights.
std::vector<std::vector<double>> mel_filterbank(int n_bands, int n_fft, int sample_rate,
                                                double fmin_hz, double fmax_hz);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Scale-invariant signal-to-noise ratio in dB (zero-mean variant).
double si_snr_db(std::span<const float> estimate, std::span<const float> reference);

} // namespace stereoforge::dsp
