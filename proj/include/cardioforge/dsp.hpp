#pragma once

#include <complex>
#include <vector>

#include "cardioforge/common.hpp"
#include "cardioforge/signal_io.hpp"

namespace cardioforge::dsp {

struct BandpassSpec {
    double low_hz = 25.0;
    double high_hz = 400.0;
    int order = 4;  // prototype order per direction; forward-backward doubles it
    double fs = 1000.0;

    void validate() const;
    static BandpassSpec classification_band(Modality m, double fs);
    static BandpassSpec generation_band(Modality m, double fs);
};

struct MelSpec {
    int window_len = 1024;
    int hop = 256;
    int n_mels = 80;
    double fs = 4000.0;
    double fmin = 0.0;
    double fmax = 0.0;  // 0 means fs/2

    void validate() const;
};

struct SegmentSpec {
    double window_s = 4.0;
    double overlap_s = 0.25;
    double skip_head_s = 0.3;

    void validate() const;
};

struct Matrix {
    size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }
};

struct ComplexMatrix {
    size_t rows = 0, cols = 0;
    std::vector<std::complex<double>> data;

    ComplexMatrix() = default;
    ComplexMatrix(size_t r, size_t c) : rows(r), cols(c), data(r * c) {}
    std::complex<double>& at(size_t r, size_t c) { return data[r * cols + c]; }
    std::complex<double> at(size_t r, size_t c) const { return data[r * cols + c]; }
};

// In-place radix-2 FFT; length must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse);
std::vector<std::complex<double>> rfft(const std::vector<double>& x, size_t n);

struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;  // a0 normalized to 1
};

// Butterworth bandpass as a cascade of biquad sections (order = prototype
// order; the bandpass transfer has 2*order poles).
std::vector<Biquad> butter_bandpass(const BandpassSpec& spec);

std::vector<double> sosfilt(const std::vector<Biquad>& sos, const std::vector<double>& x);
// Forward-backward (zero phase) with odd-reflection padding and steady-state
// initial conditions.
std::vector<double> sosfiltfilt(const std::vector<Biquad>& sos, const std::vector<double>& x);

Recording bandpass(const Recording& rec, const BandpassSpec& spec);
Recording resample(const Recording& rec, double target_fs);
Flagged<Recording> minmax_normalize(const Recording& rec);
Recording preprocess_chain(const Recording& rec, Modality modality, double target_fs);

// Hann-windowed STFT, reflect-centered; frames = floor(len/hop) + 1.
// Rows are frequency bins (window_len/2 + 1), columns are frames.
ComplexMatrix stft(const std::vector<double>& x, int window_len, int hop);
std::vector<double> istft(const ComplexMatrix& spec, int window_len, int hop, size_t length);

// Triangular HTK-mel filterbank rows (n_mels x (window_len/2+1)).
Matrix mel_filterbank(const MelSpec& spec);
// log(1 + mel power spectrogram), shape n_mels x frames.
Matrix mel_spectrogram(const Recording& rec, const MelSpec& spec);

Flagged<std::vector<Fragment>> segment(const Recording& rec, const SegmentSpec& spec);
Flagged<std::vector<Fragment>> segment(const MultiRecord& rec, const SegmentSpec& spec);
size_t segment_count(double duration_s, const SegmentSpec& spec);

void dump_spectrogram_csv(const Matrix& m, const std::string& path);

}  // namespace cardioforge::dsp
