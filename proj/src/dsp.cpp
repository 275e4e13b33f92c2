#include "cardioforge/dsp.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace cardioforge::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void BandpassSpec::validate() const {
    if (fs <= 0) throw SpecError("bandpass: fs must be positive");
    if (!(0 < low_hz && low_hz < high_hz)) throw SpecError("bandpass: need 0 < low < high");
    if (high_hz >= fs / 2) throw SpecError("bandpass: high edge must be below Nyquist");
    if (order < 1 || order > 12) throw SpecError("bandpass: order out of range");
}

BandpassSpec BandpassSpec::classification_band(Modality m, double fs) {
    BandpassSpec s;
    s.fs = fs;
    if (m == Modality::PCG) {
        s.low_hz = 25.0;
        s.high_hz = 400.0;
    } else {
        s.low_hz = 2.0;
        s.high_hz = 60.0;
    }
    return s;
}

BandpassSpec BandpassSpec::generation_band(Modality m, double fs) {
    BandpassSpec s;
    s.fs = fs;
    if (m == Modality::PCG) {
        s.low_hz = 2.0;
        s.high_hz = 500.0;
    } else {
        s.low_hz = 0.25;
        s.high_hz = 100.0;
    }
    return s;
}

void MelSpec::validate() const {
    if (window_len < 2 || (window_len & (window_len - 1)) != 0) {
        throw SpecError("mel: window_len must be a power of two");
    }
    if (hop < 1 || hop > window_len) throw SpecError("mel: need 0 < hop <= window_len");
    if (n_mels < 1) throw SpecError("mel: n_mels must be >= 1");
    if (n_mels > window_len / 2 + 1) throw SpecError("mel: n_mels exceeds spectrum bins");
    const double top = fmax > 0 ? fmax : fs / 2;
    if (top > fs / 2 + 1e-9) throw SpecError("mel: fmax above Nyquist");
    if (fmin < 0 || fmin >= top) throw SpecError("mel: need 0 <= fmin < fmax");
}

void SegmentSpec::validate() const {
    if (window_s <= 0) throw SpecError("segment: window must be positive");
    if (overlap_s < 0 || overlap_s >= window_s) throw SpecError("segment: need 0 <= overlap < window");
    if (skip_head_s < 0) throw SpecError("segment: skip_head must be >= 0");
}

// ---------------------------------------------------------------------------
// FFT

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw ArgumentError("fft: length must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2 * kPi / static_cast<double>(len) * (inverse ? 1 : -1);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const auto u = a[i + j];
                const auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

std::vector<std::complex<double>> rfft(const std::vector<double>& x, size_t n) {
    std::vector<std::complex<double>> buf(n);
    for (size_t i = 0; i < n && i < x.size(); ++i) buf[i] = x[i];
    fft(buf, false);
    buf.resize(n / 2 + 1);
    return buf;
}

// ---------------------------------------------------------------------------
// Butterworth bandpass design (analog prototype -> bandpass -> bilinear)

std::vector<Biquad> butter_bandpass(const BandpassSpec& spec) {
    spec.validate();
    const int n = spec.order;
    const double fs2 = 2.0 * spec.fs;
    // Prewarped analog edges.
    const double wl = fs2 * std::tan(kPi * spec.low_hz / spec.fs);
    const double wh = fs2 * std::tan(kPi * spec.high_hz / spec.fs);
    const double w0 = std::sqrt(wl * wh);
    const double bw = wh - wl;

    // Analog bandpass poles: each prototype pole maps to a quadratic pair.
    std::vector<std::complex<double>> zpoles;
    zpoles.reserve(2 * n);
    for (int k = 0; k < n; ++k) {
        const double theta = kPi * (2.0 * k + 1.0) / (2.0 * n) + kPi / 2.0;
        const std::complex<double> proto(std::cos(theta), std::sin(theta));
        const std::complex<double> alpha = proto * (bw / 2.0);
        const std::complex<double> disc = std::sqrt(alpha * alpha - w0 * w0);
        for (const auto& s : {alpha + disc, alpha - disc}) {
            zpoles.push_back((fs2 + s) / (fs2 - s));  // bilinear transform
        }
    }

    // Pair poles into real-coefficient sections.
    std::vector<Biquad> sos;
    std::vector<std::complex<double>> upper;
    std::vector<double> reals;
    for (const auto& p : zpoles) {
        if (std::abs(p.imag()) < 1e-12) {
            reals.push_back(p.real());
        } else if (p.imag() > 0) {
            upper.push_back(p);
        }
    }
    std::sort(upper.begin(), upper.end(),
              [](const auto& a, const auto& b) { return a.real() < b.real(); });
    std::sort(reals.begin(), reals.end());
    for (const auto& p : upper) {
        Biquad s;
        s.b0 = 1;
        s.b1 = 0;
        s.b2 = -1;  // zeros at z = +1 and z = -1
        s.a1 = -2.0 * p.real();
        s.a2 = std::norm(p);
        sos.push_back(s);
    }
    for (size_t i = 0; i + 1 < reals.size(); i += 2) {
        Biquad s;
        s.b0 = 1;
        s.b1 = 0;
        s.b2 = -1;
        s.a1 = -(reals[i] + reals[i + 1]);
        s.a2 = reals[i] * reals[i + 1];
        sos.push_back(s);
    }

    // Normalize every section to unit gain at the (digital) center frequency.
    const double fc = spec.fs / kPi * std::atan(w0 / fs2);
    const double w = 2 * kPi * fc / spec.fs;
    const std::complex<double> z(std::cos(w), std::sin(w));
    const std::complex<double> z2 = z * z;
    for (auto& s : sos) {
        const std::complex<double> num = s.b0 * z2 + s.b1 * z + s.b2;
        const std::complex<double> den = z2 + s.a1 * z + s.a2;
        const double g = std::abs(num / den);
        s.b0 /= g;
        s.b1 /= g;
        s.b2 /= g;
    }
    return sos;
}

namespace {

// Steady-state DF2T initial conditions for a unit-step input.
std::array<double, 2> biquad_zi(const Biquad& s) {
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    return {s.b1 + s.b2 - (s.a1 + s.a2) * dc, s.b2 - s.a2 * dc};
}

void biquad_apply(const Biquad& s, std::vector<double>& x, double z1, double z2) {
    for (double& v : x) {
        const double in = v;
        const double out = s.b0 * in + z1;
        z1 = s.b1 * in - s.a1 * out + z2;
        z2 = s.b2 * in - s.a2 * out;
        v = out;
    }
}

void cascade_with_zi(const std::vector<Biquad>& sos, std::vector<double>& x) {
    for (const auto& s : sos) {
        const auto zi = biquad_zi(s);
        biquad_apply(s, x, zi[0] * x.front(), zi[1] * x.front());
    }
}

}  // namespace

std::vector<double> sosfilt(const std::vector<Biquad>& sos, const std::vector<double>& x) {
    std::vector<double> y = x;
    for (const auto& s : sos) biquad_apply(s, y, 0.0, 0.0);
    return y;
}

std::vector<double> sosfiltfilt(const std::vector<Biquad>& sos, const std::vector<double>& x) {
    if (x.empty()) return {};
    const size_t pad = std::min<size_t>(3 * (2 * sos.size() + 1), x.size() - 1);
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad);
    for (size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[x.size() - 1 - i]);

    cascade_with_zi(sos, ext);
    std::reverse(ext.begin(), ext.end());
    cascade_with_zi(sos, ext);
    std::reverse(ext.begin(), ext.end());

    return {ext.begin() + static_cast<ptrdiff_t>(pad),
            ext.begin() + static_cast<ptrdiff_t>(pad + x.size())};
}

Recording bandpass(const Recording& rec, const BandpassSpec& spec) {
    rec.validate();
    if (std::abs(spec.fs - rec.fs) > 1e-9) throw SpecError("bandpass: spec fs != recording fs");
    const auto sos = butter_bandpass(spec);
    Recording out = rec;
    out.samples = sosfiltfilt(sos, rec.samples);
    return out;
}

// ---------------------------------------------------------------------------
// Polyphase windowed-sinc resampler

namespace {

double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half = x / 2.0;
    for (int k = 1; k < 64; ++k) {
        term *= (half / k) * (half / k);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

// Reduce target/source to a small integer ratio (continued fractions).
std::pair<long, long> rational_ratio(double value, long max_den) {
    long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double x = value;
    for (int i = 0; i < 64; ++i) {
        const double a = std::floor(x);
        const long p2 = static_cast<long>(a) * p1 + p0;
        const long q2 = static_cast<long>(a) * q1 + q0;
        if (q2 > max_den) break;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        if (std::abs(value - static_cast<double>(p1) / q1) < 1e-12 * value) break;
        const double frac = x - a;
        if (frac < 1e-15) break;
        x = 1.0 / frac;
    }
    return {p1, q1};
}

}  // namespace

Recording resample(const Recording& rec, double target_fs) {
    rec.validate();
    if (target_fs <= 0) throw ArgumentError("resample: target_fs must be positive");
    const size_t out_len =
        static_cast<size_t>(std::llround(static_cast<double>(rec.samples.size()) * target_fs / rec.fs));
    if (out_len == 0) throw ArgumentError("resample: output would be empty");
    if (std::abs(target_fs - rec.fs) < 1e-9 * rec.fs) return rec;

    const auto [up, down] = rational_ratio(target_fs / rec.fs, 4096);
    const long max_rate = std::max(up, down);

    // Kaiser-windowed sinc: 64 taps per phase, beta 8.6.
    const double beta = 8.6;
    const long half = 32 * max_rate;
    const double cutoff = 0.985 / static_cast<double>(max_rate);  // fraction of fs*up/2
    const double i0_beta = bessel_i0(beta);
    std::vector<double> h(2 * half + 1);
    for (long i = -half; i <= half; ++i) {
        const double t = cutoff * static_cast<double>(i);
        const double sinc = i == 0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
        const double r = static_cast<double>(i) / static_cast<double>(half);
        const double window = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
        h[i + half] = static_cast<double>(up) * cutoff * sinc * window;
    }

    const auto& x = rec.samples;
    const long n_in = static_cast<long>(x.size());
    Recording out = rec;
    out.fs = target_fs;
    out.samples.assign(out_len, 0.0);
    for (size_t m = 0; m < out_len; ++m) {
        const long u = static_cast<long>(m) * down;  // position in upsampled grid
        const long n_lo = std::max(0L, (u - half + up - 1) / up);
        const long n_hi = std::min(n_in - 1, (u + half) / up);
        double acc = 0.0;
        for (long nidx = n_lo; nidx <= n_hi; ++nidx) {
            acc += h[u - nidx * up + half] * x[nidx];
        }
        out.samples[m] = acc;
    }
    return out;
}

Flagged<Recording> minmax_normalize(const Recording& rec) {
    rec.validate();
    Flagged<Recording> result{rec, ""};
    const auto [mn_it, mx_it] = std::minmax_element(rec.samples.begin(), rec.samples.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx - mn < 1e-12) {
        std::fill(result.value.samples.begin(), result.value.samples.end(), 0.0);
        result.flag = "degenerate_constant_signal";
        return result;
    }
    const double scale = 2.0 / (mx - mn);
    for (double& v : result.value.samples) v = (v - mn) * scale - 1.0;
    return result;
}

Recording preprocess_chain(const Recording& rec, Modality modality, double target_fs) {
    const BandpassSpec band = BandpassSpec::classification_band(modality, 1000.0);
    if (rec.fs < 2.0 * band.high_hz) {
        throw SpecError("preprocess_chain: sample rate below twice the band edge");
    }
    Recording stage = resample(rec, 1000.0);
    stage = bandpass(stage, band);
    stage = minmax_normalize(stage).value;
    stage = resample(stage, target_fs);
    stage.modality = modality;
    return stage;
}

// ---------------------------------------------------------------------------
// STFT / mel

namespace {

std::vector<double> hann_window(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / n));
    return w;
}

// Reflect index into [0, n) without repeating the edge sample.
size_t reflect_index(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * (n - 1);
    long j = std::abs(i) % period;
    if (j >= n) j = period - j;
    return static_cast<size_t>(j);
}

}  // namespace

ComplexMatrix stft(const std::vector<double>& x, int window_len, int hop) {
    if (hop <= 0) throw ArgumentError("stft: hop must be positive");
    if (window_len < 2 || (window_len & (window_len - 1)) != 0) {
        throw ArgumentError("stft: window_len must be a power of two");
    }
    if (static_cast<size_t>(window_len) > x.size()) {
        throw ArgumentError("stft: window longer than signal");
    }
    const auto w = hann_window(window_len);
    const long n = static_cast<long>(x.size());
    const size_t frames = x.size() / static_cast<size_t>(hop) + 1;
    const size_t bins = static_cast<size_t>(window_len) / 2 + 1;

    ComplexMatrix out(bins, frames);
    std::vector<double> frame(window_len);
    for (size_t t = 0; t < frames; ++t) {
        const long start = static_cast<long>(t) * hop - window_len / 2;
        for (int i = 0; i < window_len; ++i) {
            frame[i] = x[reflect_index(start + i, n)] * w[i];
        }
        const auto spec = rfft(frame, static_cast<size_t>(window_len));
        for (size_t b = 0; b < bins; ++b) out.at(b, t) = spec[b];
    }
    return out;
}

std::vector<double> istft(const ComplexMatrix& spec, int window_len, int hop, size_t length) {
    if (hop <= 0) throw ArgumentError("istft: hop must be positive");
    const auto w = hann_window(window_len);
    const size_t frames = spec.cols;
    const size_t padded = static_cast<size_t>(frames - 1) * hop + window_len;
    std::vector<double> acc(padded, 0.0), norm(padded, 0.0);

    std::vector<std::complex<double>> full(window_len);
    for (size_t t = 0; t < frames; ++t) {
        for (int b = 0; b <= window_len / 2; ++b) {
            full[b] = spec.at(static_cast<size_t>(b), t);
            if (b > 0 && b < window_len / 2) {
                full[window_len - b] = std::conj(full[b]);
            }
        }
        fft(full, true);
        const size_t start = t * static_cast<size_t>(hop);
        for (int i = 0; i < window_len; ++i) {
            acc[start + i] += full[i].real() * w[i];
            norm[start + i] += w[i] * w[i];
        }
    }

    std::vector<double> y(length, 0.0);
    const size_t offset = static_cast<size_t>(window_len) / 2;
    for (size_t i = 0; i < length && offset + i < padded; ++i) {
        y[i] = norm[offset + i] > 1e-12 ? acc[offset + i] / norm[offset + i] : 0.0;
    }
    return y;
}

namespace {
double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
}  // namespace

Matrix mel_filterbank(const MelSpec& spec) {
    spec.validate();
    const double top = spec.fmax > 0 ? spec.fmax : spec.fs / 2;
    const size_t bins = static_cast<size_t>(spec.window_len) / 2 + 1;
    const double mel_lo = hz_to_mel(spec.fmin), mel_hi = hz_to_mel(top);

    std::vector<double> edges(spec.n_mels + 2);
    for (int i = 0; i < spec.n_mels + 2; ++i) {
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (spec.n_mels + 1));
    }

    Matrix fb(static_cast<size_t>(spec.n_mels), bins);
    const double bin_hz = spec.fs / spec.window_len;
    for (int m = 0; m < spec.n_mels; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        double row_sum = 0.0;
        for (size_t b = 0; b < bins; ++b) {
            const double f = b * bin_hz;
            double wgt = 0.0;
            if (f > lo && f < hi) {
                wgt = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            }
            fb.at(m, b) = wgt;
            row_sum += wgt;
        }
        if (row_sum <= 0.0) {
            // Filter narrower than one FFT bin: keep the nearest bin so the
            // band still contributes.
            const size_t b = std::min(bins - 1, static_cast<size_t>(std::llround(mid / bin_hz)));
            fb.at(m, b) = 1.0;
        }
    }
    return fb;
}

Matrix mel_spectrogram(const Recording& rec, const MelSpec& spec) {
    spec.validate();
    if (std::abs(spec.fs - rec.fs) > 1e-9) throw SpecError("mel: spec fs != recording fs");
    const auto S = stft(rec.samples, spec.window_len, spec.hop);
    const auto fb = mel_filterbank(spec);

    Matrix out(static_cast<size_t>(spec.n_mels), S.cols);
    for (size_t m = 0; m < out.rows; ++m) {
        for (size_t t = 0; t < S.cols; ++t) {
            double acc = 0.0;
            for (size_t b = 0; b < S.rows; ++b) {
                acc += fb.at(m, b) * std::norm(S.at(b, t));
            }
            out.at(m, t) = std::log1p(acc);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Segmentation

size_t segment_count(double duration_s, const SegmentSpec& spec) {
    spec.validate();
    const double step = spec.window_s - spec.overlap_s;
    const double span = duration_s - spec.skip_head_s - spec.window_s;
    if (span < 0) return 0;
    return static_cast<size_t>(std::floor(span / step + 1e-9)) + 1;
}

Flagged<std::vector<Fragment>> segment(const Recording& rec, const SegmentSpec& spec) {
    MultiRecord wrapper;
    wrapper.channels.push_back(rec);
    return segment(wrapper, spec);
}

Flagged<std::vector<Fragment>> segment(const MultiRecord& rec, const SegmentSpec& spec) {
    spec.validate();
    rec.validate();
    const double fs = rec.channels.front().fs;
    const size_t win = static_cast<size_t>(std::llround(spec.window_s * fs));
    const size_t step = static_cast<size_t>(std::llround((spec.window_s - spec.overlap_s) * fs));
    const size_t skip = static_cast<size_t>(std::llround(spec.skip_head_s * fs));
    size_t len = rec.channels.front().samples.size();
    for (const auto& ch : rec.channels) len = std::min(len, ch.samples.size());

    Flagged<std::vector<Fragment>> result;
    if (len < skip + win || step == 0) {
        result.flag = "record_shorter_than_window";
        return result;
    }
    const size_t count = (len - skip - win) / step + 1;
    result.value.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        Fragment f;
        f.fs = fs;
        f.subject_id = rec.subject_id;
        f.label = rec.label;
        f.source = rec.source;
        const size_t start = skip + i * step;
        f.offset_s = static_cast<double>(start) / fs;
        for (const auto& ch : rec.channels) {
            f.channels.emplace_back(ch.samples.begin() + static_cast<ptrdiff_t>(start),
                                    ch.samples.begin() + static_cast<ptrdiff_t>(start + win));
        }
        result.value.push_back(std::move(f));
    }
    return result;
}

void dump_spectrogram_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (size_t t = 0; t < m.cols; ++t) {
        for (size_t r = 0; r < m.rows; ++r) {
            out << (r ? "," : "") << m.at(r, t);
        }
        out << "\n";
    }
}

}  // namespace cardioforge::dsp
