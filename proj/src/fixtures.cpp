#include "cardioforge/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <system_error>
#include <utility>

namespace cardioforge::fixtures {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPcgNoiseFloor = 0.004;
constexpr double kEcgNoiseFloor = 0.003;
constexpr double kS1SigmaS = 0.015;
constexpr double kS2SigmaS = 0.010;
constexpr double kQrsSigmaS = 0.008;
constexpr std::size_t kMurmurTones = 40;

long sample_of(double t_s, double fs) { return std::lround(t_s * fs); }

// Gaussian-enveloped tone burst, truncated at four sigmas.
void add_burst(std::vector<double>& x, double fs, double center_s, double freq_hz, double amp,
               double sigma_s) {
    const long lo = sample_of(center_s - 4.0 * sigma_s, fs);
    const long hi = sample_of(center_s + 4.0 * sigma_s, fs);
    const long n = static_cast<long>(x.size());
    for (long i = std::max(0L, lo); i <= hi && i < n; ++i) {
        const double t = static_cast<double>(i) / fs - center_s;
        const double env = std::exp(-0.5 * t * t / (sigma_s * sigma_s));
        x[static_cast<std::size_t>(i)] += amp * env * std::sin(2.0 * kPi * freq_hz * t);
    }
}

// Plain Gaussian hump (P and T waves).
void add_bump(std::vector<double>& x, double fs, double center_s, double amp, double sigma_s) {
    const long lo = sample_of(center_s - 4.0 * sigma_s, fs);
    const long hi = sample_of(center_s + 4.0 * sigma_s, fs);
    const long n = static_cast<long>(x.size());
    for (long i = std::max(0L, lo); i <= hi && i < n; ++i) {
        const double t = static_cast<double>(i) / fs - center_s;
        x[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * t * t / (sigma_s * sigma_s));
    }
}

// Biphasic spike: derivative of a Gaussian, peak normalized to amp.
void add_qrs(std::vector<double>& x, double fs, double center_s, double amp, double sigma_s) {
    const long lo = sample_of(center_s - 4.0 * sigma_s, fs);
    const long hi = sample_of(center_s + 4.0 * sigma_s, fs);
    const long n = static_cast<long>(x.size());
    for (long i = std::max(0L, lo); i <= hi && i < n; ++i) {
        const double t = static_cast<double>(i) / fs - center_s;
        const double u = t / sigma_s;
        x[static_cast<std::size_t>(i)] += -amp * u * std::exp(0.5 * (1.0 - u * u));
    }
}

}  // namespace

std::string to_string(DatasetMode mode) {
    switch (mode) {
        case DatasetMode::SinglePcg: return "single_pcg";
        case DatasetMode::Multimodal: return "multimodal";
        case DatasetMode::Multichannel: return "multichannel";
    }
    throw ArgumentError("unknown dataset mode");
}

DatasetMode mode_from_string(const std::string& s) {
    if (s == "single_pcg") return DatasetMode::SinglePcg;
    if (s == "multimodal") return DatasetMode::Multimodal;
    if (s == "multichannel") return DatasetMode::Multichannel;
    throw ConfigError("unknown dataset mode: " + s);
}

std::vector<std::string> mode_sites(DatasetMode mode) {
    switch (mode) {
        case DatasetMode::SinglePcg: return {"pcg"};
        case DatasetMode::Multimodal: return {"pcg", "ecg"};
        case DatasetMode::Multichannel:
            return {"aortic", "pulmonic", "erb", "tricuspid", "mitral", "apex"};
    }
    throw ArgumentError("unknown dataset mode");
}

void FixtureSpec::validate() const {
    if (!std::isfinite(fs) || fs < 600.0) {
        throw ArgumentError("fixtures: fs must be at least 600 Hz to carry the murmur band");
    }
    if (!std::isfinite(duration_s) || duration_s <= 0.0) {
        throw ArgumentError("fixtures: duration must be positive");
    }
    if (!std::isfinite(heart_rate_hz) || heart_rate_hz <= 0.0) {
        throw ArgumentError("fixtures: heart rate must be positive");
    }
    if (!std::isfinite(first_cycle_s) || first_cycle_s < 0.0) {
        throw ArgumentError("fixtures: first cycle offset must be non-negative");
    }
    if (systole_fraction <= 0.25 || systole_fraction >= 0.45) {
        throw ArgumentError("fixtures: systole fraction out of range");
    }
    if (first_cycle_s + 1.0 / heart_rate_hz > duration_s) {
        throw ArgumentError("fixtures: record shorter than one cardiac cycle");
    }
}

CycleLandmarks cycle_landmarks(const FixtureSpec& spec) {
    CycleLandmarks lm;
    lm.period_s = 1.0 / spec.heart_rate_hz;
    lm.s1_offset = 0.0;
    lm.s2_offset = spec.systole_fraction * lm.period_s;
    lm.murmur_lo = 0.10 * lm.period_s;
    lm.murmur_hi = 0.20 * lm.period_s;
    lm.quiet_lo = 0.45 * lm.period_s;
    lm.quiet_hi = 0.88 * lm.period_s;
    return lm;
}

std::vector<double> cycle_onsets(const FixtureSpec& spec) {
    spec.validate();
    const double period = 1.0 / spec.heart_rate_hz;
    std::vector<double> onsets;
    for (double t = spec.first_cycle_s; t + period <= spec.duration_s + 1e-12; t += period) {
        onsets.push_back(t);
    }
    return onsets;
}

std::vector<double> synth_pcg(const FixtureSpec& spec, Label label, Rng& rng) {
    spec.validate();
    const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * spec.fs));
    const CycleLandmarks lm = cycle_landmarks(spec);
    const std::vector<double> onsets = cycle_onsets(spec);

    const double s1_freq = rng.uniform(35.0, 45.0);
    const double s2_freq = rng.uniform(50.0, 65.0);
    const double s1_amp = rng.uniform(0.75, 0.95);
    const double s2_amp = rng.uniform(0.50, 0.70);

    std::vector<double> x(n);
    for (double& v : x) v = kPcgNoiseFloor * rng.normal();

    struct Tone {
        double freq, amp, phase;
    };
    std::vector<Tone> murmur;
    double murmur_amp = 0.0;
    if (label == Label::Abnormal) {
        murmur_amp = rng.uniform(0.28, 0.42);
        murmur.reserve(kMurmurTones);
        for (std::size_t k = 0; k < kMurmurTones; ++k) {
            const double freq = rng.uniform(140.0, 260.0);
            const double amp = rng.normal();
            murmur.push_back({freq, amp, rng.uniform(0.0, 2.0 * kPi)});
        }
    }
    const double murmur_norm = std::sqrt(static_cast<double>(kMurmurTones) / 2.0);

    for (double onset : onsets) {
        add_burst(x, spec.fs, onset + lm.s1_offset, s1_freq, s1_amp * rng.uniform(0.9, 1.1),
                  kS1SigmaS);
        add_burst(x, spec.fs, onset + lm.s2_offset, s2_freq, s2_amp * rng.uniform(0.9, 1.1),
                  kS2SigmaS);
        if (murmur.empty()) continue;
        // Crescendo-decrescendo envelope spanning a bit past the measured
        // murmur window so the window sees full-strength noise.
        const double lo = onset + 0.08 * lm.period_s;
        const double hi = onset + 0.22 * lm.period_s;
        const long i0 = std::max(0L, sample_of(lo, spec.fs));
        const long i1 = std::min(static_cast<long>(n) - 1, sample_of(hi, spec.fs));
        for (long i = i0; i <= i1; ++i) {
            const double t = static_cast<double>(i) / spec.fs;
            const double env = std::sin(kPi * (t - lo) / (hi - lo));
            double s = 0.0;
            for (const Tone& tone : murmur) {
                s += tone.amp * std::sin(2.0 * kPi * tone.freq * t + tone.phase);
            }
            x[static_cast<std::size_t>(i)] += murmur_amp * env * env * s / murmur_norm;
        }
    }
    return x;
}

std::vector<double> synth_ecg(const FixtureSpec& spec, Rng& rng) {
    spec.validate();
    const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * spec.fs));
    const CycleLandmarks lm = cycle_landmarks(spec);
    const std::vector<double> onsets = cycle_onsets(spec);

    const double r_amp = rng.uniform(0.9, 1.1);
    const double p_amp = rng.uniform(0.05, 0.12);
    const double t_amp = rng.uniform(0.10, 0.20);

    std::vector<double> x(n);
    for (double& v : x) v = kEcgNoiseFloor * rng.normal();

    for (double onset : onsets) {
        const double r_center = onset - 0.03;
        add_qrs(x, spec.fs, r_center, r_amp * rng.uniform(0.95, 1.05), kQrsSigmaS);
        add_bump(x, spec.fs, r_center - 0.18 * lm.period_s, p_amp, 0.020);
        add_bump(x, spec.fs, r_center + 0.26 * lm.period_s, t_amp, 0.035);
    }
    return x;
}

MultiRecord make_subject(const FixtureSpec& spec, std::size_t index) {
    spec.validate();
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "fx_%03zu", index);

    MultiRecord rec;
    rec.subject_id = idbuf;
    rec.label = (index % 2 == 0) ? Label::Normal : Label::Abnormal;
    rec.source = SourceTag{};

    Rng rng(derive_seed(spec.seed, "fixture-subject", index));
    for (const std::string& site : mode_sites(spec.mode)) {
        Recording ch;
        ch.fs = spec.fs;
        ch.channel_site = site;
        if (site == "ecg") {
            ch.modality = Modality::ECG;
            ch.samples = synth_ecg(spec, rng);
        } else {
            ch.modality = Modality::PCG;
            ch.samples = synth_pcg(spec, rec.label, rng);
        }
        rec.channels.push_back(std::move(ch));
    }
    rec.validate();
    return rec;
}

std::vector<ManifestEntry> write_fixtures(const FixtureSpec& spec,
                                          const std::filesystem::path& out_dir) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("fixtures: cannot create " + out_dir.string() + ": " + ec.message());
    }

    std::vector<ManifestEntry> entries;
    entries.reserve(spec.n_subjects);
    for (std::size_t i = 0; i < spec.n_subjects; ++i) {
        MultiRecord rec = make_subject(spec, i);
        ManifestEntry entry;
        entry.subject_id = rec.subject_id;
        entry.label = rec.label;
        entry.dataset = spec.dataset;
        entry.source = rec.source;
        for (const Recording& ch : rec.channels) {
            const std::string name = rec.subject_id + "_" + ch.channel_site + ".wav";
            signal_io::write_wav(ch, (out_dir / name).string(), /*float32=*/true);
            entry.paths.push_back(name);
            entry.modalities.push_back(ch.modality);
            entry.sites.push_back(ch.channel_site);
        }
        entries.push_back(std::move(entry));
    }
    signal_io::write_manifest(entries, (out_dir / "manifest.jsonl").string());
    return entries;
}

}  // namespace cardioforge::fixtures
