#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardioforge/common.hpp"
#include "cardioforge/signal_io.hpp"

namespace cardioforge::augment {

struct AugmentConfig {
    // Fire probabilities for the offline pipeline, in application order.
    double p_hpss = 0.75;
    double p_white_noise = 0.075;
    double p_time_stretch = 0.25;
    double p_amplitude_modulation = 0.75;
    double p_baseline_wander = 0.75;
    double p_parametric_eq = 0.25;
    double p_clinical_noise = 0.5;
    // Online (training-time) probabilities.
    double p_online_mask = 0.2;
    double p_online_stretch = 0.2;

    // Parameter ranges, drawn uniformly (EQ center log-uniformly).
    std::array<double, 2> stretch_range{0.85, 1.15};
    std::array<double, 2> white_snr_db{15.0, 30.0};
    std::array<double, 2> clinical_snr_db{5.0, 20.0};
    std::array<double, 2> am_depth{0.05, 0.4};
    std::array<double, 2> am_rate_hz{0.1, 1.0};
    std::array<double, 2> wander_amp{0.05, 0.3};
    std::array<double, 2> wander_rate_hz{0.1, 0.8};
    std::array<double, 2> eq_center_hz_pcg{30.0, 350.0};
    std::array<double, 2> eq_center_hz_ecg{3.0, 55.0};
    std::array<double, 2> eq_gain_db{-6.0, 6.0};
    std::array<double, 2> eq_q{0.7, 3.0};

    uint64_t seed = 0;

    void validate() const;
};

AugmentConfig augment_config_from_json(const nlohmann::json& j);
nlohmann::json augment_config_to_json(const AugmentConfig& cfg);
AugmentConfig load_augment_config(const std::string& path);
void save_augment_config(const AugmentConfig& cfg, const std::string& path);

// Noise clips keyed by kind: pcg_clinical, ecg_baseline_wander, ecg_muscle,
// ecg_electrode. Ships with a synthetic stand-in generator so nothing
// depends on external noise corpora.
struct NoiseBank {
    std::map<std::string, std::vector<Recording>> clips;

    static NoiseBank synthetic_standin(double fs, double duration_s, uint64_t seed);

    bool has(const std::string& kind) const;
    const Recording& pick(const std::string& kind, Rng& rng) const;
};

// Harmonic component via median-filtered soft masking of the magnitude
// spectrogram. Too-short input passes through flagged.
Flagged<Recording> hpss(const Recording& rec);

// Adds Gaussian noise scaled for an exact signal-to-noise ratio. Silent
// input passes through flagged; +infinity is the no-op sentinel.
Flagged<Recording> add_white_noise(const Recording& rec, double snr_db, Rng& rng);

// WSOLA time stretch: output length = round(len/rate), pitch preserved.
Recording time_stretch(const Recording& rec, double rate);

Recording amplitude_modulation(const Recording& rec, double depth, double mod_hz, Rng& rng);

// Sinusoidal drift by default; a bank clip (scaled to peak `amp`) when one
// is supplied.
Recording baseline_wander(const Recording& rec, double amp, double wander_hz, Rng& rng,
                          const Recording* clip = nullptr);

// Peaking biquad (Audio-EQ-Cookbook form), forward application.
Recording parametric_eq(const Recording& rec, double center_hz, double gain_db, double q);

// Mixes a random slice of a matching-kind bank clip at the given SNR,
// tiling short clips with a 50 ms equal-power crossfade.
Recording add_clinical_noise(const Recording& rec, const NoiseBank& bank, double snr_db, Rng& rng);

struct AugmentOutcome {
    Recording rec;
    std::vector<std::string> applied;
};

// Applies the full offline pipeline in fixed order, each stage firing with
// its configured probability.
AugmentOutcome augment_single(const Recording& rec, const AugmentConfig& cfg,
                              const NoiseBank& bank, Rng& rng);

struct MultiAugmentOutcome {
    MultiRecord rec;
    std::vector<std::string> applied;
};

// Same pipeline per channel, but with one shared time-stretch decision so
// channels stay aligned.
MultiAugmentOutcome augment_multi(const MultiRecord& rec, const AugmentConfig& cfg,
                                  const NoiseBank& bank, Rng& rng);

// Deterministic mask primitives behind online_augment: zero a run of STFT
// frames, or the bins covered by a run of mel-equivalent bands, then invert.
std::vector<double> apply_time_mask(const std::vector<double>& x, size_t frame0, size_t n_frames,
                                    int window_len = 128, int hop = 32);
std::vector<double> apply_freq_mask(const std::vector<double>& x, double fs, int band0,
                                    int n_bands, int window_len = 128, int hop = 32);

// Training-time masking/stretching; preserves fragment length exactly.
Fragment online_augment(const Fragment& frag, const AugmentConfig& cfg, Rng& rng);

struct AugmentCounts {
    int normal = 0;
    int abnormal = 0;

    int of(Label l) const { return l == Label::Normal ? normal : abnormal; }
};

struct AugmentedRecord {
    MultiRecord rec;
    std::string source_subject;
    uint64_t seed = 0;
    std::vector<std::string> applied_ops;
};

// Emits counts.of(label) augmented copies per source subject with seeds
// derived from (master seed, subject id, copy index), so the result does
// not depend on iteration order.
std::vector<AugmentedRecord> make_augmented_dataset(const std::vector<MultiRecord>& records,
                                                    const AugmentCounts& counts,
                                                    const AugmentConfig& cfg,
                                                    const NoiseBank& bank, uint64_t seed);

}  // namespace cardioforge::augment
