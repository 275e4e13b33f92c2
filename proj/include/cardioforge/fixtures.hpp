#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cardioforge/common.hpp"
#include "cardioforge/signal_io.hpp"

namespace cardioforge::fixtures {

// Channel layout of a generated dataset; mirrors the run modes.
enum class DatasetMode { SinglePcg, Multimodal, Multichannel };

std::string to_string(DatasetMode mode);
DatasetMode mode_from_string(const std::string& s);  // unknown -> ConfigError

// Channel sites emitted per subject: {"pcg"}, {"pcg", "ecg"}, or six
// auscultation sites for the multichannel layout.
std::vector<std::string> mode_sites(DatasetMode mode);

struct FixtureSpec {
    std::size_t n_subjects = 10;
    DatasetMode mode = DatasetMode::SinglePcg;
    double fs = 1000.0;
    double duration_s = 4.0;
    double heart_rate_hz = 1.2;
    double first_cycle_s = 0.15;    // center of the first S1 burst
    double systole_fraction = 0.3;  // S2 delay as a fraction of the cycle
    std::uint64_t seed = 0;
    std::string dataset = "fixtures";

    void validate() const;  // ArgumentError
};

// Timing contract shared by the generator and the band-energy checks, as
// offsets in seconds from each cycle onset (the S1 center).
struct CycleLandmarks {
    double period_s = 0.0;
    double s1_offset = 0.0;
    double s2_offset = 0.0;
    double murmur_lo = 0.0;  // systolic stretch clear of both bursts
    double murmur_hi = 0.0;
    double quiet_lo = 0.0;  // mid-diastolic stretch
    double quiet_hi = 0.0;
};

CycleLandmarks cycle_landmarks(const FixtureSpec& spec);

// S1 centers of every complete cycle that fits inside the record.
std::vector<double> cycle_onsets(const FixtureSpec& spec);

// One heart-sound channel: Gaussian-enveloped S1/S2 tone bursts per cycle
// over a small noise floor; abnormal subjects get a band-limited systolic
// murmur (140-260 Hz) with a raised-cosine envelope.
std::vector<double> synth_pcg(const FixtureSpec& spec, Label label, Rng& rng);

// Spike-train pseudo-ECG: biphasic QRS just before each S1 plus small P and
// T bumps; identical for both classes.
std::vector<double> synth_ecg(const FixtureSpec& spec, Rng& rng);

// Deterministic subject `fx_<index>`; even indices are normal, odd abnormal.
// Channels follow mode_sites(spec.mode).
MultiRecord make_subject(const FixtureSpec& spec, std::size_t index);

// Writes one float32 WAV per channel plus manifest.jsonl under out_dir and
// returns the entries. Unwritable destination -> IoError; n_subjects = 0
// still writes an empty manifest.
std::vector<ManifestEntry> write_fixtures(const FixtureSpec& spec,
                                          const std::filesystem::path& out_dir);

}  // namespace cardioforge::fixtures
