#include "cardioforge/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cardioforge/dsp.hpp"

using nlohmann::json;

namespace cardioforge::augment {

namespace {
constexpr double kPi = 3.14159265358979323846;

double rms(const std::vector<double>& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}
}  // namespace

void AugmentConfig::validate() const {
    const double probs[] = {p_hpss,          p_white_noise, p_time_stretch,
                            p_amplitude_modulation, p_baseline_wander, p_parametric_eq,
                            p_clinical_noise, p_online_mask, p_online_stretch};
    for (double p : probs) {
        if (p < 0.0 || p > 1.0) throw ConfigError("augment: probability outside [0,1]");
    }
    const std::array<double, 2> ranges[] = {stretch_range, white_snr_db, clinical_snr_db,
                                            am_depth,      am_rate_hz,   wander_amp,
                                            wander_rate_hz, eq_center_hz_pcg, eq_center_hz_ecg,
                                            eq_gain_db,    eq_q};
    for (const auto& r : ranges) {
        if (r[0] > r[1]) throw ConfigError("augment: range lower bound above upper bound");
    }
    if (stretch_range[0] <= 0.0) throw ConfigError("augment: stretch rate must be positive");
}

namespace {

void put_range(json& j, const std::string& key, const std::array<double, 2>& r) { j[key] = r; }

std::array<double, 2> get_range(const json& j, const std::string& key,
                                const std::array<double, 2>& fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<std::array<double, 2>>();
}

}  // namespace

AugmentConfig augment_config_from_json(const json& j) {
    AugmentConfig cfg;
    const json probs = j.value("probabilities", json::object());
    cfg.p_hpss = probs.value("hpss", cfg.p_hpss);
    cfg.p_white_noise = probs.value("white_noise", cfg.p_white_noise);
    cfg.p_time_stretch = probs.value("time_stretch", cfg.p_time_stretch);
    cfg.p_amplitude_modulation = probs.value("amplitude_modulation", cfg.p_amplitude_modulation);
    cfg.p_baseline_wander = probs.value("baseline_wander", cfg.p_baseline_wander);
    cfg.p_parametric_eq = probs.value("parametric_eq", cfg.p_parametric_eq);
    cfg.p_clinical_noise = probs.value("clinical_noise", cfg.p_clinical_noise);
    cfg.p_online_mask = probs.value("online_mask", cfg.p_online_mask);
    cfg.p_online_stretch = probs.value("online_stretch", cfg.p_online_stretch);

    const json ranges = j.value("ranges", json::object());
    cfg.stretch_range = get_range(ranges, "stretch", cfg.stretch_range);
    cfg.white_snr_db = get_range(ranges, "white_snr_db", cfg.white_snr_db);
    cfg.clinical_snr_db = get_range(ranges, "clinical_snr_db", cfg.clinical_snr_db);
    cfg.am_depth = get_range(ranges, "am_depth", cfg.am_depth);
    cfg.am_rate_hz = get_range(ranges, "am_rate_hz", cfg.am_rate_hz);
    cfg.wander_amp = get_range(ranges, "wander_amp", cfg.wander_amp);
    cfg.wander_rate_hz = get_range(ranges, "wander_rate_hz", cfg.wander_rate_hz);
    cfg.eq_center_hz_pcg = get_range(ranges, "eq_center_hz_pcg", cfg.eq_center_hz_pcg);
    cfg.eq_center_hz_ecg = get_range(ranges, "eq_center_hz_ecg", cfg.eq_center_hz_ecg);
    cfg.eq_gain_db = get_range(ranges, "eq_gain_db", cfg.eq_gain_db);
    cfg.eq_q = get_range(ranges, "eq_q", cfg.eq_q);

    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

AugmentConfig load_augment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("augment config: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& err) {
        throw ConfigError("augment config: bad JSON in " + path + ": " + err.what());
    }
    return augment_config_from_json(j);
}

json augment_config_to_json(const AugmentConfig& cfg) {
    json j;
    j["probabilities"] = {{"hpss", cfg.p_hpss},
                          {"white_noise", cfg.p_white_noise},
                          {"time_stretch", cfg.p_time_stretch},
                          {"amplitude_modulation", cfg.p_amplitude_modulation},
                          {"baseline_wander", cfg.p_baseline_wander},
                          {"parametric_eq", cfg.p_parametric_eq},
                          {"clinical_noise", cfg.p_clinical_noise},
                          {"online_mask", cfg.p_online_mask},
                          {"online_stretch", cfg.p_online_stretch}};
    json ranges;
    put_range(ranges, "stretch", cfg.stretch_range);
    put_range(ranges, "white_snr_db", cfg.white_snr_db);
    put_range(ranges, "clinical_snr_db", cfg.clinical_snr_db);
    put_range(ranges, "am_depth", cfg.am_depth);
    put_range(ranges, "am_rate_hz", cfg.am_rate_hz);
    put_range(ranges, "wander_amp", cfg.wander_amp);
    put_range(ranges, "wander_rate_hz", cfg.wander_rate_hz);
    put_range(ranges, "eq_center_hz_pcg", cfg.eq_center_hz_pcg);
    put_range(ranges, "eq_center_hz_ecg", cfg.eq_center_hz_ecg);
    put_range(ranges, "eq_gain_db", cfg.eq_gain_db);
    put_range(ranges, "eq_q", cfg.eq_q);
    j["ranges"] = ranges;
    j["seed"] = cfg.seed;
    return j;
}

void save_augment_config(const AugmentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("augment config: cannot open for writing: " + path);
    out << augment_config_to_json(cfg).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// NoiseBank

bool NoiseBank::has(const std::string& kind) const {
    auto it = clips.find(kind);
    return it != clips.end() && !it->second.empty();
}

const Recording& NoiseBank::pick(const std::string& kind, Rng& rng) const {
    auto it = clips.find(kind);
    if (it == clips.end() || it->second.empty()) {
        throw ConfigError("noise bank: no clips of kind " + kind);
    }
    return it->second[rng.below(it->second.size())];
}

namespace {

void normalize_peak(std::vector<double>& x) {
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 1e-12) {
        for (double& v : x) v /= peak;
    }
}

}  // namespace

NoiseBank NoiseBank::synthetic_standin(double fs, double duration_s, uint64_t seed) {
    NoiseBank bank;
    const auto n = static_cast<size_t>(std::llround(duration_s * fs));
    Rng rng(derive_seed(seed, "noise_bank"));

    // Stationary rumble with slow amplitude bursts, band-limited like ward
    // noise picked up by a stethoscope.
    {
        Recording clip;
        clip.fs = fs;
        clip.modality = Modality::PCG;
        clip.samples.resize(n);
        for (auto& v : clip.samples) v = rng.normal();
        clip = dsp::bandpass(clip, dsp::BandpassSpec{25.0, std::min(400.0, fs / 2 - 1.0), 2, fs});
        const double burst_hz = 0.4;
        for (size_t i = 0; i < n; ++i) {
            clip.samples[i] *= 1.0 + 0.6 * std::sin(2.0 * kPi * burst_hz * i / fs);
        }
        normalize_peak(clip.samples);
        bank.clips["pcg_clinical"].push_back(std::move(clip));
    }
    // Slow multi-tone drift.
    {
        Recording clip;
        clip.fs = fs;
        clip.modality = Modality::ECG;
        clip.samples.assign(n, 0.0);
        for (double hz : {0.15, 0.23, 0.38}) {
            const double phase = rng.uniform(0.0, 2.0 * kPi);
            const double amp = rng.uniform(0.3, 1.0);
            for (size_t i = 0; i < n; ++i) {
                clip.samples[i] += amp * std::sin(2.0 * kPi * hz * i / fs + phase);
            }
        }
        normalize_peak(clip.samples);
        bank.clips["ecg_baseline_wander"].push_back(std::move(clip));
    }
    // Broadband muscle artefact.
    {
        Recording clip;
        clip.fs = fs;
        clip.modality = Modality::ECG;
        clip.samples.resize(n);
        for (auto& v : clip.samples) v = rng.normal();
        clip = dsp::bandpass(clip, dsp::BandpassSpec{20.0, std::min(120.0, fs / 2 - 1.0), 2, fs});
        normalize_peak(clip.samples);
        bank.clips["ecg_muscle"].push_back(std::move(clip));
    }
    // Electrode motion: smoothed random steps.
    {
        Recording clip;
        clip.fs = fs;
        clip.modality = Modality::ECG;
        clip.samples.assign(n, 0.0);
        double level = 0.0;
        size_t next_step = 0;
        for (size_t i = 0; i < n; ++i) {
            if (i == next_step) {
                level = rng.uniform(-1.0, 1.0);
                next_step = i + 1 + rng.below(static_cast<uint64_t>(fs));
            }
            clip.samples[i] = level;
        }
        // One-pole smoothing so steps become motion-like ramps.
        double state = 0.0;
        const double a = std::exp(-1.0 / (0.02 * fs));
        for (auto& v : clip.samples) {
            state = a * state + (1.0 - a) * v;
            v = state;
        }
        normalize_peak(clip.samples);
        bank.clips["ecg_electrode"].push_back(std::move(clip));
    }
    return bank;
}

// ---------------------------------------------------------------------------
// Individual augmentations

namespace {
constexpr int kHpssWin = 512;
constexpr int kHpssHop = 128;
constexpr int kMedianKernel = 17;

double median_of(std::vector<double>& scratch) {
    const size_t mid = scratch.size() / 2;
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<ptrdiff_t>(mid), scratch.end());
    return scratch[mid];
}
}  // namespace

Flagged<Recording> hpss(const Recording& rec) {
    rec.validate();
    Flagged<Recording> result{rec, ""};
    if (rec.samples.size() < static_cast<size_t>(kHpssWin)) {
        result.flag = "record_shorter_than_hpss_window";
        return result;
    }

    const dsp::ComplexMatrix S = dsp::stft(rec.samples, kHpssWin, kHpssHop);
    dsp::Matrix mag(S.rows, S.cols);
    for (size_t i = 0; i < S.data.size(); ++i) mag.data[i] = std::abs(S.data[i]);

    const int half = kMedianKernel / 2;
    dsp::Matrix harm(S.rows, S.cols), perc(S.rows, S.cols);
    std::vector<double> scratch;
    scratch.reserve(kMedianKernel);
    for (size_t b = 0; b < S.rows; ++b) {
        for (size_t t = 0; t < S.cols; ++t) {
            scratch.clear();  // median across time
            for (int dt = -half; dt <= half; ++dt) {
                const long tt = static_cast<long>(t) + dt;
                if (tt >= 0 && tt < static_cast<long>(S.cols)) scratch.push_back(mag.at(b, tt));
            }
            harm.at(b, t) = median_of(scratch);
        }
    }
    for (size_t t = 0; t < S.cols; ++t) {
        for (size_t b = 0; b < S.rows; ++b) {
            scratch.clear();  // median across frequency
            for (int db = -half; db <= half; ++db) {
                const long bb = static_cast<long>(b) + db;
                if (bb >= 0 && bb < static_cast<long>(S.rows)) scratch.push_back(mag.at(bb, t));
            }
            perc.at(b, t) = median_of(scratch);
        }
    }

    dsp::ComplexMatrix masked(S.rows, S.cols);
    for (size_t i = 0; i < S.data.size(); ++i) {
        const double h2 = harm.data[i] * harm.data[i];
        const double p2 = perc.data[i] * perc.data[i];
        const double mask = h2 + p2 > 1e-24 ? h2 / (h2 + p2) : 0.0;
        masked.data[i] = S.data[i] * mask;
    }
    result.value.samples = dsp::istft(masked, kHpssWin, kHpssHop, rec.samples.size());
    return result;
}

Flagged<Recording> add_white_noise(const Recording& rec, double snr_db, Rng& rng) {
    rec.validate();
    Flagged<Recording> result{rec, ""};
    if (std::isinf(snr_db) && snr_db > 0) return result;  // no-op sentinel
    if (!std::isfinite(snr_db)) throw ArgumentError("white noise: snr_db must be finite");

    const double signal_rms = rms(rec.samples);
    if (signal_rms < 1e-12) {
        result.flag = "silent_input_snr_undefined";
        return result;
    }
    std::vector<double> noise(rec.samples.size());
    for (auto& v : noise) v = rng.normal();
    const double target_rms = signal_rms * std::pow(10.0, -snr_db / 20.0);
    const double scale = target_rms / rms(noise);
    for (size_t i = 0; i < noise.size(); ++i) result.value.samples[i] += scale * noise[i];
    return result;
}

Recording time_stretch(const Recording& rec, double rate) {
    rec.validate();
    if (rate <= 0.0) throw ArgumentError("time stretch: rate must be positive");
    if (std::abs(rate - 1.0) < 1e-12) return rec;

    const auto& x = rec.samples;
    const long n = static_cast<long>(x.size());
    const long out_len = std::llround(static_cast<double>(n) / rate);
    Recording out = rec;

    const int win = 512, hop = 128, tol = 64;
    if (n < win + 2 * tol + 1 || out_len <= win) {
        // Too short for overlap-add search; nearest-sample rescale keeps the
        // length contract for stubby inputs.
        out.samples.resize(static_cast<size_t>(out_len));
        for (long m = 0; m < out_len; ++m) {
            const long src = std::min<long>(n - 1, std::llround(static_cast<double>(m) * rate));
            out.samples[static_cast<size_t>(m)] = x[static_cast<size_t>(src)];
        }
        return out;
    }

    std::vector<double> w(win);
    for (int i = 0; i < win; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / win));

    const long n_frames = (out_len - win) / hop + 2;
    std::vector<double> acc(static_cast<size_t>(n_frames - 1) * hop + win, 0.0);
    std::vector<double> norm(acc.size(), 0.0);

    auto add_frame = [&](long out_pos, long src_pos) {
        for (int i = 0; i < win; ++i) {
            acc[out_pos + i] += w[i] * x[src_pos + i];
            norm[out_pos + i] += w[i];
        }
    };

    long prev = 0;
    add_frame(0, 0);
    for (long k = 1; k < n_frames; ++k) {
        // The natural continuation of the previous copy is the reference;
        // search around the nominal analysis point for the best match.
        const long natural = std::min(prev + hop, n - win);
        const long nominal = std::llround(static_cast<double>(k) * hop * rate);
        const long lo = std::max(0L, nominal - tol);
        const long hi = std::min(n - win, nominal + tol);
        long best = std::clamp(nominal, 0L, n - win);
        if (lo <= hi) {
            double best_score = -1e300;
            for (long cand = lo; cand <= hi; ++cand) {
                double dot = 0.0, energy = 1e-12;
                for (int i = 0; i < win; ++i) {
                    dot += x[cand + i] * x[natural + i];
                    energy += x[cand + i] * x[cand + i];
                }
                const double score = dot / std::sqrt(energy);
                if (score > best_score) {
                    best_score = score;
                    best = cand;
                }
            }
        }
        add_frame(k * hop, best);
        prev = best;
    }

    out.samples.assign(static_cast<size_t>(out_len), 0.0);
    for (long i = 0; i < out_len; ++i) {
        out.samples[i] = norm[i] > 1e-9 ? acc[i] / norm[i] : 0.0;
    }
    return out;
}

Recording amplitude_modulation(const Recording& rec, double depth, double mod_hz, Rng& rng) {
    rec.validate();
    if (depth < 0.0 || depth >= 1.0) throw ArgumentError("amplitude modulation: depth must be in [0,1)");
    if (mod_hz >= rec.fs / 2) throw ArgumentError("amplitude modulation: rate above Nyquist");
    Recording out = rec;
    if (depth == 0.0) return out;
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    for (size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] *= 1.0 + depth * std::sin(2.0 * kPi * mod_hz * i / rec.fs + phase);
    }
    return out;
}

Recording baseline_wander(const Recording& rec, double amp, double wander_hz, Rng& rng,
                          const Recording* clip) {
    rec.validate();
    if (wander_hz > 1.0) throw ArgumentError("baseline wander: rate above 1 Hz");
    if (amp > 0.5) throw ArgumentError("baseline wander: amplitude above 0.5");
    Recording out = rec;
    if (amp == 0.0) return out;

    if (clip != nullptr) {
        Recording drift = *clip;
        if (std::abs(drift.fs - rec.fs) > 1e-9) drift = dsp::resample(drift, rec.fs);
        double peak = 0.0;
        for (double v : drift.samples) peak = std::max(peak, std::abs(v));
        const double scale = peak > 1e-12 ? amp / peak : 0.0;
        const size_t n = out.samples.size();
        const size_t span = drift.samples.size();
        const size_t offset = span > n ? rng.below(span - n + 1) : 0;
        for (size_t i = 0; i < n; ++i) {
            out.samples[i] += scale * drift.samples[(offset + i) % span];
        }
        return out;
    }

    const double phase = rng.uniform(0.0, 2.0 * kPi);
    for (size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] += amp * std::sin(2.0 * kPi * wander_hz * i / rec.fs + phase);
    }
    return out;
}

Recording parametric_eq(const Recording& rec, double center_hz, double gain_db, double q) {
    rec.validate();
    if (center_hz <= 0.0 || center_hz >= rec.fs / 2) throw ArgumentError("eq: center above Nyquist");
    if (std::abs(gain_db) > 12.0) throw ArgumentError("eq: gain outside +-12 dB");
    if (q < 0.5 || q > 5.0) throw ArgumentError("eq: Q outside [0.5, 5]");

    const double A = std::pow(10.0, gain_db / 40.0);
    const double w0 = 2.0 * kPi * center_hz / rec.fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha / A;
    dsp::Biquad s;
    s.b0 = (1.0 + alpha * A) / a0;
    s.b1 = -2.0 * std::cos(w0) / a0;
    s.b2 = (1.0 - alpha * A) / a0;
    s.a1 = -2.0 * std::cos(w0) / a0;
    s.a2 = (1.0 - alpha / A) / a0;

    Recording out = rec;
    out.samples = dsp::sosfilt({s}, rec.samples);
    return out;
}

namespace {

// Tile a clip to at least `need` samples with an equal-power crossfade.
std::vector<double> tile_clip(const std::vector<double>& clip, size_t need, double fs) {
    if (clip.size() >= need) return clip;
    size_t xfade = static_cast<size_t>(std::llround(0.05 * fs));
    xfade = std::min(xfade, clip.size() / 2);
    std::vector<double> tiled = clip;
    while (tiled.size() < need + clip.size()) {
        const size_t join = tiled.size() - xfade;
        for (size_t i = 0; i < xfade; ++i) {
            const double theta = (static_cast<double>(i) + 0.5) / static_cast<double>(xfade) * kPi / 2.0;
            tiled[join + i] = tiled[join + i] * std::cos(theta) + clip[i] * std::sin(theta);
        }
        tiled.insert(tiled.end(), clip.begin() + static_cast<ptrdiff_t>(xfade), clip.end());
    }
    return tiled;
}

}  // namespace

Recording add_clinical_noise(const Recording& rec, const NoiseBank& bank, double snr_db, Rng& rng) {
    rec.validate();
    std::vector<std::string> kinds;
    if (rec.modality == Modality::PCG) {
        kinds = {"pcg_clinical"};
    } else {
        for (const char* k : {"ecg_muscle", "ecg_electrode", "ecg_baseline_wander"}) {
            if (bank.has(k)) kinds.push_back(k);
        }
    }
    std::erase_if(kinds, [&](const std::string& k) { return !bank.has(k); });
    if (kinds.empty()) throw ConfigError("clinical noise: bank has no clips for this modality");

    const std::string kind = kinds[rng.below(kinds.size())];
    Recording clip = bank.pick(kind, rng);
    if (std::abs(clip.fs - rec.fs) > 1e-9) clip = dsp::resample(clip, rec.fs);

    const size_t n = rec.samples.size();
    const std::vector<double> tiled = tile_clip(clip.samples, n, rec.fs);
    const size_t offset = rng.below(tiled.size() - n + 1);

    std::vector<double> slice(tiled.begin() + static_cast<ptrdiff_t>(offset),
                              tiled.begin() + static_cast<ptrdiff_t>(offset + n));
    const double slice_rms = rms(slice);
    if (slice_rms < 1e-12) return rec;
    const double scale = rms(rec.samples) * std::pow(10.0, -snr_db / 20.0) / slice_rms;

    Recording out = rec;
    for (size_t i = 0; i < n; ++i) out.samples[i] += scale * slice[i];
    return out;
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

struct StretchDecision {
    bool forced = false;
    bool fire = false;
    double rate = 1.0;
};

AugmentOutcome augment_channel(const Recording& rec, const AugmentConfig& cfg,
                               const NoiseBank& bank, Rng& rng, const StretchDecision& shared) {
    AugmentOutcome out{rec, {}};
    auto draw = [&](const std::array<double, 2>& r) { return rng.uniform(r[0], r[1]); };

    if (rng.bernoulli(cfg.p_hpss)) {
        auto h = hpss(out.rec);
        if (!h.flagged()) {
            out.rec = std::move(h.value);
            out.applied.push_back("hpss");
        }
    }
    if (rng.bernoulli(cfg.p_white_noise)) {
        const double snr = draw(cfg.white_snr_db);
        auto n = add_white_noise(out.rec, snr, rng);
        if (!n.flagged()) {
            out.rec = std::move(n.value);
            out.applied.push_back("white_noise");
        }
    }
    bool stretch_fire = shared.forced ? shared.fire : rng.bernoulli(cfg.p_time_stretch);
    double rate = shared.forced ? shared.rate : 1.0;
    if (!shared.forced && stretch_fire) rate = draw(cfg.stretch_range);
    if (stretch_fire) {
        out.rec = time_stretch(out.rec, rate);
        out.applied.push_back("time_stretch");
    }
    if (rng.bernoulli(cfg.p_amplitude_modulation)) {
        const double depth = draw(cfg.am_depth);
        const double mod = draw(cfg.am_rate_hz);
        out.rec = amplitude_modulation(out.rec, depth, mod, rng);
        out.applied.push_back("amplitude_modulation");
    }
    if (rng.bernoulli(cfg.p_baseline_wander)) {
        const double amp = draw(cfg.wander_amp);
        const double hz = draw(cfg.wander_rate_hz);
        const Recording* clip = nullptr;
        if (out.rec.modality == Modality::ECG && bank.has("ecg_baseline_wander")) {
            clip = &bank.pick("ecg_baseline_wander", rng);
        }
        out.rec = baseline_wander(out.rec, amp, hz, rng, clip);
        out.applied.push_back("baseline_wander");
    }
    if (rng.bernoulli(cfg.p_parametric_eq)) {
        const auto& range =
            out.rec.modality == Modality::PCG ? cfg.eq_center_hz_pcg : cfg.eq_center_hz_ecg;
        const double center = rng.log_uniform(range[0], range[1]);
        const double gain = draw(cfg.eq_gain_db);
        const double q = draw(cfg.eq_q);
        out.rec = parametric_eq(out.rec, center, gain, q);
        out.applied.push_back("parametric_eq");
    }
    if (rng.bernoulli(cfg.p_clinical_noise)) {
        const double snr = draw(cfg.clinical_snr_db);
        out.rec = add_clinical_noise(out.rec, bank, snr, rng);
        out.applied.push_back("clinical_noise");
    }
    return out;
}

}  // namespace

AugmentOutcome augment_single(const Recording& rec, const AugmentConfig& cfg,
                              const NoiseBank& bank, Rng& rng) {
    cfg.validate();
    return augment_channel(rec, cfg, bank, rng, StretchDecision{});
}

MultiAugmentOutcome augment_multi(const MultiRecord& rec, const AugmentConfig& cfg,
                                  const NoiseBank& bank, Rng& rng) {
    cfg.validate();
    rec.validate();

    StretchDecision shared;
    shared.forced = true;
    shared.fire = rng.bernoulli(cfg.p_time_stretch);
    if (shared.fire) shared.rate = rng.uniform(cfg.stretch_range[0], cfg.stretch_range[1]);

    MultiAugmentOutcome out;
    out.rec = rec;
    for (size_t c = 0; c < rec.channels.size(); ++c) {
        Rng channel_rng = rng.child("channel", c);
        AugmentOutcome ch = augment_channel(rec.channels[c], cfg, bank, channel_rng, shared);
        out.rec.channels[c] = std::move(ch.rec);
        for (const auto& op : ch.applied) {
            out.applied.push_back("ch" + std::to_string(c) + ":" + op);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Online (training-time) augmentation

namespace {
constexpr int kMaskWin = 128;
constexpr int kMaskHop = 32;
constexpr int kMelEquivBands = 80;
}  // namespace

std::vector<double> apply_time_mask(const std::vector<double>& x, size_t frame0, size_t n_frames,
                                    int window_len, int hop) {
    if (x.size() < static_cast<size_t>(window_len)) return x;
    dsp::ComplexMatrix S = dsp::stft(x, window_len, hop);
    for (size_t t = frame0; t < std::min(S.cols, frame0 + n_frames); ++t) {
        for (size_t b = 0; b < S.rows; ++b) S.at(b, t) = 0.0;
    }
    return dsp::istft(S, window_len, hop, x.size());
}

std::vector<double> apply_freq_mask(const std::vector<double>& x, double fs, int band0,
                                    int n_bands, int window_len, int hop) {
    if (x.size() < static_cast<size_t>(window_len)) return x;
    dsp::ComplexMatrix S = dsp::stft(x, window_len, hop);

    auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    const double mel_top = mel(fs / 2);
    const double lo_hz = hz(mel_top * band0 / kMelEquivBands);
    const double hi_hz = hz(mel_top * std::min(kMelEquivBands, band0 + n_bands) / kMelEquivBands);
    const double bin_hz = fs / window_len;
    const auto lo_bin = static_cast<size_t>(std::ceil(lo_hz / bin_hz));
    const auto hi_bin = std::min(S.rows - 1, static_cast<size_t>(std::floor(hi_hz / bin_hz)));

    for (size_t b = lo_bin; b <= hi_bin && b < S.rows; ++b) {
        for (size_t t = 0; t < S.cols; ++t) S.at(b, t) = 0.0;
    }
    return dsp::istft(S, window_len, hop, x.size());
}

Fragment online_augment(const Fragment& frag, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    Fragment out = frag;
    const size_t len = frag.length();
    if (len == 0) return out;

    if (rng.bernoulli(cfg.p_online_mask) && len >= static_cast<size_t>(kMaskWin)) {
        for (auto& channel : out.channels) {
            const size_t frames = len / kMaskHop + 1;
            if (rng.below(2) == 0) {
                const size_t max_span = std::max<size_t>(1, frames / 10);
                const size_t span = 1 + rng.below(max_span);
                const size_t t0 = rng.below(frames - span + 1);
                channel = apply_time_mask(channel, t0, span, kMaskWin, kMaskHop);
            } else {
                const int n_bands = 1 + static_cast<int>(rng.below(8));
                const int b0 = static_cast<int>(rng.below(kMelEquivBands - n_bands + 1));
                channel = apply_freq_mask(channel, frag.fs, b0, n_bands, kMaskWin, kMaskHop);
            }
        }
    }
    if (rng.bernoulli(cfg.p_online_stretch)) {
        const double rate = rng.uniform(cfg.stretch_range[0], cfg.stretch_range[1]);
        for (auto& channel : out.channels) {
            Recording tmp;
            tmp.fs = frag.fs;
            tmp.samples = channel;
            tmp = time_stretch(tmp, rate);
            // Center-crop or center-pad back to the fixed fragment length.
            std::vector<double> fixed(len, 0.0);
            if (tmp.samples.size() >= len) {
                const size_t start = (tmp.samples.size() - len) / 2;
                std::copy(tmp.samples.begin() + static_cast<ptrdiff_t>(start),
                          tmp.samples.begin() + static_cast<ptrdiff_t>(start + len), fixed.begin());
            } else {
                const size_t start = (len - tmp.samples.size()) / 2;
                std::copy(tmp.samples.begin(), tmp.samples.end(),
                          fixed.begin() + static_cast<ptrdiff_t>(start));
            }
            channel = std::move(fixed);
        }
    }
    return out;
}

std::vector<AugmentedRecord> make_augmented_dataset(const std::vector<MultiRecord>& records,
                                                    const AugmentCounts& counts,
                                                    const AugmentConfig& cfg,
                                                    const NoiseBank& bank, uint64_t seed) {
    cfg.validate();
    if (counts.normal < 0 || counts.abnormal < 0) {
        throw ArgumentError("augmented dataset: counts must be non-negative");
    }
    std::vector<AugmentedRecord> out;
    for (const auto& rec : records) {
        const int copies = counts.of(rec.label);
        for (int copy = 0; copy < copies; ++copy) {
            const uint64_t record_seed = derive_seed(seed, rec.subject_id, static_cast<uint64_t>(copy));
            Rng rng(record_seed);
            MultiAugmentOutcome m = augment_multi(rec, cfg, bank, rng);

            AugmentedRecord ar;
            ar.rec = std::move(m.rec);
            ar.rec.subject_id = rec.subject_id + "_aug" + std::to_string(copy);
            ar.rec.source = SourceTag{SourceKind::Augmented, ""};
            ar.source_subject = rec.subject_id;
            ar.seed = record_seed;
            ar.applied_ops = std::move(m.applied);
            out.push_back(std::move(ar));
        }
    }
    return out;
}

}  // namespace cardioforge::augment
