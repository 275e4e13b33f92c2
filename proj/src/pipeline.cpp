#include "cardioforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <system_error>
#include <thread>
#include <utility>

using nlohmann::json;

namespace cardioforge::pipeline {
namespace fs = std::filesystem;

namespace {

json read_json_file(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw IoError(what + ": cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& err) {
        throw ConfigError(what + ": bad JSON in " + path.string() + ": " + err.what());
    }
}

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("pipeline: cannot create " + path.parent_path().string() + ": " +
                          ec.message());
        }
    }
    std::ofstream out(path);
    if (!out) throw IoError("pipeline: cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("pipeline: write failed: " + path.string());
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError("config: " + ctx + " must be an object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw ConfigError("config: unknown key \"" + item.key() + "\" in " + ctx);
        }
    }
}

void require_upstream(const fs::path& path, const std::string& hint) {
    if (!fs::exists(path)) {
        throw ConfigError("missing upstream artifact: " + path.string() + "; " + hint);
    }
}

fs::path ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("pipeline: cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

std::vector<std::string> scan_dir(const fs::path& run_dir, const fs::path& sub) {
    std::vector<std::string> out;
    const fs::path root = run_dir / sub;
    if (!fs::exists(root)) return out;
    for (const auto& de : fs::recursive_directory_iterator(root)) {
        if (!de.is_regular_file()) continue;
        out.push_back(de.path().lexically_relative(run_dir).generic_string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void update_artifacts(const fs::path& run_dir, const std::string& command,
                      const std::vector<std::string>& files) {
    const fs::path path = run_dir / "artifacts.json";
    json j = json::object();
    if (fs::exists(path)) {
        std::ifstream in(path);
        if (in) {
            try {
                j = json::parse(in);
            } catch (const json::parse_error&) {
                j = json::object();
            }
        }
        if (!j.is_object()) j = json::object();
    }
    j[command] = files;
    write_text(path, j.dump(2) + "\n");
}

void write_resolved_config(const RunConfig& cfg, const fs::path& run_dir) {
    write_text(run_dir / "resolved_config.json", config_to_json(cfg).dump(2) + "\n");
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex mu;
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

int effective_jobs(const RunConfig& cfg) { return cfg.determinism ? 1 : cfg.jobs; }

std::vector<MultiRecord> load_records(const std::vector<ManifestEntry>& entries,
                                      const fs::path& manifest_dir) {
    std::vector<MultiRecord> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(signal_io::load_entry(e, manifest_dir.string()));
    return out;
}

std::vector<ManifestEntry> prefixed_entries(const std::vector<ManifestEntry>& entries,
                                            const std::string& prefix) {
    std::vector<ManifestEntry> out = entries;
    for (auto& e : out) {
        for (auto& p : e.paths) p = prefix + p;
    }
    return out;
}

// Writes one WAV per channel and fills the path/modality/site columns.
void write_entry_channels(const MultiRecord& rec, const fs::path& dir, ManifestEntry& entry) {
    for (const Recording& ch : rec.channels) {
        const std::string name = rec.subject_id + "_" + ch.channel_site + ".wav";
        signal_io::write_wav(ch, (dir / name).string(), /*float32=*/true);
        entry.paths.push_back(name);
        entry.modalities.push_back(ch.modality);
        entry.sites.push_back(ch.channel_site);
    }
}

struct GeneratorPlan {
    std::string name;
    bool mel = false;
};

std::vector<GeneratorPlan> plan_generators(const std::string& arg) {
    if (arg == "diffwave") return {{"diffwave", true}};
    if (arg == "wavegrad") return {{"wavegrad", false}};
    if (arg == "both") return {{"diffwave", true}, {"wavegrad", false}};
    throw ConfigError("unknown generator \"" + arg + "\" (expected diffwave, wavegrad or both)");
}

std::string generator_for(train::DataSource src) {
    switch (src) {
        case train::DataSource::DiffWave:
        case train::DataSource::TrainingASynth: return "diffwave";
        case train::DataSource::WaveGrad:
        case train::DataSource::TrainingBSynth: return "wavegrad";
        case train::DataSource::Original: break;
    }
    throw ArgumentError("generator_for: original data has no generator");
}

const Recording& find_site(const MultiRecord& rec, const std::string& site) {
    for (const Recording& ch : rec.channels) {
        if (ch.channel_site == site) return ch;
    }
    throw ConfigError("subject " + rec.subject_id + " has no channel at site " + site);
}

augment::NoiseBank make_noise_bank(const RunConfig& cfg) {
    return augment::NoiseBank::synthetic_standin(cfg.target_fs, 2.0,
                                                 derive_seed(cfg.seed, "noise-bank", 0));
}

signal_io::SplitResult split_entries(const RunConfig& cfg,
                                     const std::vector<ManifestEntry>& entries) {
    return signal_io::stratified_split(entries, cfg.split_ratios, derive_seed(cfg.seed, "split", 0));
}

std::vector<ManifestEntry> read_preprocessed(const fs::path& run_dir) {
    const fs::path manifest = run_dir / "preprocessed" / "manifest.jsonl";
    require_upstream(manifest, "run `cardioforge preprocess` first");
    return signal_io::read_manifest(manifest.string());
}

// Denoiser training example: a target window, the aligned conditioning mel
// and the global label.
struct TrainExample {
    std::vector<double> x0;
    dsp::Matrix mel;
    bool has_mel = false;
    diffusion::CondLabel label;
};

TrainExample pick_example(const MultiRecord& rec, const RunConfig& cfg, bool want_mel, Rng& rng) {
    const Recording* target = nullptr;
    const Recording* cond = nullptr;
    diffusion::CondLabel cl;
    cl.disease = rec.label == Label::Normal ? diffusion::Disease::Normal
                                            : diffusion::Disease::Abnormal;
    switch (cfg.mode) {
        case DatasetMode::SinglePcg:
            target = &rec.channels.front();
            cond = target;
            break;
        case DatasetMode::Multimodal:
            target = &find_site(rec, "pcg");
            cond = &find_site(rec, "ecg");
            cl.channel_pair = diffusion::ChannelPair{"ecg", "pcg"};
            break;
        case DatasetMode::Multichannel: {
            cond = &find_site(rec, cfg.synth.conditioning_site);
            std::vector<const Recording*> others;
            for (const Recording& ch : rec.channels) {
                if (ch.channel_site != cfg.synth.conditioning_site) others.push_back(&ch);
            }
            if (others.empty()) {
                throw ConfigError("subject " + rec.subject_id + " has only the conditioning site");
            }
            target = others[rng.below(others.size())];
            cl.channel_pair =
                diffusion::ChannelPair{cfg.synth.conditioning_site, target->channel_site};
            break;
        }
    }
    const std::size_t len = target->samples.size();
    const std::size_t w = std::min<std::size_t>(cfg.synth.train_window, len);
    std::size_t off = 0;
    if (len > w) off = rng.below(len - w + 1);

    TrainExample ex;
    ex.label = cl;
    ex.x0.assign(target->samples.begin() + static_cast<std::ptrdiff_t>(off),
                 target->samples.begin() + static_cast<std::ptrdiff_t>(off + w));
    if (want_mel) {
        Recording window;
        window.fs = cond->fs;
        window.modality = cond->modality;
        window.channel_site = cond->channel_site;
        window.samples.assign(cond->samples.begin() + static_cast<std::ptrdiff_t>(off),
                              cond->samples.begin() + static_cast<std::ptrdiff_t>(off + w));
        dsp::MelSpec ms;
        ms.window_len = static_cast<int>(cfg.synth.mel_win);
        ms.hop = static_cast<int>(cfg.synth.mel_hop);
        ms.n_mels = static_cast<int>(cfg.synth.n_mels);
        ms.fs = window.fs;
        ex.mel = dsp::mel_spectrogram(window, ms);
        ex.has_mel = true;
    }
    return ex;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void SynthConfig::validate() const {
    if (schedule_steps == 0) throw ConfigError("synth: schedule_steps must be positive");
    if (!(beta_min > 0.0) || !(beta_max < 1.0) || beta_min > beta_max) {
        throw ConfigError("synth: betas must satisfy 0 < min <= max < 1");
    }
    if (train_steps == 0) throw ConfigError("synth: train_steps must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("synth: learning rate must be positive");
    if (denoiser_layers == 0 || denoiser_channels == 0 || denoiser_kernel == 0) {
        throw ConfigError("synth: denoiser dimensions must be positive");
    }
    if (n_mels == 0) throw ConfigError("synth: n_mels must be positive");
    if (mel_win < 2 || (mel_win & (mel_win - 1)) != 0) {
        throw ConfigError("synth: mel_win must be a power of two");
    }
    if (mel_hop == 0) throw ConfigError("synth: mel_hop must be positive");
    if (train_window < mel_win) {
        throw ConfigError("synth: train_window must cover at least one mel window");
    }
    if (n_patients == 0) throw ConfigError("synth: n_patients must be positive");
    if (ratio_normal + ratio_abnormal == 0) throw ConfigError("synth: class ratio must be positive");
    if (!(duration_s > 0.0)) throw ConfigError("synth: duration must be positive");
}

double RunConfig::effective_window_s() const {
    if (window_s > 0.0) return window_s;
    return mode == DatasetMode::Multichannel ? 2.0 : 4.0;
}

std::size_t RunConfig::n_inputs() const { return fixtures::mode_sites(mode).size(); }

model::EncoderConfig RunConfig::encoder_config() const {
    if (encoder_preset == "toy") return model::EncoderConfig::toy_preset();
    if (encoder_preset == "paper") return model::EncoderConfig::paper_preset();
    throw ConfigError("unknown encoder preset \"" + encoder_preset + "\"");
}

dsp::SegmentSpec RunConfig::segment_spec() const {
    dsp::SegmentSpec s;
    s.window_s = effective_window_s();
    s.overlap_s = overlap_s;
    s.skip_head_s = skip_head_s;
    return s;
}

RunConfig RunConfig::resolve() const {
    RunConfig cfg = *this;
    cfg.window_s = cfg.effective_window_s();
    if (cfg.synth.conditioning_site.empty()) {
        if (cfg.mode == DatasetMode::Multimodal) {
            cfg.synth.conditioning_site = "ecg";
        } else if (cfg.mode == DatasetMode::Multichannel) {
            cfg.synth.conditioning_site = fixtures::mode_sites(cfg.mode).front();
        }
    }
    cfg.fixture.mode = cfg.mode;
    cfg.fixture.seed = derive_seed(cfg.seed, "fixtures", 0);
    cfg.fixture.dataset = "fixtures";
    if (!cfg.hparams_path.empty()) {
        const json j = read_json_file(resolve_config_path(cfg.hparams_path), "hparams");
        check_keys(j, {"optimizer", "lr_schedule", "head"}, "hparams");
        if (j.contains("optimizer")) cfg.optimizer = train::optimizer_from_json(j.at("optimizer"));
        if (j.contains("lr_schedule")) {
            cfg.lr_schedule = train::lr_schedule_from_json(j.at("lr_schedule"));
        }
        if (j.contains("head")) {
            check_keys(j.at("head"), {"hidden_layers", "hidden_size"}, "hparams.head");
            cfg.head_hidden_layers = j.at("head").value("hidden_layers", cfg.head_hidden_layers);
            cfg.head_hidden_size = j.at("head").value("hidden_size", cfg.head_hidden_size);
        }
        cfg.hparams_path.clear();
    }
    if (cfg.determinism) cfg.jobs = 1;
    return cfg;
}

void RunConfig::validate() const {
    if (encoder_preset != "toy" && encoder_preset != "paper") {
        throw ConfigError("unknown encoder preset \"" + encoder_preset + "\"");
    }
    if (encoder_preset == "paper" && target_fs != 4125.0 && target_fs != 16000.0) {
        throw ConfigError("paper preset pins target_fs to 4125 or 16000 Hz, got " +
                          format_double(target_fs));
    }
    if (!(target_fs > 0.0)) throw ConfigError("target_fs must be positive");
    if (augment.eq_center_hz_pcg[1] >= target_fs / 2.0 ||
        augment.eq_center_hz_ecg[1] >= target_fs / 2.0) {
        throw ConfigError("augment EQ center range reaches the Nyquist rate at target_fs " +
                          format_double(target_fs));
    }
    segment_spec().validate();
    double ratio_sum = 0.0;
    for (double r : split_ratios) {
        if (r < 0.0) throw ConfigError("split ratios must be non-negative");
        ratio_sum += r;
    }
    if (std::abs(ratio_sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    if (head_hidden_layers == 0 || head_hidden_size == 0) {
        throw ConfigError("head dimensions must be positive");
    }
    optimizer.validate();
    lr_schedule.validate();
    augment.validate();
    synth.validate();
    fixture.validate();
    if (fixture.fs < 800.0) {
        throw ConfigError("fixture fs must be at least 800 Hz for the classification band");
    }
    const double need = skip_head_s + effective_window_s();
    if (fixture.duration_s + 1e-9 < need) {
        throw ConfigError("fixture duration " + format_double(fixture.duration_s) +
                          " s is shorter than segmentation window plus head skip (" +
                          format_double(need) + " s)");
    }
    if (mode == DatasetMode::SinglePcg && synth.duration_s + 1e-9 < need) {
        throw ConfigError("synth duration " + format_double(synth.duration_s) +
                          " s is shorter than segmentation window plus head skip (" +
                          format_double(need) + " s)");
    }
}

RunConfig config_from_json(const json& j) {
    check_keys(j, {"mode",          "encoder_preset", "target_fs",
                   "window_s",      "overlap_s",      "skip_head_s",
                   "split_ratios",  "seed",           "determinism",
                   "jobs",          "optimizer",      "lr_schedule",
                   "head",          "hparams_path",   "schedule_path",
                   "synthetic_segment_cap", "augment_copies", "augment",
                   "synth",         "fixture"},
               "run config");
    RunConfig cfg;
    if (j.contains("mode")) cfg.mode = fixtures::mode_from_string(j.at("mode").get<std::string>());
    cfg.encoder_preset = j.value("encoder_preset", cfg.encoder_preset);
    cfg.target_fs = j.value("target_fs", cfg.target_fs);
    cfg.window_s = j.value("window_s", cfg.window_s);
    cfg.overlap_s = j.value("overlap_s", cfg.overlap_s);
    cfg.skip_head_s = j.value("skip_head_s", cfg.skip_head_s);
    if (j.contains("split_ratios")) {
        const auto& r = j.at("split_ratios");
        if (!r.is_array() || r.size() != 3) {
            throw ConfigError("config: split_ratios must be an array of three numbers");
        }
        for (std::size_t i = 0; i < 3; ++i) cfg.split_ratios[i] = r.at(i).get<double>();
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.determinism = j.value("determinism", cfg.determinism);
    cfg.jobs = j.value("jobs", cfg.jobs);
    if (j.contains("optimizer")) cfg.optimizer = train::optimizer_from_json(j.at("optimizer"));
    if (j.contains("lr_schedule")) {
        cfg.lr_schedule = train::lr_schedule_from_json(j.at("lr_schedule"));
    }
    if (j.contains("head")) {
        check_keys(j.at("head"), {"hidden_layers", "hidden_size"}, "head");
        cfg.head_hidden_layers = j.at("head").value("hidden_layers", cfg.head_hidden_layers);
        cfg.head_hidden_size = j.at("head").value("hidden_size", cfg.head_hidden_size);
    }
    cfg.hparams_path = j.value("hparams_path", cfg.hparams_path);
    cfg.schedule_path = j.value("schedule_path", cfg.schedule_path);
    cfg.synthetic_segment_cap = j.value("synthetic_segment_cap", cfg.synthetic_segment_cap);
    if (j.contains("augment_copies")) {
        check_keys(j.at("augment_copies"), {"normal", "abnormal"}, "augment_copies");
        cfg.augment_copies_normal =
            j.at("augment_copies").value("normal", cfg.augment_copies_normal);
        cfg.augment_copies_abnormal =
            j.at("augment_copies").value("abnormal", cfg.augment_copies_abnormal);
    }
    if (j.contains("augment")) cfg.augment = augment::augment_config_from_json(j.at("augment"));
    if (j.contains("synth")) {
        const json& s = j.at("synth");
        check_keys(s,
                   {"schedule_steps", "beta_min", "beta_max", "train_steps", "learning_rate",
                    "train_window", "denoiser_layers", "denoiser_channels", "denoiser_kernel",
                    "n_mels", "mel_win", "mel_hop", "n_patients", "ratio_normal",
                    "ratio_abnormal", "duration_s", "conditioning_site"},
                   "synth");
        SynthConfig& sc = cfg.synth;
        sc.schedule_steps = s.value("schedule_steps", sc.schedule_steps);
        sc.beta_min = s.value("beta_min", sc.beta_min);
        sc.beta_max = s.value("beta_max", sc.beta_max);
        sc.train_steps = s.value("train_steps", sc.train_steps);
        sc.learning_rate = s.value("learning_rate", sc.learning_rate);
        sc.train_window = s.value("train_window", sc.train_window);
        sc.denoiser_layers = s.value("denoiser_layers", sc.denoiser_layers);
        sc.denoiser_channels = s.value("denoiser_channels", sc.denoiser_channels);
        sc.denoiser_kernel = s.value("denoiser_kernel", sc.denoiser_kernel);
        sc.n_mels = s.value("n_mels", sc.n_mels);
        sc.mel_win = s.value("mel_win", sc.mel_win);
        sc.mel_hop = s.value("mel_hop", sc.mel_hop);
        sc.n_patients = s.value("n_patients", sc.n_patients);
        sc.ratio_normal = s.value("ratio_normal", sc.ratio_normal);
        sc.ratio_abnormal = s.value("ratio_abnormal", sc.ratio_abnormal);
        sc.duration_s = s.value("duration_s", sc.duration_s);
        sc.conditioning_site = s.value("conditioning_site", sc.conditioning_site);
    }
    if (j.contains("fixture")) {
        const json& f = j.at("fixture");
        check_keys(f, {"n_subjects", "fs", "duration_s", "heart_rate_hz"}, "fixture");
        cfg.fixture.n_subjects = f.value("n_subjects", cfg.fixture.n_subjects);
        cfg.fixture.fs = f.value("fs", cfg.fixture.fs);
        cfg.fixture.duration_s = f.value("duration_s", cfg.fixture.duration_s);
        cfg.fixture.heart_rate_hz = f.value("heart_rate_hz", cfg.fixture.heart_rate_hz);
    }
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["mode"] = fixtures::to_string(cfg.mode);
    j["encoder_preset"] = cfg.encoder_preset;
    j["target_fs"] = cfg.target_fs;
    j["window_s"] = cfg.window_s;
    j["overlap_s"] = cfg.overlap_s;
    j["skip_head_s"] = cfg.skip_head_s;
    j["split_ratios"] = cfg.split_ratios;
    j["seed"] = cfg.seed;
    j["determinism"] = cfg.determinism;
    j["jobs"] = cfg.jobs;
    j["optimizer"] = train::optimizer_to_json(cfg.optimizer);
    j["lr_schedule"] = train::lr_schedule_to_json(cfg.lr_schedule);
    j["head"] = {{"hidden_layers", cfg.head_hidden_layers}, {"hidden_size", cfg.head_hidden_size}};
    j["hparams_path"] = cfg.hparams_path;
    j["schedule_path"] = cfg.schedule_path;
    j["synthetic_segment_cap"] = cfg.synthetic_segment_cap;
    j["augment_copies"] = {{"normal", cfg.augment_copies_normal},
                           {"abnormal", cfg.augment_copies_abnormal}};
    j["augment"] = augment::augment_config_to_json(cfg.augment);
    j["synth"] = {{"schedule_steps", cfg.synth.schedule_steps},
                  {"beta_min", cfg.synth.beta_min},
                  {"beta_max", cfg.synth.beta_max},
                  {"train_steps", cfg.synth.train_steps},
                  {"learning_rate", cfg.synth.learning_rate},
                  {"train_window", cfg.synth.train_window},
                  {"denoiser_layers", cfg.synth.denoiser_layers},
                  {"denoiser_channels", cfg.synth.denoiser_channels},
                  {"denoiser_kernel", cfg.synth.denoiser_kernel},
                  {"n_mels", cfg.synth.n_mels},
                  {"mel_win", cfg.synth.mel_win},
                  {"mel_hop", cfg.synth.mel_hop},
                  {"n_patients", cfg.synth.n_patients},
                  {"ratio_normal", cfg.synth.ratio_normal},
                  {"ratio_abnormal", cfg.synth.ratio_abnormal},
                  {"duration_s", cfg.synth.duration_s},
                  {"conditioning_site", cfg.synth.conditioning_site}};
    j["fixture"] = {{"n_subjects", cfg.fixture.n_subjects},
                    {"fs", cfg.fixture.fs},
                    {"duration_s", cfg.fixture.duration_s},
                    {"heart_rate_hz", cfg.fixture.heart_rate_hz}};
    return j;
}

RunConfig load_run_config(const fs::path& path) {
    return config_from_json(read_json_file(path, "run config"));
}

fs::path resolve_config_path(const std::string& arg) {
    fs::path p(arg);
    if (p.is_absolute() || fs::exists(p)) return p;
    if (const char* env = std::getenv("CARDIOFORGE_CONFIG_DIR")) {
        const fs::path candidate = fs::path(env) / p;
        if (fs::exists(candidate)) return candidate;
    }
    return p;
}

std::vector<train::ScheduleStage> fixture_schedule() {
    using train::DataSource;
    auto stage = [](std::vector<train::SourceSpec> sources, std::size_t epochs) {
        train::ScheduleStage st;
        st.sources = std::move(sources);
        st.epochs = epochs;
        return st;
    };
    return {
        stage({{DataSource::Original, 6, 3}}, 3),
        stage({{DataSource::DiffWave, 3, 1}}, 1),
        stage({{DataSource::Original, 6, 3}}, 1),
        stage({{DataSource::Original, 3, 3},
               {DataSource::DiffWave, 1, 1},
               {DataSource::WaveGrad, 1, 1}},
              1),
        stage({{DataSource::WaveGrad, 3, 1}}, 1),
        stage({{DataSource::Original, 6, 3}}, 1),
    };
}

// ---------------------------------------------------------------------------
// Commands

CommandResult cmd_fixtures(const RunConfig& raw, const fs::path& run_dir) {
    const RunConfig cfg = raw.resolve();
    cfg.validate();
    ensure_dir(run_dir);
    write_resolved_config(cfg, run_dir);

    const auto entries = fixtures::write_fixtures(cfg.fixture, run_dir / "fixtures");

    CommandResult r;
    r.command = "fixtures";
    r.artifacts = scan_dir(run_dir, "fixtures");
    update_artifacts(run_dir, r.command, r.artifacts);
    std::size_t abnormal = 0;
    for (const auto& e : entries) abnormal += e.label == Label::Abnormal ? 1 : 0;
    r.summary = {{"command", r.command},
                 {"mode", fixtures::to_string(cfg.mode)},
                 {"subjects", entries.size()},
                 {"abnormal", abnormal},
                 {"manifest", "fixtures/manifest.jsonl"}};
    return r;
}

CommandResult cmd_preprocess(const RunConfig& raw, const fs::path& run_dir) {
    const RunConfig cfg = raw.resolve();
    cfg.validate();
    write_resolved_config(cfg, run_dir);

    const fs::path src_manifest = run_dir / "fixtures" / "manifest.jsonl";
    require_upstream(src_manifest, "run `cardioforge fixtures` first");
    const auto entries = signal_io::read_manifest(src_manifest.string());

    const fs::path out = ensure_dir(run_dir / "preprocessed");
    std::vector<ManifestEntry> out_entries(entries.size());
    parallel_for(entries.size(), effective_jobs(cfg), [&](std::size_t i) {
        const MultiRecord rec = signal_io::load_entry(entries[i], (run_dir / "fixtures").string());
        ManifestEntry e = entries[i];
        e.paths.clear();
        e.modalities.clear();
        e.sites.clear();
        for (const Recording& ch : rec.channels) {
            Recording p = dsp::preprocess_chain(ch, ch.modality, cfg.target_fs);
            p.channel_site = ch.channel_site;
            const std::string name = e.subject_id + "_" + ch.channel_site + ".wav";
            signal_io::write_wav(p, (out / name).string(), /*float32=*/true);
            e.paths.push_back(name);
            e.modalities.push_back(ch.modality);
            e.sites.push_back(ch.channel_site);
        }
        out_entries[i] = e;
    });
    signal_io::write_manifest(out_entries, (out / "manifest.jsonl").string());

    CommandResult r;
    r.command = "preprocess";
    r.artifacts = scan_dir(run_dir, "preprocessed");
    update_artifacts(run_dir, r.command, r.artifacts);
    r.summary = {{"command", r.command},
                 {"records", out_entries.size()},
                 {"target_fs", cfg.target_fs},
                 {"manifest", "preprocessed/manifest.jsonl"}};
    return r;
}

CommandResult cmd_augment(const RunConfig& raw, const fs::path& run_dir) {
    const RunConfig cfg = raw.resolve();
    cfg.validate();
    write_resolved_config(cfg, run_dir);

    const auto entries = read_preprocessed(run_dir);
    const auto records = load_records(entries, run_dir / "preprocessed");
    const augment::NoiseBank bank = make_noise_bank(cfg);
    augment::AugmentCounts counts;
    counts.normal = static_cast<int>(cfg.augment_copies_normal);
    counts.abnormal = static_cast<int>(cfg.augment_copies_abnormal);
    const auto augmented = augment::make_augmented_dataset(
        records, counts, cfg.augment, bank, derive_seed(cfg.seed, "augment-artifact", 0));

    const fs::path out = ensure_dir(run_dir / "augmented");
    std::vector<ManifestEntry> out_entries;
    out_entries.reserve(augmented.size());
    for (const auto& ar : augmented) {
        ManifestEntry e;
        e.subject_id = ar.rec.subject_id;
        e.label = ar.rec.label;
        e.dataset = "augmented";
        e.source = ar.rec.source;
        e.source_subject = ar.source_subject;
        e.seed = ar.seed;
        e.applied_ops = ar.applied_ops;
        write_entry_channels(ar.rec, out, e);
        out_entries.push_back(std::move(e));
    }
    signal_io::write_manifest(out_entries, (out / "manifest.jsonl").string());

    CommandResult r;
    r.command = "augment";
    r.artifacts = scan_dir(run_dir, "augmented");
    update_artifacts(run_dir, r.command, r.artifacts);
    r.summary = {{"command", r.command},
                 {"records", out_entries.size()},
                 {"copies_normal", cfg.augment_copies_normal},
                 {"copies_abnormal", cfg.augment_copies_abnormal},
                 {"manifest", "augmented/manifest.jsonl"}};
    return r;
}

CommandResult cmd_synth_train(const RunConfig& raw, const fs::path& run_dir,
                              const std::string& generator) {
    const RunConfig cfg = raw.resolve();
    cfg.validate();
    write_resolved_config(cfg, run_dir);
    const auto plans = plan_generators(generator);

    const auto entries = read_preprocessed(run_dir);
    const auto split = split_entries(cfg, entries);
    const auto records = load_records(split.train, run_dir / "preprocessed");
    if (records.empty()) throw ConfigError("synth-train: no training records after the split");

    ensure_dir(run_dir / "synth");
    json gen_summary = json::object();
    for (const auto& plan : plans) {
        diffusion::DenoiserConfig dc;
        dc.layers = cfg.synth.denoiser_layers;
        dc.channels = cfg.synth.denoiser_channels;
        dc.kernel = cfg.synth.denoiser_kernel;
        dc.n_mels = plan.mel ? cfg.synth.n_mels : 0;
        diffusion::Denoiser den(dc, derive_seed(cfg.seed, "synth-init:" + plan.name, 0));
        const auto schedule = diffusion::NoiseSchedule::linear(cfg.synth.schedule_steps,
                                                               cfg.synth.beta_min,
                                                               cfg.synth.beta_max);
        const auto fn = den.fn();

        train::OptimizerConfig oc;
        oc.learning_rate = cfg.synth.learning_rate;
        oc.batch_size = 1;
        train::OptState state;
        Rng rng(derive_seed(cfg.seed, "synth-train:" + plan.name, 0));

        double tail_loss = 0.0;
        std::size_t tail_n = 0;
        for (std::size_t step = 0; step < cfg.synth.train_steps; ++step) {
            const MultiRecord& rec = records[rng.below(records.size())];
            const TrainExample ex = pick_example(rec, cfg, plan.mel, rng);
            const tensor::Tensor loss = diffusion::diffusion_loss(
                fn, ex.x0, ex.has_mel ? &ex.mel : nullptr, ex.label, schedule, rng);
            den.params().zero_grad();
            tensor::backward(loss);
            train::sgd_step(den.params(), state, oc, oc.learning_rate);
            if (step + 32 >= cfg.synth.train_steps) {
                tail_loss += loss->value[0];
                ++tail_n;
            }
        }
        const fs::path ckpt = run_dir / "synth" / ("denoiser_" + plan.name + ".ckpt");
        den.save(ckpt, schedule);
        gen_summary[plan.name] = {{"steps", cfg.synth.train_steps},
                                  {"tail_loss", tail_loss / static_cast<double>(tail_n)},
                                  {"checkpoint", "synth/denoiser_" + plan.name + ".ckpt"}};
    }

    CommandResult r;
    r.command = "synth-train";
    for (const auto& plan : plans) {
        r.artifacts.push_back("synth/denoiser_" + plan.name + ".ckpt");
    }
    std::sort(r.artifacts.begin(), r.artifacts.end());
    update_artifacts(run_dir, r.command, r.artifacts);
    r.summary = {{"command", r.command}, {"generators", gen_summary}};
    return r;
}

CommandResult cmd_synth_generate(const RunConfig& raw, const fs::path& run_dir,
                                 const std::string& generator) {
    const RunConfig cfg = raw.resolve();
    cfg.validate();
    write_resolved_config(cfg, run_dir);
    const auto plans = plan_generators(generator);

    const auto entries = read_preprocessed(run_dir);
    const auto split = split_entries(cfg, entries);
    const auto records = load_records(split.train, run_dir / "preprocessed");
    if (records.empty()) throw ConfigError("synth-generate: no training records after the split");

    // Single-channel corpora assign labels by position (normals first, largest
    // remainder); arrange the conditioning records to match so mel-conditioned
    // generators see the class they are asked to produce.
    std::vector<MultiRecord> cond = records;
    if (cfg.mode == DatasetMode::SinglePcg) {
        const std::size_t total = cfg.synth.ratio_normal + cfg.synth.ratio_abnormal;
        const double exact_norm =
            static_cast<double>(cfg.synth.n_patients) * cfg.synth.ratio_normal / total;
        const double exact_abn =
            static_cast<double>(cfg.synth.n_patients) * cfg.synth.ratio_abnormal / total;
        std::size_t n_norm = static_cast<std::size_t>(std::floor(exact_norm));
        const std::size_t n_abn = static_cast<std::size_t>(std::floor(exact_abn));
        if (n_norm + n_abn < cfg.synth.n_patients && exact_norm - n_norm >= exact_abn - n_abn) {
            ++n_norm;
        }
        std::vector<const MultiRecord*> normals, abnormals;
        for (const auto& rec : records) {
            (rec.label == Label::Normal ? normals : abnormals).push_back(&rec);
        }
        if (normals.empty() || abnormals.empty()) {
            throw ConfigError("synth-generate: train split needs both classes");
        }
        cond.clear();
        for (std::size_t i = 0; i < cfg.synth.n_patients; ++i) {
            cond.push_back(i < n_norm ? *normals[i % normals.size()]
                                      : *abnormals[(i - n_norm) % abnormals.size()]);
        }
    }

    CommandResult r;
    r.command = "synth-generate";
    json gen_summary = json::object();
    for (const auto& plan : plans) {
        const fs::path ckpt = run_dir / "synth" / ("denoiser_" + plan.name + ".ckpt");
        require_upstream(ckpt, "run `cardioforge synth-train` first");
        auto loaded = diffusion::Denoiser::load(ckpt);

        diffusion::SynthSpec spec;
        spec.generator = plan.name;
        spec.mel_win = cfg.synth.mel_win;
        spec.mel_hop = cfg.synth.mel_hop;
        spec.seed = derive_seed(cfg.seed, "synth-gen:" + plan.name, 0);
        if (cfg.mode == DatasetMode::SinglePcg) {
            spec.n_patients = cfg.synth.n_patients;
            spec.ratio_normal = cfg.synth.ratio_normal;
            spec.ratio_abnormal = cfg.synth.ratio_abnormal;
            spec.duration_s = cfg.synth.duration_s;
            spec.fs = cfg.target_fs;
        } else {
            spec.multichannel = true;
            spec.conditioning_site = cfg.synth.conditioning_site;
            if (cfg.mode == DatasetMode::Multimodal) spec.target_sites = {"pcg"};
        }

        auto corpus =
            diffusion::build_synthetic_corpus(*loaded.denoiser, loaded.schedule, spec, cond);

        // Multi-input corpora get the conditioning subject's real channel back
        // and are reordered to the canonical site layout, so synthetic records
        // are drop-in replacements for original ones.
        if (cfg.mode != DatasetMode::SinglePcg) {
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                const MultiRecord& src = cond[i];
                MultiRecord& mr = corpus[i];
                std::vector<Recording> ordered;
                ordered.reserve(src.channels.size());
                for (const Recording& sc : src.channels) {
                    if (sc.channel_site == cfg.synth.conditioning_site) {
                        ordered.push_back(sc);
                        continue;
                    }
                    bool found = false;
                    for (Recording& gc : mr.channels) {
                        if (gc.channel_site == sc.channel_site) {
                            ordered.push_back(std::move(gc));
                            found = true;
                            break;
                        }
                    }
                    if (!found) {
                        throw ConfigError("synth-generate: generated subject " + mr.subject_id +
                                          " is missing site " + sc.channel_site);
                    }
                }
                mr.channels = std::move(ordered);
                mr.validate();
            }
        }

        const fs::path out = ensure_dir(run_dir / "synth" / plan.name);
        std::vector<ManifestEntry> out_entries;
        out_entries.reserve(corpus.size());
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const MultiRecord& mr = corpus[i];
            ManifestEntry e;
            e.subject_id = mr.subject_id;
            e.label = mr.label;
            e.dataset = "synth-" + plan.name;
            e.source = mr.source;
            e.source_subject = cond[i % cond.size()].subject_id;
            e.seed = spec.seed;
            write_entry_channels(mr, out, e);
            out_entries.push_back(std::move(e));
        }
        signal_io::write_manifest(out_entries, (out / "manifest.jsonl").string());
        gen_summary[plan.name] = {{"records", out_entries.size()},
                                  {"manifest", "synth/" + plan.name + "/manifest.jsonl"}};
        const auto files = scan_dir(run_dir, fs::path("synth") / plan.name);
        r.artifacts.insert(r.artifacts.end(), files.begin(), files.end());
    }
    std::sort(r.artifacts.begin(), r.artifacts.end());
    update_artifacts(run_dir, r.command, r.artifacts);
    r.summary = {{"command", r.command}, {"generators", gen_summary}};
    return r;
}

CommandResult cmd_train(const RunConfig& raw, const fs::path& run_dir) {
    const RunConfig cfg = raw.resolve();
    cfg.validate();
    write_resolved_config(cfg, run_dir);

    const auto entries = read_preprocessed(run_dir);
    const auto split = split_entries(cfg, entries);
    const fs::path out = ensure_dir(run_dir / "train");
    signal_io::write_manifest(prefixed_entries(split.train, "../preprocessed/"),
                              (out / "split_train.jsonl").string());
    signal_io::write_manifest(prefixed_entries(split.val, "../preprocessed/"),
                              (out / "split_val.jsonl").string());
    signal_io::write_manifest(prefixed_entries(split.test, "../preprocessed/"),
                              (out / "split_test.jsonl").string());

    std::vector<train::ScheduleStage> stages;
    if (cfg.schedule_path.empty()) {
        stages = fixture_schedule();
    } else {
        stages = train::load_schedule(resolve_config_path(cfg.schedule_path).string());
    }

    train::TrainDataset data;
    data.sources[train::DataSource::Original] = load_records(split.train, run_dir / "preprocessed");
    data.validation = load_records(split.val, run_dir / "preprocessed");
    for (const auto& stage : stages) {
        for (const auto& src : stage.sources) {
            if (src.source == train::DataSource::Original) continue;
            if (data.sources.count(src.source) != 0) continue;
            const std::string gen = generator_for(src.source);
            const fs::path manifest = run_dir / "synth" / gen / "manifest.jsonl";
            require_upstream(manifest, "run `cardioforge synth-generate` first");
            data.sources[src.source] =
                load_records(signal_io::read_manifest(manifest.string()), run_dir / "synth" / gen);
        }
    }

    model::ClassifierConfig mcfg;
    mcfg.encoder = cfg.encoder_config();
    mcfg.n_inputs = cfg.n_inputs();
    mcfg.head.n_hidden_layers = cfg.head_hidden_layers;
    mcfg.head.hidden_size = cfg.head_hidden_size;
    mcfg.head.n_features_in = mcfg.n_inputs * mcfg.encoder.transformer.d_model;
    mcfg.head.n_classes = 2;
    model::Classifier model(mcfg, derive_seed(cfg.seed, "model-init", 0));

    train::TrainOptions opts;
    opts.segment = cfg.segment_spec();
    opts.augment_cfg = cfg.augment;
    opts.noise_bank = make_noise_bank(cfg);
    opts.synthetic_segment_cap = cfg.synthetic_segment_cap;
    opts.seed = derive_seed(cfg.seed, "train", 0);
    opts.checkpoint_dir = out / "checkpoints";
    opts.restore_best = true;

    if (mcfg.n_inputs > 1) {
        train::pretrain_encoders(model, stages, data, cfg.optimizer, cfg.lr_schedule, opts);
    }
    const train::TrainLog log =
        train::run_schedule(model, stages, data, cfg.optimizer, cfg.lr_schedule, opts);
    train::write_train_log(log, (out / "train_log.jsonl").string());

    json meta;
    meta["mode"] = fixtures::to_string(cfg.mode);
    meta["encoder_preset"] = cfg.encoder_preset;
    meta["target_fs"] = cfg.target_fs;
    meta["window_s"] = cfg.window_s;
    model.save(out / "model.ckpt", meta);

    double best_mcc = 0.0;
    bool have_mcc = false;
    for (const auto& e : log) {
        if (!e.val_metrics.contains("subject")) continue;
        const double m = e.val_metrics.at("subject").at("metrics").at("mcc").get<double>();
        if (!have_mcc || m > best_mcc) {
            best_mcc = m;
            have_mcc = true;
        }
    }

    CommandResult r;
    r.command = "train";
    r.artifacts = scan_dir(run_dir, "train");
    update_artifacts(run_dir, r.command, r.artifacts);
    r.summary = {{"command", r.command},
                 {"epochs", log.size()},
                 {"train_subjects", split.train.size()},
                 {"val_subjects", split.val.size()},
                 {"best_val_subject_mcc", have_mcc ? json(best_mcc) : json()},
                 {"model", "train/model.ckpt"},
                 {"train_log", "train/train_log.jsonl"}};
    return r;
}

CommandResult cmd_evaluate(const RunConfig& raw, const fs::path& run_dir) {
    const RunConfig cfg = raw.resolve();
    cfg.validate();
    write_resolved_config(cfg, run_dir);

    const fs::path model_path = run_dir / "train" / "model.ckpt";
    require_upstream(model_path, "run `cardioforge train` first");
    const fs::path test_manifest = run_dir / "train" / "split_test.jsonl";
    require_upstream(test_manifest, "run `cardioforge train` first");

    const auto model = model::Classifier::load(model_path);
    const auto test_entries = signal_io::read_manifest(test_manifest.string());
    const auto records = load_records(test_entries, run_dir / "train");
    const auto pool =
        train::build_pool(records, train::DataSource::Original, cfg.segment_spec(), 0);
    if (pool.empty()) throw ConfigError("evaluate: test split produced no fragments");

    const auto probs = train::predict_probs(*model, pool);
    std::vector<int> flabels, fpreds;
    flabels.reserve(pool.size());
    fpreds.reserve(pool.size());
    std::map<std::string, eval::SubjectFragments> groups;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        flabels.push_back(pool[i].label);
        fpreds.push_back(probs[i] >= 0.5 ? 1 : 0);
        auto& g = groups[pool[i].fragment.subject_id];
        g.label = pool[i].label;
        g.probs.push_back(probs[i]);
    }
    eval::MetricsReport fm = eval::metrics(eval::confusion(flabels, fpreds));
    fm.level = "fragment";

    const auto subjects = eval::aggregate_subject(groups);
    std::vector<int> slabels, spreds;
    slabels.reserve(subjects.size());
    spreds.reserve(subjects.size());
    for (const auto& s : subjects) {
        slabels.push_back(s.label);
        spreds.push_back(s.predicted);
    }
    eval::MetricsReport sm = eval::metrics(eval::confusion(slabels, spreds));
    sm.level = "subject";

    // A degenerate test split (one class) keeps its metrics but has no ROC.
    std::optional<eval::RocCurve> curve;
    const bool both_classes =
        std::find(flabels.begin(), flabels.end(), 0) != flabels.end() &&
        std::find(flabels.begin(), flabels.end(), 1) != flabels.end();
    if (both_classes) curve = eval::roc(probs, flabels);

    const fs::path out = ensure_dir(run_dir / "eval");
    eval::write_metrics_json(fm, (out / "metrics_fragment.json").string());
    eval::write_metrics_json(sm, (out / "metrics_subject.json").string());
    std::string pred_lines;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const json line = {{"subject_id", pool[i].fragment.subject_id},
                           {"label", pool[i].label},
                           {"prob", probs[i]},
                           {"offset_s", pool[i].fragment.offset_s}};
        pred_lines += line.dump() + "\n";
    }
    write_text(out / "predictions.jsonl", pred_lines);
    std::string roc_csv = "fpr,tpr\n";
    if (curve) {
        for (std::size_t i = 0; i < curve->fpr.size(); ++i) {
            roc_csv += format_double(curve->fpr[i]) + "," + format_double(curve->tpr[i]) + "\n";
        }
    }
    write_text(out / "roc.csv", roc_csv);

    CommandResult r;
    r.command = "evaluate";
    r.artifacts = scan_dir(run_dir, "eval");
    update_artifacts(run_dir, r.command, r.artifacts);
    r.summary = {{"command", r.command},
                 {"fragments", pool.size()},
                 {"subjects", subjects.size()},
                 {"auc", curve ? json(curve->auc) : json()},
                 {"fragment", eval::metrics_to_json(fm)},
                 {"subject", eval::metrics_to_json(sm)}};
    return r;
}

CommandResult cmd_report(const RunConfig& raw, const fs::path& run_dir,
                         std::vector<fs::path> eval_dirs) {
    const RunConfig cfg = raw.resolve();
    cfg.validate();
    write_resolved_config(cfg, run_dir);
    if (eval_dirs.empty()) eval_dirs.push_back(run_dir / "eval");

    auto counts_of = [](const json& j, const fs::path& origin) {
        if (!j.contains("counts")) {
            throw ConfigError("report: no counts in " + origin.string());
        }
        eval::ConfusionCounts c;
        c.tp = j.at("counts").at("tp").get<std::size_t>();
        c.tn = j.at("counts").at("tn").get<std::size_t>();
        c.fp = j.at("counts").at("fp").get<std::size_t>();
        c.fn = j.at("counts").at("fn").get<std::size_t>();
        return c;
    };

    std::vector<eval::RunResult> runs;
    std::vector<eval::RocCurve> curves;
    for (std::size_t i = 0; i < eval_dirs.size(); ++i) {
        const fs::path fpath = eval_dirs[i] / "metrics_fragment.json";
        const fs::path spath = eval_dirs[i] / "metrics_subject.json";
        require_upstream(fpath, "run `cardioforge evaluate` first");
        require_upstream(spath, "run `cardioforge evaluate` first");
        eval::RunResult run;
        run.fragment = eval::metrics(counts_of(read_json_file(fpath, "report"), fpath));
        run.fragment.level = "fragment";
        run.subject = eval::metrics(counts_of(read_json_file(spath, "report"), spath));
        run.subject.level = "subject";
        run.run_id = static_cast<int>(i);
        runs.push_back(run);

        const fs::path ppath = eval_dirs[i] / "predictions.jsonl";
        require_upstream(ppath, "run `cardioforge evaluate` first");
        std::ifstream in(ppath);
        if (!in) throw IoError("report: cannot open " + ppath.string());
        std::vector<double> scores;
        std::vector<int> labels;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                throw ConfigError("report: bad JSON line in " + ppath.string());
            }
            scores.push_back(j.at("prob").get<double>());
            labels.push_back(j.at("label").get<int>());
        }
        const bool both_classes =
            std::find(labels.begin(), labels.end(), 0) != labels.end() &&
            std::find(labels.begin(), labels.end(), 1) != labels.end();
        if (both_classes) curves.push_back(eval::roc(scores, labels));
    }

    const eval::Summary summary = eval::report(runs);
    const fs::path out = ensure_dir(run_dir / "report");
    eval::write_summary_csv(summary, (out / "summary.csv").string());

    json mj;
    mj["n_runs"] = summary.n_runs;
    for (const auto& [name, ms] : summary.fragment) {
        mj["fragment"][name] = {{"mean", ms.mean}, {"std", ms.stddev}};
    }
    for (const auto& [name, ms] : summary.subject) {
        mj["subject"][name] = {{"mean", ms.mean}, {"std", ms.stddev}};
    }
    write_text(out / "metrics.json", mj.dump(2) + "\n");

    // A single run still gets a plot-ready band file, just with zero width.
    if (curves.empty()) {
        write_text(out / "roc.csv", "fpr,tpr_mean,tpr_lo,tpr_hi\n");
    } else {
        std::vector<eval::RocCurve> band_curves = curves;
        if (band_curves.size() == 1) band_curves.push_back(band_curves.front());
        eval::write_roc_csv(eval::roc_bands(band_curves), (out / "roc.csv").string());
    }

    CommandResult r;
    r.command = "report";
    r.artifacts = scan_dir(run_dir, "report");
    update_artifacts(run_dir, r.command, r.artifacts);
    r.summary = {{"command", r.command},
                 {"runs", runs.size()},
                 {"summary_csv", "report/summary.csv"},
                 {"metrics_json", "report/metrics.json"},
                 {"roc_csv", "report/roc.csv"}};
    return r;
}

std::vector<CommandResult> run_all(const RunConfig& cfg, const fs::path& run_dir) {
    std::vector<CommandResult> results;
    results.push_back(cmd_fixtures(cfg, run_dir));
    results.push_back(cmd_preprocess(cfg, run_dir));
    results.push_back(cmd_augment(cfg, run_dir));
    results.push_back(cmd_synth_train(cfg, run_dir, "both"));
    results.push_back(cmd_synth_generate(cfg, run_dir, "both"));
    results.push_back(cmd_train(cfg, run_dir));
    results.push_back(cmd_evaluate(cfg, run_dir));
    results.push_back(cmd_report(cfg, run_dir, {}));
    return results;
}

}  // namespace cardioforge::pipeline
