#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardioforge/augment.hpp"
#include "cardioforge/common.hpp"
#include "cardioforge/diffusion.hpp"
#include "cardioforge/dsp.hpp"
#include "cardioforge/fixtures.hpp"
#include "cardioforge/model.hpp"
#include "cardioforge/signal_io.hpp"
#include "cardioforge/train.hpp"

namespace cardioforge::pipeline {

using fixtures::DatasetMode;

// Desk-scale diffusion knobs: noise schedule, denoiser shape, generator
// training and corpus size.
struct SynthConfig {
    std::size_t schedule_steps = 40;
    double beta_min = 1e-4;
    double beta_max = 0.2;
    std::size_t train_steps = 160;
    double learning_rate = 0.02;
    std::size_t train_window = 512;  // samples per loss evaluation
    std::size_t denoiser_layers = 4;
    std::size_t denoiser_channels = 16;
    std::size_t denoiser_kernel = 3;
    std::size_t n_mels = 16;  // mel-conditioned generator only
    std::size_t mel_win = 128;
    std::size_t mel_hop = 32;
    std::size_t n_patients = 8;  // single-channel corpus size
    std::size_t ratio_normal = 3;
    std::size_t ratio_abnormal = 1;
    double duration_s = 4.5;        // single-channel synthetic record length
    std::string conditioning_site;  // empty -> mode default

    void validate() const;
};

// One human-editable document per run; config_to_json of a resolved config
// captures every default.
struct RunConfig {
    DatasetMode mode = DatasetMode::SinglePcg;
    std::string encoder_preset = "toy";  // "toy" | "paper"
    double target_fs = 1000.0;           // paper preset pins {4125, 16000}
    double window_s = 0.0;               // 0 -> mode default (4.0 / 4.0 / 2.0)
    double overlap_s = 0.25;
    double skip_head_s = 0.3;
    std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
    std::uint64_t seed = 0;
    bool determinism = true;  // forces sequential execution
    int jobs = 1;

    train::OptimizerConfig optimizer;
    train::LRSchedule lr_schedule;
    std::size_t head_hidden_layers = 1;
    std::size_t head_hidden_size = 64;
    std::string hparams_path;   // optional preset overriding optimizer/lr/head
    std::string schedule_path;  // empty -> built-in fixture schedule
    std::size_t synthetic_segment_cap = 2;
    std::size_t augment_copies_normal = 2;  // cmd_augment artifact counts
    std::size_t augment_copies_abnormal = 2;

    augment::AugmentConfig augment;
    SynthConfig synth;
    // Longer than the bare FixtureSpec default so the default 4 s window plus
    // head skip still yields fragments.
    fixtures::FixtureSpec fixture{.duration_s = 6.0};

    // Fills mode-dependent defaults (window, conditioning site, fixture
    // mirror fields) and applies the hparams preset when one is referenced.
    RunConfig resolve() const;
    void validate() const;

    double effective_window_s() const;
    std::size_t n_inputs() const;
    model::EncoderConfig encoder_config() const;
    dsp::SegmentSpec segment_spec() const;
};

RunConfig config_from_json(const nlohmann::json& j);  // unknown keys -> ConfigError
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

// Bare relative names fall back to $CARDIOFORGE_CONFIG_DIR when they do not
// exist as given.
std::filesystem::path resolve_config_path(const std::string& arg);

// The staged source rotation scaled to fixture size: epochs {3,1,1,1,1,1}
// with per-class augment counts divided by ten.
std::vector<train::ScheduleStage> fixture_schedule();

struct CommandResult {
    std::string command;
    nlohmann::json summary;              // machine-readable completion summary
    std::vector<std::string> artifacts;  // run_dir-relative paths written
};

CommandResult cmd_fixtures(const RunConfig& cfg, const std::filesystem::path& run_dir);
CommandResult cmd_preprocess(const RunConfig& cfg, const std::filesystem::path& run_dir);
CommandResult cmd_augment(const RunConfig& cfg, const std::filesystem::path& run_dir);
// generator: "diffwave", "wavegrad" or "both"
CommandResult cmd_synth_train(const RunConfig& cfg, const std::filesystem::path& run_dir,
                              const std::string& generator = "both");
CommandResult cmd_synth_generate(const RunConfig& cfg, const std::filesystem::path& run_dir,
                                 const std::string& generator = "both");
CommandResult cmd_train(const RunConfig& cfg, const std::filesystem::path& run_dir);
CommandResult cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& run_dir);
// eval_dirs defaults to {run_dir/"eval"}; two or more runs get ROC bands.
CommandResult cmd_report(const RunConfig& cfg, const std::filesystem::path& run_dir,
                         std::vector<std::filesystem::path> eval_dirs = {});

// The full chain in order; returns one result per command.
std::vector<CommandResult> run_all(const RunConfig& cfg, const std::filesystem::path& run_dir);

}  // namespace cardioforge::pipeline
