#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cardioforge/common.hpp"
#include "cardioforge/dsp.hpp"
#include "cardioforge/signal_io.hpp"
#include "cardioforge/tensor.hpp"

namespace cardioforge::diffusion {

struct NoiseSchedule {
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    std::size_t steps() const { return betas.size(); }
    // t = 0 is the identity sentinel (no corruption); t in [1, steps()].
    double alpha_bar(std::size_t t) const;
    void validate() const;

    static NoiseSchedule linear(std::size_t t_steps, double beta_min, double beta_max);
    // T=50, beta in [1e-4, 0.2]; chosen so alpha_bar(T) < 0.01 holds.
    static NoiseSchedule default_schedule();
};

enum class Disease { Normal, Abnormal };

struct ChannelPair {
    std::string conditioning_site;
    std::string target_site;
};

struct CondLabel {
    Disease disease = Disease::Normal;
    std::optional<ChannelPair> channel_pair;  // present iff multichannel mode
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
std::vector<double> forward_diffuse(const std::vector<double>& x0, std::size_t t,
                                    const std::vector<double>& eps,
                                    const NoiseSchedule& schedule);

// Denoiser contract: (noisy audio [1, len], noise level sqrt(abar_t), local
// mel conditioning or null, global label) -> predicted noise [1, len].
using DenoiserFn = std::function<tensor::Tensor(
    const tensor::Tensor& x_t, double noise_level, const dsp::Matrix* mel,
    const CondLabel& label)>;

struct DenoiserConfig {
    std::size_t layers = 4;
    std::size_t channels = 16;
    std::size_t kernel = 3;        // dilation doubles per layer
    std::size_t n_mels = 0;        // 0 disables local conditioning
    std::size_t n_labels = 2;
    std::size_t pos_channels = 4;  // fixed positional inputs
    std::size_t step_embed = 8;

    void validate() const;
};

// Dilated 1-D conv stack with residual connections; mel conditioning is
// nearest-neighbor upsampled to sample rate, the label embedding and the
// noise-level embedding are broadcast-added across the length axis.
class Denoiser {
public:
    Denoiser(DenoiserConfig cfg, std::uint64_t seed);
    Denoiser(const Denoiser&) = delete;
    Denoiser& operator=(const Denoiser&) = delete;

    tensor::Tensor predict(const tensor::Tensor& x_t, double noise_level,
                           const dsp::Matrix* mel, const CondLabel& label) const;
    DenoiserFn fn() const;

    tensor::ParamStore& params() { return store_; }
    const tensor::ParamStore& params() const { return store_; }
    const DenoiserConfig& config() const { return cfg_; }

    void save(const std::filesystem::path& path, const NoiseSchedule& schedule) const;
    struct Loaded {
        std::unique_ptr<Denoiser> denoiser;
        NoiseSchedule schedule;
    };
    static Loaded load(const std::filesystem::path& path);

private:
    DenoiserConfig cfg_;
    tensor::ParamStore store_;
};

// Samples t uniformly in [1, T] and eps ~ N(0, I); returns the graph root of
// mean |eps - denoiser(x_t, ...)| with gradients available via backward().
tensor::Tensor diffusion_loss(const DenoiserFn& denoiser, const std::vector<double>& x0,
                              const dsp::Matrix* mel, const CondLabel& label,
                              const NoiseSchedule& schedule, Rng& rng);

// Ancestral sampling from x_T ~ N(0, I); sigma_t^2 = beta_t, no noise at t=1.
Recording sample(const DenoiserFn& denoiser, const CondLabel& label, const dsp::Matrix* mel,
                 const NoiseSchedule& schedule, std::size_t length, double fs, Rng& rng);

// Shannon-energy envelope peak picking; returns interior cycle boundaries
// placed at the quietest point between consecutive sound bursts.
std::vector<std::size_t> detect_cycle_marks(const Recording& rec);

enum class RearrangeMode { Groups, Chunks14, Single };

struct RearrangeResult {
    Recording rec;
    bool flagged = false;
    std::string flag;
    std::vector<std::size_t> unit_order;      // permutation applied to the units
    std::vector<std::size_t> join_positions;  // output index where each crossfade begins
};

// Permutes cardiac cycles (units per mode) and re-joins with a 10 ms
// equal-power crossfade against each unit's source continuation, so output
// length equals input length. Fewer than 2 cycles -> flagged pass-through.
RearrangeResult cycle_rearrange(const Recording& rec,
                                const std::vector<std::size_t>& cycle_marks,
                                RearrangeMode mode, Rng& rng);

struct SynthSpec {
    std::string generator = "diffwave";  // manifest tag
    std::size_t n_patients = 0;          // single-channel mode
    std::size_t ratio_normal = 3;
    std::size_t ratio_abnormal = 1;
    double duration_s = 0.8;
    double fs = 1000.0;
    bool multichannel = false;
    std::string conditioning_site;          // multichannel mode
    std::vector<std::string> target_sites;  // empty = every other site per subject
    std::size_t mel_win = 128;
    std::size_t mel_hop = 32;
    std::uint64_t seed = 0;
};

// Single-channel mode: n_patients records with normal:abnormal matching the
// ratio exactly (largest remainder), conditioned on cond_source in rotation.
// Multichannel mode: one synthetic subject per conditioning subject; every
// target site is generated from that subject's conditioning-site channel.
std::vector<MultiRecord> build_synthetic_corpus(const Denoiser& denoiser,
                                                const NoiseSchedule& schedule,
                                                const SynthSpec& spec,
                                                const std::vector<MultiRecord>& cond_source);

}  // namespace cardioforge::diffusion
