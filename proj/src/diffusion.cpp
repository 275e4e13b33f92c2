#include "cardioforge/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace cardioforge::diffusion {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::size_t kSiteSlots = 8;

NoiseSchedule from_betas(std::vector<double> betas) {
    NoiseSchedule s;
    s.betas = std::move(betas);
    s.alphas.resize(s.betas.size());
    s.alpha_bars.resize(s.betas.size());
    double prod = 1.0;
    for (std::size_t i = 0; i < s.betas.size(); ++i) {
        s.alphas[i] = 1.0 - s.betas[i];
        prod *= s.alphas[i];
        s.alpha_bars[i] = prod;
    }
    return s;
}

std::string pad3(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%03zu", i);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Noise schedule

double NoiseSchedule::alpha_bar(std::size_t t) const {
    if (t == 0) return 1.0;
    if (t > steps()) throw ArgumentError("NoiseSchedule::alpha_bar: t out of range");
    return alpha_bars[t - 1];
}

void NoiseSchedule::validate() const {
    if (betas.empty()) throw SpecError("NoiseSchedule: empty");
    if (betas.size() != alphas.size() || betas.size() != alpha_bars.size())
        throw SpecError("NoiseSchedule: inconsistent lengths");
    for (double b : betas) {
        if (!(b > 0.0 && b < 1.0)) throw SpecError("NoiseSchedule: beta outside (0, 1)");
    }
    for (std::size_t i = 1; i < alpha_bars.size(); ++i) {
        if (!(alpha_bars[i] < alpha_bars[i - 1]))
            throw SpecError("NoiseSchedule: alpha_bar not strictly decreasing");
    }
    if (!(alpha_bars.back() < 0.01))
        throw SpecError("NoiseSchedule: alpha_bar at final step must be below 0.01");
}

NoiseSchedule NoiseSchedule::linear(std::size_t t_steps, double beta_min, double beta_max) {
    if (t_steps == 0) throw ArgumentError("NoiseSchedule::linear: need at least one step");
    if (!(beta_min > 0.0) || !(beta_max < 1.0) || beta_min > beta_max)
        throw ArgumentError("NoiseSchedule::linear: betas must satisfy 0 < min <= max < 1");
    std::vector<double> betas(t_steps);
    for (std::size_t i = 0; i < t_steps; ++i) {
        const double f = t_steps == 1 ? 0.0 : static_cast<double>(i) / (t_steps - 1);
        betas[i] = beta_min + (beta_max - beta_min) * f;
    }
    auto s = from_betas(std::move(betas));
    s.validate();
    return s;
}

NoiseSchedule NoiseSchedule::default_schedule() { return linear(50, 1e-4, 0.2); }

std::vector<double> forward_diffuse(const std::vector<double>& x0, std::size_t t,
                                    const std::vector<double>& eps,
                                    const NoiseSchedule& schedule) {
    if (t > schedule.steps()) throw ArgumentError("forward_diffuse: t out of range");
    if (eps.size() != x0.size()) throw ShapeError("forward_diffuse: eps shape mismatch");
    if (t == 0) return x0;
    const double ab = schedule.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    std::vector<double> out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

// ---------------------------------------------------------------------------
// Denoiser

void DenoiserConfig::validate() const {
    if (layers == 0 || channels == 0 || kernel == 0)
        throw ConfigError("DenoiserConfig: layers, channels and kernel must be positive");
    if (n_labels < 2) throw ConfigError("DenoiserConfig: need at least two labels");
    if (step_embed < 2) throw ConfigError("DenoiserConfig: step_embed too small");
}

Denoiser::Denoiser(DenoiserConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "denoiser", 0));
    const std::size_t c = cfg_.channels;
    const std::size_t in_ch = 1 + cfg_.pos_channels;
    store_.add_uniform("in.w", {c, in_ch, 1}, in_ch, rng);
    store_.add_zeros("in.b", {c});
    store_.add_uniform("step.w", {c, cfg_.step_embed}, cfg_.step_embed, rng);
    store_.add_zeros("step.b", {c});
    store_.add_uniform("label.table", {cfg_.n_labels, c}, c, rng);
    store_.add_uniform("site.table", {kSiteSlots, c}, c, rng);
    if (cfg_.n_mels > 0) {
        store_.add_uniform("mel.w", {c, cfg_.n_mels, 1}, cfg_.n_mels, rng);
        store_.add_zeros("mel.b", {c});
    }
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::string p = "l" + std::to_string(l);
        store_.add_uniform(p + ".wd", {c, c, cfg_.kernel}, c * cfg_.kernel, rng);
        store_.add_zeros(p + ".bd", {c});
        store_.add_uniform(p + ".wp", {c, c, 1}, c, rng);
        store_.add_zeros(p + ".bp", {c});
    }
    store_.add_uniform("out1.w", {c, c, 1}, c, rng);
    store_.add_zeros("out1.b", {c});
    store_.add_uniform("out2.w", {1, c, 1}, c, rng);
    store_.add_zeros("out2.b", {1});
}

tensor::Tensor Denoiser::predict(const tensor::Tensor& x_t, double noise_level,
                                 const dsp::Matrix* mel, const CondLabel& label) const {
    if (x_t->shape.size() != 2 || x_t->rows() != 1 || x_t->cols() == 0)
        throw ShapeError("Denoiser::predict: expected [1, len] input");
    if (!std::isfinite(noise_level)) throw ArgumentError("Denoiser::predict: bad noise level");
    const std::size_t len = x_t->cols();
    const std::size_t c = cfg_.channels;

    tensor::Tensor net_in = x_t;
    if (cfg_.pos_channels > 0) {
        std::vector<double> pos(cfg_.pos_channels * len);
        for (std::size_t p = 0; p < cfg_.pos_channels; ++p) {
            for (std::size_t i = 0; i < len; ++i) {
                double v;
                if (p == 0) {
                    v = len == 1 ? 0.0 : static_cast<double>(i) / (len - 1) - 0.5;
                } else {
                    const double cycles = static_cast<double>((p + 1) / 2);
                    const double ph = 2.0 * kPi * cycles * static_cast<double>(i) / len;
                    v = (p % 2 == 1) ? std::sin(ph) : std::cos(ph);
                }
                pos[p * len + i] = v;
            }
        }
        net_in = tensor::concat_rows(
            {x_t, tensor::constant({cfg_.pos_channels, len}, std::move(pos))});
    }
    auto h = tensor::conv1d(net_in, store_.get("in.w"), store_.get("in.b"), 1);

    std::vector<double> emb(cfg_.step_embed);
    for (std::size_t j = 0; j < cfg_.step_embed; ++j) {
        const double w = noise_level * kPi * std::pow(2.0, static_cast<double>(j / 2));
        emb[j] = (j % 2 == 0) ? std::sin(w) : std::cos(w);
    }
    auto step_bias = tensor::reshape(
        tensor::linear(tensor::constant({1, cfg_.step_embed}, std::move(emb)),
                       store_.get("step.w"), store_.get("step.b")),
        {c});
    h = tensor::add_channel_bias(h, step_bias);

    const std::size_t lab = label.disease == Disease::Abnormal ? 1 : 0;
    auto table_row = [&](const tensor::Tensor& table, std::size_t row) {
        return tensor::reshape(tensor::slice_cols(tensor::transpose(table), row, row + 1), {c});
    };
    h = tensor::add_channel_bias(h, table_row(store_.get("label.table"), lab));
    if (label.channel_pair) {
        const std::string key =
            label.channel_pair->conditioning_site + "|" + label.channel_pair->target_site;
        const std::size_t slot = derive_seed(0x51735173u, key) % kSiteSlots;
        h = tensor::add_channel_bias(h, table_row(store_.get("site.table"), slot));
    }

    if (cfg_.n_mels > 0) {
        if (mel == nullptr) throw ArgumentError("Denoiser::predict: mel conditioning required");
        if (mel->rows != cfg_.n_mels || mel->cols == 0)
            throw ShapeError("Denoiser::predict: mel band count mismatch");
        std::vector<double> up(cfg_.n_mels * len);
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t f = std::min(mel->cols - 1, i * mel->cols / len);
            for (std::size_t m = 0; m < cfg_.n_mels; ++m) up[m * len + i] = mel->at(m, f);
        }
        auto cond = tensor::conv1d(tensor::constant({cfg_.n_mels, len}, std::move(up)),
                                   store_.get("mel.w"), store_.get("mel.b"), 1);
        h = tensor::add(h, cond);
    }

    for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::string p = "l" + std::to_string(l);
        const std::size_t dil = std::size_t{1} << l;
        const std::size_t total_pad = dil * (cfg_.kernel - 1);
        const std::size_t lpad = (total_pad + 1) / 2, rpad = total_pad - lpad;
        std::vector<tensor::Tensor> parts;
        if (lpad > 0) parts.push_back(tensor::zeros({c, lpad}));
        parts.push_back(h);
        if (rpad > 0) parts.push_back(tensor::zeros({c, rpad}));
        auto padded = parts.size() == 1 ? h : tensor::concat_cols(parts);
        auto y = tensor::conv1d(padded, store_.get(p + ".wd"), store_.get(p + ".bd"), 1, dil);
        y = tensor::tanh_act(y);
        y = tensor::conv1d(y, store_.get(p + ".wp"), store_.get(p + ".bp"), 1);
        h = tensor::add(h, y);
    }

    auto o = tensor::gelu(tensor::conv1d(h, store_.get("out1.w"), store_.get("out1.b"), 1));
    return tensor::conv1d(o, store_.get("out2.w"), store_.get("out2.b"), 1);
}

DenoiserFn Denoiser::fn() const {
    return [this](const tensor::Tensor& x_t, double noise_level, const dsp::Matrix* mel,
                  const CondLabel& label) { return predict(x_t, noise_level, mel, label); };
}

void Denoiser::save(const std::filesystem::path& path, const NoiseSchedule& schedule) const {
    schedule.validate();
    nlohmann::json meta;
    meta["kind"] = "denoiser";
    meta["config"] = {{"layers", cfg_.layers},   {"channels", cfg_.channels},
                      {"kernel", cfg_.kernel},   {"n_mels", cfg_.n_mels},
                      {"n_labels", cfg_.n_labels}, {"pos_channels", cfg_.pos_channels},
                      {"step_embed", cfg_.step_embed}};
    meta["schedule"] = {{"betas", schedule.betas}};
    tensor::save_checkpoint(path, meta, store_);
}

Denoiser::Loaded Denoiser::load(const std::filesystem::path& path) {
    auto ck = tensor::load_checkpoint(path);
    if (!ck.meta.contains("kind") || ck.meta["kind"] != "denoiser")
        throw FormatError("Denoiser::load: not a denoiser checkpoint");
    const auto& jc = ck.meta.at("config");
    DenoiserConfig cfg;
    cfg.layers = jc.at("layers").get<std::size_t>();
    cfg.channels = jc.at("channels").get<std::size_t>();
    cfg.kernel = jc.at("kernel").get<std::size_t>();
    cfg.n_mels = jc.at("n_mels").get<std::size_t>();
    cfg.n_labels = jc.at("n_labels").get<std::size_t>();
    cfg.pos_channels = jc.at("pos_channels").get<std::size_t>();
    cfg.step_embed = jc.at("step_embed").get<std::size_t>();
    Loaded out{std::make_unique<Denoiser>(cfg, 0),
               from_betas(ck.meta.at("schedule").at("betas").get<std::vector<double>>())};
    out.schedule.validate();
    tensor::load_into(out.denoiser->store_, ck);
    return out;
}

// ---------------------------------------------------------------------------
// Training objective and sampling

tensor::Tensor diffusion_loss(const DenoiserFn& denoiser, const std::vector<double>& x0,
                              const dsp::Matrix* mel, const CondLabel& label,
                              const NoiseSchedule& schedule, Rng& rng) {
    if (x0.empty()) throw ArgumentError("diffusion_loss: empty signal");
    if (schedule.steps() == 0) throw SpecError("diffusion_loss: empty schedule");
    const std::size_t t = 1 + rng.below(schedule.steps());
    std::vector<double> eps(x0.size());
    for (double& e : eps) e = rng.normal();
    auto x_t = forward_diffuse(x0, t, eps, schedule);
    const std::size_t len = x_t.size();
    auto pred = denoiser(tensor::constant({1, len}, std::move(x_t)),
                         std::sqrt(schedule.alpha_bar(t)), mel, label);
    if (pred->shape.size() != 2 || pred->rows() != 1 || pred->cols() != x0.size())
        throw ShapeError("diffusion_loss: denoiser output shape mismatch");
    auto loss = tensor::l1_loss(pred, tensor::constant({1, len}, std::move(eps)));
    if (!std::isfinite(loss->value[0])) throw TrainingError("diffusion_loss: non-finite loss");
    return loss;
}

Recording sample(const DenoiserFn& denoiser, const CondLabel& label, const dsp::Matrix* mel,
                 const NoiseSchedule& schedule, std::size_t length, double fs, Rng& rng) {
    if (length == 0) throw ArgumentError("sample: length must be positive");
    if (schedule.steps() == 0) throw SpecError("sample: empty schedule");
    std::vector<double> x(length);
    for (double& v : x) v = rng.normal();

    for (std::size_t t = schedule.steps(); t >= 1; --t) {
        const double beta = schedule.betas[t - 1];
        const double alpha = schedule.alphas[t - 1];
        const double abar = schedule.alpha_bars[t - 1];
        auto pred = denoiser(tensor::constant({1, length}, x), std::sqrt(abar), mel, label);
        if (pred->shape.size() != 2 || pred->rows() != 1 || pred->cols() != length)
            throw ShapeError("sample: denoiser output shape mismatch");
        const std::vector<double> eps_hat = pred->value;  // detach per step

        const double k = beta / std::sqrt(1.0 - abar);
        const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
        const double sigma = t > 1 ? std::sqrt(beta) : 0.0;
        double peak = 0.0;
        for (std::size_t i = 0; i < length; ++i) {
            double v = (x[i] - k * eps_hat[i]) * inv_sqrt_alpha;
            if (sigma > 0.0) v += sigma * rng.normal();
            x[i] = v;
            peak = std::max(peak, std::abs(v));
        }
        if (!std::isfinite(peak) || peak > 1e3)
            throw SamplingError("sample: trajectory diverged at step " + std::to_string(t));
    }

    Recording rec;
    rec.samples = std::move(x);
    rec.fs = fs;
    rec.modality = Modality::PCG;
    return rec;
}

// ---------------------------------------------------------------------------
// Cycle detection and rearrangement

std::vector<std::size_t> detect_cycle_marks(const Recording& rec) {
    const auto& x = rec.samples;
    const std::size_t n = x.size();
    if (n < 4 || rec.fs <= 0) return {};
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak <= 0.0) return {};

    std::vector<double> se(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v2 = (x[i] / peak) * (x[i] / peak);
        se[i] = -v2 * std::log(v2 + 1e-12);
    }
    const std::size_t win = std::max<std::size_t>(1, std::llround(0.05 * rec.fs));
    std::vector<double> env(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += se[i];
        if (i >= win) acc -= se[i - win];
        env[i] = acc / std::min(i + 1, win);
    }

    const double mean = std::accumulate(env.begin(), env.end(), 0.0) / n;
    std::vector<std::size_t> cand;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (env[i] > mean && env[i] >= env[i - 1] && env[i] > env[i + 1]) cand.push_back(i);
    }
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return env[a] > env[b]; });
    const std::size_t min_gap = std::max<std::size_t>(1, std::llround(0.25 * rec.fs));
    std::vector<std::size_t> peaks;
    for (std::size_t p : cand) {
        bool ok = true;
        for (std::size_t q : peaks) {
            if (p > q ? p - q < min_gap : q - p < min_gap) { ok = false; break; }
        }
        if (ok) peaks.push_back(p);
    }
    std::sort(peaks.begin(), peaks.end());

    std::vector<std::size_t> marks;
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        std::size_t best = peaks[i - 1];
        for (std::size_t j = peaks[i - 1]; j <= peaks[i]; ++j) {
            if (env[j] < env[best]) best = j;
        }
        if (best > 0 && best < n && (marks.empty() || best > marks.back())) marks.push_back(best);
    }
    return marks;
}

RearrangeResult cycle_rearrange(const Recording& rec,
                                const std::vector<std::size_t>& cycle_marks,
                                RearrangeMode mode, Rng& rng) {
    const std::size_t n = rec.samples.size();
    for (std::size_t i = 0; i < cycle_marks.size(); ++i) {
        if (cycle_marks[i] == 0 || cycle_marks[i] >= n)
            throw ArgumentError("cycle_rearrange: mark out of range");
        if (i > 0 && cycle_marks[i] <= cycle_marks[i - 1])
            throw ArgumentError("cycle_rearrange: marks must be strictly ascending");
    }

    RearrangeResult res;
    res.rec = rec;
    std::vector<std::size_t> bounds;
    bounds.push_back(0);
    bounds.insert(bounds.end(), cycle_marks.begin(), cycle_marks.end());
    bounds.push_back(n);
    const std::size_t n_cycles = bounds.size() - 1;
    if (n_cycles < 2) {
        res.flagged = true;
        res.flag = "fewer than two cycles, rearrangement skipped";
        return res;
    }

    // Units are contiguous cycle ranges, stored as sample bounds.
    std::vector<std::pair<std::size_t, std::size_t>> units;
    switch (mode) {
        case RearrangeMode::Single:
            for (std::size_t i = 0; i < n_cycles; ++i) units.push_back({bounds[i], bounds[i + 1]});
            break;
        case RearrangeMode::Chunks14: {
            std::size_t i = 0;
            while (i < n_cycles) {
                const std::size_t take = std::min<std::size_t>(1 + rng.below(4), n_cycles - i);
                units.push_back({bounds[i], bounds[i + take]});
                i += take;
            }
            break;
        }
        case RearrangeMode::Groups: {
            const std::size_t g = std::min<std::size_t>(2 + rng.below(3), n_cycles);
            for (std::size_t j = 0; j < g; ++j) {
                units.push_back({bounds[j * n_cycles / g], bounds[(j + 1) * n_cycles / g]});
            }
            break;
        }
    }

    res.unit_order.resize(units.size());
    std::iota(res.unit_order.begin(), res.unit_order.end(), std::size_t{0});
    rng.shuffle(res.unit_order);

    const std::size_t xfade = std::max<std::size_t>(1, std::llround(0.010 * rec.fs));
    const auto& x = rec.samples;
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t s = 0; s < res.unit_order.size(); ++s) {
        const auto [ubeg, uend] = units[res.unit_order[s]];
        std::size_t skip = 0;
        if (s > 0) {
            // Crossfade from the previous unit's source continuation into
            // this unit's head, so length is preserved exactly.
            const std::size_t pend = units[res.unit_order[s - 1]].second;
            const std::size_t avail = n - pend;
            const std::size_t m = std::min(xfade, uend - ubeg);
            res.join_positions.push_back(out.size());
            for (std::size_t i = 0; i < m; ++i) {
                const double ext = i < avail ? x[pend + i]
                                   : avail > 0 ? x[n - 1]
                                               : x[ubeg];
                const double th = (i + 0.5) / m * (kPi / 2.0);
                out.push_back(ext * std::cos(th) + x[ubeg + i] * std::sin(th));
            }
            skip = m;
        }
        out.insert(out.end(), x.begin() + static_cast<std::ptrdiff_t>(ubeg + skip),
                   x.begin() + static_cast<std::ptrdiff_t>(uend));
    }
    res.rec.samples = std::move(out);
    return res;
}

// ---------------------------------------------------------------------------
// Corpus generation

std::vector<MultiRecord> build_synthetic_corpus(const Denoiser& denoiser,
                                                const NoiseSchedule& schedule,
                                                const SynthSpec& spec,
                                                const std::vector<MultiRecord>& cond_source) {
    if (cond_source.empty())
        throw ConfigError("build_synthetic_corpus: conditioning source is empty");
    if (spec.fs <= 0 || spec.duration_s <= 0)
        throw ConfigError("build_synthetic_corpus: bad fs or duration");
    const auto fn = denoiser.fn();
    const bool want_mel = denoiser.config().n_mels > 0;

    auto mel_of = [&](const Recording& cond) {
        dsp::MelSpec ms;
        ms.window_len = static_cast<int>(spec.mel_win);
        ms.hop = static_cast<int>(spec.mel_hop);
        ms.n_mels = static_cast<int>(denoiser.config().n_mels);
        ms.fs = cond.fs;
        return dsp::mel_spectrogram(cond, ms);
    };

    std::vector<MultiRecord> out;
    if (!spec.multichannel) {
        const std::size_t total = spec.ratio_normal + spec.ratio_abnormal;
        if (total == 0) throw ConfigError("build_synthetic_corpus: zero class ratio");
        const double exact_norm =
            static_cast<double>(spec.n_patients) * spec.ratio_normal / total;
        std::size_t n_norm = static_cast<std::size_t>(std::floor(exact_norm));
        const double exact_abn =
            static_cast<double>(spec.n_patients) * spec.ratio_abnormal / total;
        const std::size_t n_abn = static_cast<std::size_t>(std::floor(exact_abn));
        if (n_norm + n_abn < spec.n_patients) {
            // one leftover seat with two classes, largest fractional part wins
            if (exact_norm - n_norm >= exact_abn - n_abn) ++n_norm;
        }

        const std::size_t length = std::max<std::size_t>(1, std::llround(spec.duration_s * spec.fs));
        for (std::size_t i = 0; i < spec.n_patients; ++i) {
            const Label lab = i < n_norm ? Label::Normal : Label::Abnormal;
            const auto& cond_rec = cond_source[i % cond_source.size()];
            const Recording* cond_ch = &cond_rec.channels.front();
            for (const auto& ch : cond_rec.channels) {
                if (ch.modality == Modality::ECG) { cond_ch = &ch; break; }
            }
            dsp::Matrix mel;
            if (want_mel) mel = mel_of(*cond_ch);

            MultiRecord mr;
            mr.subject_id = "synth_" + spec.generator + "_" + pad3(i);
            mr.label = lab;
            mr.source = SourceTag{SourceKind::Synthetic, spec.generator};
            CondLabel cl;
            cl.disease = lab == Label::Normal ? Disease::Normal : Disease::Abnormal;
            Rng rng(derive_seed(spec.seed, "synth:" + mr.subject_id, 0));
            auto rec = sample(fn, cl, want_mel ? &mel : nullptr, schedule, length, spec.fs, rng);
            rec.channel_site = "pcg";
            mr.channels.push_back(std::move(rec));
            out.push_back(std::move(mr));
        }
        return out;
    }

    if (spec.conditioning_site.empty())
        throw ConfigError("build_synthetic_corpus: conditioning site not set");
    for (const auto& subj : cond_source) {
        const Recording* cond_ch = nullptr;
        for (const auto& ch : subj.channels) {
            if (ch.channel_site == spec.conditioning_site) { cond_ch = &ch; break; }
        }
        if (cond_ch == nullptr)
            throw ConfigError("build_synthetic_corpus: subject " + subj.subject_id +
                              " has no channel at site " + spec.conditioning_site);
        std::vector<std::string> targets = spec.target_sites;
        if (targets.empty()) {
            for (const auto& ch : subj.channels) {
                if (ch.channel_site != spec.conditioning_site) targets.push_back(ch.channel_site);
            }
        }
        if (targets.empty())
            throw ConfigError("build_synthetic_corpus: no target sites for subject " +
                              subj.subject_id);
        dsp::Matrix mel;
        if (want_mel) mel = mel_of(*cond_ch);

        MultiRecord mr;
        mr.subject_id = "synth_" + spec.generator + "_" + subj.subject_id;
        mr.label = subj.label;
        mr.source = SourceTag{SourceKind::Synthetic, spec.generator};
        for (const auto& target : targets) {
            CondLabel cl;
            cl.disease = subj.label == Label::Normal ? Disease::Normal : Disease::Abnormal;
            cl.channel_pair = ChannelPair{spec.conditioning_site, target};
            Rng rng(derive_seed(spec.seed, "synth:" + mr.subject_id + ":" + target, 0));
            auto rec = sample(fn, cl, want_mel ? &mel : nullptr, schedule,
                              cond_ch->samples.size(), cond_ch->fs, rng);
            rec.channel_site = target;
            mr.channels.push_back(std::move(rec));
        }
        out.push_back(std::move(mr));
    }
    return out;
}

}  // namespace cardioforge::diffusion
