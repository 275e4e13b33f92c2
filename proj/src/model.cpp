#include "cardioforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace cardioforge::model {

namespace ts = cardioforge::tensor;

void EncoderConfig::validate() const {
    if (conv_blocks.empty()) throw ConfigError("EncoderConfig: no conv blocks");
    for (const auto& b : conv_blocks) {
        if (b.channels == 0 || b.kernel == 0) {
            throw ConfigError("EncoderConfig: conv channels and kernel must be positive");
        }
        if (b.stride < 1) throw ConfigError("EncoderConfig: strides must be >= 1");
    }
    const auto& t = transformer;
    if (t.n_layers == 0 || t.d_model == 0 || t.d_mlp == 0 || t.n_heads == 0) {
        throw ConfigError("EncoderConfig: transformer dimensions must be positive");
    }
    if (t.d_model % t.n_heads != 0) {
        throw ConfigError("EncoderConfig: d_model must be divisible by n_heads");
    }
}

std::size_t EncoderConfig::receptive_field() const {
    std::size_t r = 1;
    std::size_t stride = 1;
    for (const auto& b : conv_blocks) {
        r += (b.kernel - 1) * stride;
        stride *= b.stride;
    }
    return r;
}

std::size_t EncoderConfig::total_stride() const {
    std::size_t s = 1;
    for (const auto& b : conv_blocks) s *= b.stride;
    return s;
}

EncoderConfig EncoderConfig::paper_preset() {
    EncoderConfig cfg;
    cfg.conv_blocks = {{512, 10, 5}, {512, 3, 2}, {512, 3, 2}, {512, 3, 2},
                       {512, 3, 2},  {512, 2, 2}, {512, 2, 2}};
    cfg.transformer = {12, 768, 3072, 8};
    return cfg;
}

EncoderConfig EncoderConfig::toy_preset() {
    EncoderConfig cfg;
    cfg.conv_blocks = {{32, 24, 4}, {32, 5, 2}, {32, 4, 2}};
    cfg.transformer = {2, 64, 128, 2};
    return cfg;
}

std::size_t frames_for(std::size_t len, const EncoderConfig& cfg) {
    std::size_t r = cfg.receptive_field();
    if (len < r) {
        throw ShapeError("frames_for: input of " + std::to_string(len) +
                         " samples is shorter than the receptive field " + std::to_string(r));
    }
    return (len - r) / cfg.total_stride() + 1;
}

void HeadConfig::validate() const {
    if (n_hidden_layers < 1 || hidden_size < 1 || n_features_in < 1 || n_classes < 2) {
        throw ConfigError("HeadConfig: sizes must be >= 1 and n_classes >= 2");
    }
}

LoRAAdapter lora_wrap(ts::ParamStore& store, const std::string& base_name,
                      std::size_t rank, double alpha, Rng& rng) {
    if (rank == 0) throw ArgumentError("lora_wrap: rank must be positive");
    ts::Tensor w = store.get(base_name);
    if (w->shape.size() != 2) throw ShapeError("lora_wrap: base weight must be 2-D");
    std::size_t d_out = w->shape[0];
    std::size_t d_in = w->shape[1];
    if (rank > std::min(d_in, d_out)) {
        throw ArgumentError("lora_wrap: rank exceeds min(d_in, d_out)");
    }

    LoRAAdapter ad;
    ad.base_name = base_name;
    ad.rank = rank;
    ad.alpha = alpha;
    ad.a = store.add_uniform(base_name + ".lora_a", {rank, d_in}, d_in, rng);
    ad.b = store.add_zeros(base_name + ".lora_b", {d_out, rank});
    w->trainable = false;
    return ad;
}

ts::Tensor lora_linear(const ts::Tensor& x, const ts::Tensor& w, const ts::Tensor& b,
                       const LoRAAdapter* adapter) {
    ts::Tensor base = ts::linear(x, w, b);
    if (!adapter || adapter->merged) return base;
    ts::Tensor delta = ts::linear(ts::linear(x, adapter->a, nullptr), adapter->b, nullptr);
    return ts::add(base, ts::scale(delta, adapter->alpha / static_cast<double>(adapter->rank)));
}

void lora_merge(ts::ParamStore& store, LoRAAdapter& adapter) {
    if (adapter.merged) throw ArgumentError("lora_merge: adapter already merged");
    ts::Tensor w = store.get(adapter.base_name);
    std::size_t d_out = w->shape[0];
    std::size_t d_in = w->shape[1];
    double s = adapter.alpha / static_cast<double>(adapter.rank);
    for (std::size_t o = 0; o < d_out; ++o) {
        for (std::size_t j = 0; j < d_in; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < adapter.rank; ++r) {
                acc += adapter.b->value[o * adapter.rank + r] * adapter.a->value[r * d_in + j];
            }
            w->value[o * d_in + j] += s * acc;
        }
    }
    adapter.merged = true;
    adapter.a->trainable = false;
    adapter.b->trainable = false;
}

std::size_t lora_trainable_count(const LoRAAdapter& adapter) {
    return adapter.a->size() + adapter.b->size();
}

namespace {

ts::Tensor ones_param(ts::ParamStore& store, const std::string& name, std::size_t n) {
    return store.add_value(name, {n}, std::vector<double>(n, 1.0));
}

ts::Tensor positional_encoding(std::size_t frames, std::size_t d) {
    std::vector<double> pe(frames * d);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t i = 0; i < d; ++i) {
            std::size_t pair = i / 2;
            double freq = std::pow(10000.0, -2.0 * static_cast<double>(pair) /
                                                 static_cast<double>(d));
            double angle = static_cast<double>(t) * freq;
            pe[t * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return ts::constant({frames, d}, std::move(pe));
}

dsp::Matrix to_matrix(const ts::Tensor& t) {
    dsp::Matrix m(t->rows(), t->cols());
    m.data = t->value;
    return m;
}

}  // namespace

Encoder::Encoder(EncoderConfig cfg, ts::ParamStore& store, std::string prefix, Rng& rng)
    : cfg_(std::move(cfg)), store_(&store), prefix_(std::move(prefix)) {
    cfg_.validate();
    std::size_t c_in = 1;
    for (std::size_t i = 0; i < cfg_.conv_blocks.size(); ++i) {
        const auto& b = cfg_.conv_blocks[i];
        std::string base = prefix_ + ".conv" + std::to_string(i);
        store_->add_uniform(base + ".w", {b.channels, c_in, b.kernel}, c_in * b.kernel, rng);
        store_->add_zeros(base + ".b", {b.channels});
        ones_param(*store_, base + ".ln_g", b.channels);
        store_->add_zeros(base + ".ln_b", {b.channels});
        c_in = b.channels;
    }
    std::size_t d = cfg_.transformer.d_model;
    store_->add_uniform(prefix_ + ".proj.w", {d, c_in}, c_in, rng);
    store_->add_zeros(prefix_ + ".proj.b", {d});
    for (std::size_t l = 0; l < cfg_.transformer.n_layers; ++l) {
        std::string base = prefix_ + ".t" + std::to_string(l);
        ones_param(*store_, base + ".ln1_g", d);
        store_->add_zeros(base + ".ln1_b", {d});
        for (const char* part : {"wq", "wk", "wv", "wo"}) {
            store_->add_uniform(base + ".attn." + std::string(part), {d, d}, d, rng);
            store_->add_zeros(base + ".attn.b" + std::string(part + 1), {d});
        }
        ones_param(*store_, base + ".ln2_g", d);
        store_->add_zeros(base + ".ln2_b", {d});
        store_->add_uniform(base + ".mlp.w1", {cfg_.transformer.d_mlp, d}, d, rng);
        store_->add_zeros(base + ".mlp.b1", {cfg_.transformer.d_mlp});
        store_->add_uniform(base + ".mlp.w2", {d, cfg_.transformer.d_mlp},
                            cfg_.transformer.d_mlp, rng);
        store_->add_zeros(base + ".mlp.b2", {d});
    }
}

ts::Tensor Encoder::adapted_linear(const std::string& w_name, const std::string& b_name,
                                   const ts::Tensor& x) const {
    auto it = adapters_.find(w_name);
    const LoRAAdapter* ad = (it == adapters_.end()) ? nullptr : &it->second;
    return lora_linear(x, store_->get(w_name), b_name.empty() ? nullptr : store_->get(b_name),
                       ad);
}

ts::Tensor Encoder::conv_features(const ts::Tensor& wave) const {
    if (wave->shape.size() != 2 || wave->rows() != 1) {
        throw ShapeError("conv_features: waveform must have shape [1, len]");
    }
    frames_for(wave->cols(), cfg_);  // validates the length up front

    ts::Tensor x = wave;
    for (std::size_t i = 0; i < cfg_.conv_blocks.size(); ++i) {
        const auto& b = cfg_.conv_blocks[i];
        std::string base = prefix_ + ".conv" + std::to_string(i);
        x = ts::conv1d(x, store_->get(base + ".w"), store_->get(base + ".b"), b.stride);
        x = ts::transpose(x);  // [frames_i, channels]
        x = ts::layer_norm(x, store_->get(base + ".ln_g"), store_->get(base + ".ln_b"));
        x = ts::gelu(x);
        if (i + 1 < cfg_.conv_blocks.size()) x = ts::transpose(x);
    }
    x = ts::linear(x, store_->get(prefix_ + ".proj.w"), store_->get(prefix_ + ".proj.b"));
    return ts::add(x, positional_encoding(x->rows(), cfg_.transformer.d_model));
}

EncodeResult Encoder::transformer_encode(const ts::Tensor& features,
                                         bool want_attention) const {
    std::size_t d = cfg_.transformer.d_model;
    if (features->shape.size() != 2 || features->cols() != d) {
        throw ShapeError("transformer_encode: features do not match d_model");
    }
    std::size_t heads = cfg_.transformer.n_heads;
    std::size_t dh = d / heads;

    EncodeResult res;
    ts::Tensor x = features;
    for (std::size_t l = 0; l < cfg_.transformer.n_layers; ++l) {
        std::string base = prefix_ + ".t" + std::to_string(l);
        ts::Tensor h = ts::layer_norm(x, store_->get(base + ".ln1_g"),
                                      store_->get(base + ".ln1_b"));
        ts::Tensor q = adapted_linear(base + ".attn.wq", base + ".attn.bq", h);
        ts::Tensor k = adapted_linear(base + ".attn.wk", base + ".attn.bk", h);
        ts::Tensor v = adapted_linear(base + ".attn.wv", base + ".attn.bv", h);

        std::vector<ts::Tensor> ctx_heads;
        std::vector<dsp::Matrix> layer_attn;
        for (std::size_t hd = 0; hd < heads; ++hd) {
            ts::Tensor qh = ts::slice_cols(q, hd * dh, (hd + 1) * dh);
            ts::Tensor kh = ts::slice_cols(k, hd * dh, (hd + 1) * dh);
            ts::Tensor vh = ts::slice_cols(v, hd * dh, (hd + 1) * dh);
            ts::Tensor scores = ts::scale(ts::matmul(qh, ts::transpose(kh)),
                                          1.0 / std::sqrt(static_cast<double>(dh)));
            ts::Tensor attn = ts::softmax_rows(scores);
            if (want_attention) layer_attn.push_back(to_matrix(attn));
            ctx_heads.push_back(ts::matmul(attn, vh));
        }
        ts::Tensor ctx = ts::linear(ts::concat_cols(ctx_heads), store_->get(base + ".attn.wo"),
                                    store_->get(base + ".attn.bo"));
        x = ts::add(x, ctx);

        ts::Tensor h2 = ts::layer_norm(x, store_->get(base + ".ln2_g"),
                                       store_->get(base + ".ln2_b"));
        ts::Tensor m = adapted_linear(base + ".mlp.w1", base + ".mlp.b1", h2);
        m = ts::linear(ts::gelu(m), store_->get(base + ".mlp.w2"),
                       store_->get(base + ".mlp.b2"));
        x = ts::add(x, m);
        if (want_attention) res.attention.push_back(std::move(layer_attn));
    }
    res.features = x;
    return res;
}

EncodeResult Encoder::encode(const ts::Tensor& wave, bool want_attention) const {
    return transformer_encode(conv_features(wave), want_attention);
}

void Encoder::add_lora(std::size_t rank, double alpha, Rng& rng) {
    if (has_lora()) throw ArgumentError("add_lora: adapters already attached");
    for (std::size_t l = 0; l < cfg_.transformer.n_layers; ++l) {
        std::string base = prefix_ + ".t" + std::to_string(l);
        for (const std::string& name :
             {base + ".attn.wq", base + ".attn.wv", base + ".mlp.w1"}) {
            adapters_.emplace(name, lora_wrap(*store_, name, rank, alpha, rng));
        }
    }
}

void Encoder::merge_lora() {
    for (auto& [name, ad] : adapters_) lora_merge(*store_, ad);
    adapters_.clear();
}

ts::Tensor concat_features(const std::vector<ts::Tensor>& encoded) {
    if (encoded.empty()) throw ArgumentError("concat_features: no inputs");
    std::size_t d = encoded.front()->cols();
    std::vector<ts::Tensor> pooled;
    pooled.reserve(encoded.size());
    for (const ts::Tensor& e : encoded) {
        if (e->shape.size() != 2 || e->cols() != d) {
            throw ShapeError("concat_features: inconsistent d_model across inputs");
        }
        pooled.push_back(ts::mean_rows(e));
    }
    return ts::concat_cols(pooled);
}

MlpHead::MlpHead(HeadConfig cfg, ts::ParamStore& store, std::string prefix, Rng& rng)
    : cfg_(cfg), store_(&store), prefix_(std::move(prefix)) {
    cfg_.validate();
    std::size_t prev = cfg_.n_features_in;
    for (std::size_t i = 0; i < cfg_.n_hidden_layers; ++i) {
        std::string base = prefix_ + ".h" + std::to_string(i);
        store_->add_uniform(base + ".w", {cfg_.hidden_size, prev}, prev, rng);
        store_->add_zeros(base + ".b", {cfg_.hidden_size});
        prev = cfg_.hidden_size;
    }
    store_->add_uniform(prefix_ + ".out.w", {cfg_.n_classes, prev}, prev, rng);
    store_->add_zeros(prefix_ + ".out.b", {cfg_.n_classes});
}

HeadOutput MlpHead::forward(const ts::Tensor& fused) const {
    if (fused->shape.size() != 2 || fused->cols() != cfg_.n_features_in) {
        throw ShapeError("mlp_head: fused dimension does not match the head config");
    }
    HeadOutput out;
    ts::Tensor x = fused;
    for (std::size_t i = 0; i < cfg_.n_hidden_layers; ++i) {
        std::string base = prefix_ + ".h" + std::to_string(i);
        x = ts::relu(ts::linear(x, store_->get(base + ".w"), store_->get(base + ".b")));
        if (i == 0) out.penultimate = x;
    }
    out.logits = ts::linear(x, store_->get(prefix_ + ".out.w"), store_->get(prefix_ + ".out.b"));
    out.probs = ts::softmax_rows(out.logits);
    return out;
}

void ClassifierConfig::validate() const {
    encoder.validate();
    head.validate();
    if (n_inputs < 1) throw ConfigError("ClassifierConfig: n_inputs must be >= 1");
    if (head.n_features_in != n_inputs * encoder.transformer.d_model) {
        throw ConfigError("ClassifierConfig: head.n_features_in must equal n_inputs * d_model");
    }
}

Classifier::Classifier(ClassifierConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    for (std::size_t i = 0; i < cfg_.n_inputs; ++i) {
        encoders_.push_back(
            std::make_unique<Encoder>(cfg_.encoder, store_, "enc" + std::to_string(i), rng));
    }
    head_ = std::make_unique<MlpHead>(cfg_.head, store_, "head", rng);
}

Encoder& Classifier::encoder(std::size_t i) {
    if (i >= encoders_.size()) throw ArgumentError("Classifier: encoder index out of range");
    return *encoders_[i];
}

const Encoder& Classifier::encoder(std::size_t i) const {
    if (i >= encoders_.size()) throw ArgumentError("Classifier: encoder index out of range");
    return *encoders_[i];
}

ForwardResult Classifier::forward_t(const std::vector<ts::Tensor>& waves,
                                    bool want_attention) const {
    if (waves.size() != cfg_.n_inputs) {
        throw ShapeError("Classifier: expected " + std::to_string(cfg_.n_inputs) +
                         " input waveforms, got " + std::to_string(waves.size()));
    }
    ForwardResult res;
    std::vector<ts::Tensor> encoded;
    for (std::size_t i = 0; i < waves.size(); ++i) {
        res.encoders.push_back(encoders_[i]->encode(waves[i], want_attention));
        encoded.push_back(res.encoders.back().features);
    }
    res.head = head_->forward(concat_features(encoded));
    return res;
}

ClassifierOutput Classifier::forward(const std::vector<std::vector<double>>& waves,
                                     bool want_attention) const {
    std::vector<ts::Tensor> tensors;
    tensors.reserve(waves.size());
    for (const auto& w : waves) tensors.push_back(ts::constant({1, w.size()}, w));
    ForwardResult fr = forward_t(tensors, want_attention);

    ClassifierOutput out;
    out.probs = fr.head.probs->value;
    out.penultimate = fr.head.penultimate->value;
    if (want_attention && !fr.encoders.empty()) {
        out.attention = std::move(fr.encoders.front().attention);
    }
    return out;
}

ts::Tensor Classifier::batch_logits(
    const std::vector<std::vector<std::vector<double>>>& batch) const {
    if (batch.empty()) throw ArgumentError("batch_logits: empty batch");
    std::vector<ts::Tensor> rows;
    rows.reserve(batch.size());
    for (const auto& sample : batch) {
        std::vector<ts::Tensor> tensors;
        tensors.reserve(sample.size());
        for (const auto& w : sample) tensors.push_back(ts::constant({1, w.size()}, w));
        rows.push_back(forward_t(tensors).head.logits);
    }
    return ts::concat_rows(rows);
}

void Classifier::save(const std::filesystem::path& path,
                      const nlohmann::json& extra_meta) const {
    nlohmann::json meta;
    meta["kind"] = "classifier";
    meta["config"] = classifier_config_to_json(cfg_);
    if (extra_meta.is_object()) {
        for (const auto& [k, v] : extra_meta.items()) meta[k] = v;
    }
    ts::save_checkpoint(path, meta, store_);
}

std::unique_ptr<Classifier> Classifier::load(const std::filesystem::path& path) {
    ts::Checkpoint ck = ts::load_checkpoint(path);
    if (ck.meta.value("kind", "") != "classifier") {
        throw FormatError("Classifier::load: checkpoint is not a classifier");
    }
    auto cfg = classifier_config_from_json(ck.meta.at("config"));
    auto clf = std::make_unique<Classifier>(cfg, 0);
    ts::load_into(clf->store_, ck);
    return clf;
}

void copy_prefixed_values(const ts::ParamStore& src, const std::string& src_prefix,
                          ts::ParamStore& dst, const std::string& dst_prefix) {
    bool any = false;
    for (const auto& name : src.names()) {
        if (name.rfind(src_prefix, 0) != 0) continue;
        any = true;
        std::string dst_name = dst_prefix + name.substr(src_prefix.size());
        if (!dst.has(dst_name)) {
            throw ArgumentError("copy_prefixed_values: destination lacks " + dst_name);
        }
        ts::Tensor s = src.get(name);
        ts::Tensor d = dst.get(dst_name);
        if (d->shape != s->shape) {
            throw ShapeError("copy_prefixed_values: shape mismatch for " + dst_name);
        }
        d->value = s->value;
    }
    if (!any) {
        throw ArgumentError("copy_prefixed_values: no parameters begin with " + src_prefix);
    }
}

nlohmann::json classifier_config_to_json(const ClassifierConfig& cfg) {
    nlohmann::json j;
    j["encoder"]["conv_blocks"] = nlohmann::json::array();
    for (const auto& b : cfg.encoder.conv_blocks) {
        j["encoder"]["conv_blocks"].push_back({b.channels, b.kernel, b.stride});
    }
    j["encoder"]["transformer"] = {{"n_layers", cfg.encoder.transformer.n_layers},
                                   {"d_model", cfg.encoder.transformer.d_model},
                                   {"d_mlp", cfg.encoder.transformer.d_mlp},
                                   {"n_heads", cfg.encoder.transformer.n_heads}};
    j["head"] = {{"n_hidden_layers", cfg.head.n_hidden_layers},
                 {"hidden_size", cfg.head.hidden_size},
                 {"n_features_in", cfg.head.n_features_in},
                 {"n_classes", cfg.head.n_classes}};
    j["n_inputs"] = cfg.n_inputs;
    return j;
}

ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
    ClassifierConfig cfg;
    try {
        for (const auto& b : j.at("encoder").at("conv_blocks")) {
            cfg.encoder.conv_blocks.push_back(
                {b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>(),
                 b.at(2).get<std::size_t>()});
        }
        const auto& t = j.at("encoder").at("transformer");
        cfg.encoder.transformer = {t.at("n_layers").get<std::size_t>(),
                                   t.at("d_model").get<std::size_t>(),
                                   t.at("d_mlp").get<std::size_t>(),
                                   t.at("n_heads").get<std::size_t>()};
        const auto& h = j.at("head");
        cfg.head = {h.at("n_hidden_layers").get<std::size_t>(),
                    h.at("hidden_size").get<std::size_t>(),
                    h.at("n_features_in").get<std::size_t>(),
                    h.at("n_classes").get<std::size_t>()};
        cfg.n_inputs = j.at("n_inputs").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("classifier config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

namespace {

double rbf_kernel(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

}  // namespace

double SVMHead::decision(const std::vector<double>& x) const {
    double f = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i) {
        f += dual_coef[i] * rbf_kernel(support_vectors[i], x, gamma);
    }
    return f;
}

int SVMHead::predict(const std::vector<double>& x) const {
    return decision(x) >= 0.0 ? 1 : 0;
}

double svm_scale_gamma(const std::vector<std::vector<double>>& xs) {
    if (xs.empty() || xs.front().empty()) {
        throw ArgumentError("svm_scale_gamma: empty feature matrix");
    }
    std::size_t d = xs.front().size();
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& row : xs) {
        for (double v : row) {
            sum += v;
            sum_sq += v * v;
            ++n;
        }
    }
    double mean = sum / static_cast<double>(n);
    double var = sum_sq / static_cast<double>(n) - mean * mean;
    if (var <= 1e-12) return 1.0 / static_cast<double>(d);
    return 1.0 / (static_cast<double>(d) * var);
}

SVMHead svm_fit(const std::vector<std::vector<double>>& xs, const std::vector<int>& labels,
                double gamma, double c) {
    const std::size_t n = xs.size();
    if (n == 0) throw FitError("svm_fit: empty training set");
    if (labels.size() != n) throw ArgumentError("svm_fit: label count mismatch");
    const std::size_t d = xs.front().size();
    for (const auto& row : xs) {
        if (row.size() != d) throw ShapeError("svm_fit: inconsistent feature dimensions");
    }
    bool has_pos = false, has_neg = false;
    for (int l : labels) {
        if (l == 1) has_pos = true;
        else if (l == 0) has_neg = true;
        else throw ArgumentError("svm_fit: labels must be 0 or 1");
    }
    if (!has_pos || !has_neg) throw FitError("svm_fit: need examples from both classes");
    if (gamma <= 0.0) gamma = svm_scale_gamma(xs);
    if (c <= 0.0) throw ArgumentError("svm_fit: C must be positive");

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == 1 ? 1.0 : -1.0;

    std::vector<double> kmat(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double k = rbf_kernel(xs[i], xs[j], gamma);
            kmat[i * n + j] = k;
            kmat[j * n + i] = k;
        }
    }

    constexpr double kTol = 1e-3;      // KKT tolerance
    constexpr double kEps = 1e-7;      // minimal multiplier change
    std::vector<double> alpha(n, 0.0);
    std::vector<double> err(n);
    double b = 0.0;
    for (std::size_t i = 0; i < n; ++i) err[i] = -y[i];  // f == 0 initially

    auto take_step = [&](std::size_t i1, std::size_t i2) -> bool {
        if (i1 == i2) return false;
        double a1 = alpha[i1], a2 = alpha[i2];
        double y1 = y[i1], y2 = y[i2];
        double e1 = err[i1], e2 = err[i2];
        double s = y1 * y2;
        double lo, hi;
        if (y1 != y2) {
            lo = std::max(0.0, a2 - a1);
            hi = std::min(c, c + a2 - a1);
        } else {
            lo = std::max(0.0, a1 + a2 - c);
            hi = std::min(c, a1 + a2);
        }
        if (lo >= hi) return false;
        double k11 = kmat[i1 * n + i1];
        double k12 = kmat[i1 * n + i2];
        double k22 = kmat[i2 * n + i2];
        double eta = k11 + k22 - 2.0 * k12;
        double a2_new;
        if (eta > 0.0) {
            a2_new = a2 + y2 * (e1 - e2) / eta;
            a2_new = std::clamp(a2_new, lo, hi);
        } else {
            return false;  // flat direction; RBF makes this a duplicate-point case
        }
        if (std::abs(a2_new - a2) < kEps * (a2_new + a2 + kEps)) return false;
        double a1_new = a1 + s * (a2 - a2_new);

        double b_old = b;
        double b1 = b_old - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12;
        double b2 = b_old - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22;
        if (a1_new > 0.0 && a1_new < c) {
            b = b1;
        } else if (a2_new > 0.0 && a2_new < c) {
            b = b2;
        } else {
            b = 0.5 * (b1 + b2);
        }
        alpha[i1] = a1_new;
        alpha[i2] = a2_new;
        for (std::size_t i = 0; i < n; ++i) {
            err[i] += y1 * (a1_new - a1) * kmat[i1 * n + i] +
                      y2 * (a2_new - a2) * kmat[i2 * n + i] + (b - b_old);
        }
        return true;
    };

    auto examine = [&](std::size_t i2) -> bool {
        double y2 = y[i2], a2 = alpha[i2], e2 = err[i2];
        double r2 = e2 * y2;
        if (!((r2 < -kTol && a2 < c) || (r2 > kTol && a2 > 0.0))) return false;

        // Second-choice heuristic: maximize |e1 - e2| over non-bound points.
        std::size_t best = n;
        double best_gap = -1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (alpha[j] > 0.0 && alpha[j] < c) {
                double gap = std::abs(err[j] - e2);
                if (gap > best_gap) {
                    best_gap = gap;
                    best = j;
                }
            }
        }
        if (best < n && take_step(best, i2)) return true;
        for (std::size_t j = 0; j < n; ++j) {
            if (alpha[j] > 0.0 && alpha[j] < c && take_step(j, i2)) return true;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (take_step(j, i2)) return true;
        }
        return false;
    };

    bool examine_all = true;
    std::size_t changed = 0;
    std::size_t guard = 0;
    const std::size_t max_sweeps = 1000 + 200 * n;
    do {
        changed = 0;
        if (examine_all) {
            for (std::size_t i = 0; i < n; ++i) changed += examine(i) ? 1 : 0;
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (alpha[i] > 0.0 && alpha[i] < c) changed += examine(i) ? 1 : 0;
            }
        }
        if (examine_all) {
            examine_all = false;
        } else if (changed == 0) {
            examine_all = true;
            changed = 1;  // one final full pass before stopping
        }
        if (++guard >= max_sweeps) throw FitError("svm_fit: SMO failed to converge");
    } while (changed > 0);

    SVMHead head;
    head.gamma = gamma;
    head.c = c;
    head.bias = b;
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] > 1e-9) {
            head.support_vectors.push_back(xs[i]);
            head.dual_coef.push_back(alpha[i] * y[i]);
        }
    }
    return head;
}

std::vector<double> attention_importance(const Classifier& model,
                                         const std::vector<double>& fragment) {
    ClassifierOutput out =
        model.forward(std::vector<std::vector<double>>(model.config().n_inputs, fragment),
                      /*want_attention=*/true);
    if (out.attention.empty()) throw SpecError("attention_importance: no attention maps");
    const std::vector<dsp::Matrix>& last = out.attention.back();
    const std::size_t frames = last.front().rows;

    std::vector<double> received(frames, 0.0);
    for (const dsp::Matrix& head : last) {
        for (std::size_t i = 0; i < frames; ++i) {
            for (std::size_t j = 0; j < frames; ++j) {
                received[j] += head.at(i, j);
            }
        }
    }
    const double norm = static_cast<double>(frames) * static_cast<double>(last.size());
    for (double& v : received) v /= norm;

    const std::size_t stride = model.config().encoder.total_stride();
    std::vector<double> curve(fragment.size());
    for (std::size_t s = 0; s < fragment.size(); ++s) {
        std::size_t f = std::min(s / stride, frames - 1);
        curve[s] = received[f];
    }
    double mx = 0.0;
    for (double v : curve) mx = std::max(mx, v);
    if (mx > 0.0) {
        for (double& v : curve) v /= mx;
    }
    return curve;
}

void write_importance_csv(const std::filesystem::path& path,
                          const std::vector<double>& curve) {
    std::ofstream os(path);
    if (!os) throw IoError("write_importance_csv: cannot open " + path.string());
    os << "sample_index,importance\n";
    char buf[64];
    for (std::size_t i = 0; i < curve.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", curve[i]);
        os << i << ',' << buf << '\n';
    }
}

}  // namespace cardioforge::model
