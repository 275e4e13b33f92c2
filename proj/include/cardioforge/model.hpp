#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cardioforge/common.hpp"
#include "cardioforge/dsp.hpp"
#include "cardioforge/tensor.hpp"

namespace cardioforge::model {

struct ConvBlockSpec {
    std::size_t channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
};

struct TransformerSpec {
    std::size_t n_layers = 0;
    std::size_t d_model = 0;
    std::size_t d_mlp = 0;
    std::size_t n_heads = 1;
};

// Conv stack + transformer dimensions. The paper-shape preset mirrors the
// published architecture; the toy preset keeps the same structure at a scale
// that trains on a laptop.
struct EncoderConfig {
    std::vector<ConvBlockSpec> conv_blocks;
    TransformerSpec transformer;

    void validate() const;
    std::size_t receptive_field() const;
    std::size_t total_stride() const;

    static EncoderConfig paper_preset();
    static EncoderConfig toy_preset();
};

// frames = floor((len - R) / S) + 1; throws ShapeError when len < R.
std::size_t frames_for(std::size_t len, const EncoderConfig& cfg);

struct HeadConfig {
    std::size_t n_hidden_layers = 1;
    std::size_t hidden_size = 32;
    std::size_t n_features_in = 64;
    std::size_t n_classes = 2;

    void validate() const;
};

struct LoRAAdapter {
    std::string base_name;
    tensor::Tensor a;  // [rank, d_in]
    tensor::Tensor b;  // [d_out, rank]
    std::size_t rank = 0;
    double alpha = 1.0;
    bool merged = false;
};

// Registers "<base>.lora_a"/"<base>.lora_b" in the store and freezes the base
// weight; with b zero-initialized the adapted forward equals the base forward.
LoRAAdapter lora_wrap(tensor::ParamStore& store, const std::string& base_name,
                      std::size_t rank, double alpha, Rng& rng);
// y = x W^T + b + (alpha/rank) * (x A^T) B^T when an adapter is active.
tensor::Tensor lora_linear(const tensor::Tensor& x, const tensor::Tensor& w,
                           const tensor::Tensor& b, const LoRAAdapter* adapter);
// Folds (alpha/rank) * B A into the base weight and deactivates the adapter.
void lora_merge(tensor::ParamStore& store, LoRAAdapter& adapter);
std::size_t lora_trainable_count(const LoRAAdapter& adapter);

struct EncodeResult {
    tensor::Tensor features;                          // [frames, d_model]
    std::vector<std::vector<dsp::Matrix>> attention;  // [layer][head], rows softmaxed
};

class Encoder {
public:
    Encoder(EncoderConfig cfg, tensor::ParamStore& store, std::string prefix, Rng& rng);

    // Conv stack + projection to d_model, with positional encodings added.
    tensor::Tensor conv_features(const tensor::Tensor& wave) const;
    EncodeResult transformer_encode(const tensor::Tensor& features,
                                    bool want_attention = false) const;
    EncodeResult encode(const tensor::Tensor& wave, bool want_attention = false) const;

    // Default placement: attention query/value projections and the MLP first
    // layer of every transformer block.
    void add_lora(std::size_t rank, double alpha, Rng& rng);
    void merge_lora();
    bool has_lora() const { return !adapters_.empty(); }

    const EncoderConfig& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }

private:
    tensor::Tensor adapted_linear(const std::string& w_name, const std::string& b_name,
                                  const tensor::Tensor& x) const;

    EncoderConfig cfg_;
    tensor::ParamStore* store_;
    std::string prefix_;
    std::map<std::string, LoRAAdapter> adapters_;
};

// Mean-pools each encoded sequence over frames and concatenates the pooled
// vectors in input order (PCG before ECG for multimodal; site order for
// multichannel). Result shape: [1, n_inputs * d_model].
tensor::Tensor concat_features(const std::vector<tensor::Tensor>& encoded);

struct HeadOutput {
    tensor::Tensor logits;       // [n, n_classes]
    tensor::Tensor probs;        // softmax of logits
    tensor::Tensor penultimate;  // first hidden layer output, post-activation
};

class MlpHead {
public:
    MlpHead(HeadConfig cfg, tensor::ParamStore& store, std::string prefix, Rng& rng);

    HeadOutput forward(const tensor::Tensor& fused) const;
    const HeadConfig& config() const { return cfg_; }

private:
    HeadConfig cfg_;
    tensor::ParamStore* store_;
    std::string prefix_;
};

struct ClassifierConfig {
    EncoderConfig encoder;
    HeadConfig head;
    std::size_t n_inputs = 1;

    void validate() const;  // head.n_features_in must equal n_inputs * d_model
};

struct ForwardResult {
    HeadOutput head;
    std::vector<EncodeResult> encoders;
};

struct ClassifierOutput {
    std::vector<double> probs;
    std::vector<double> penultimate;
    std::vector<std::vector<dsp::Matrix>> attention;  // encoder 0, when requested
};

class Classifier {
public:
    Classifier(ClassifierConfig cfg, std::uint64_t seed);
    Classifier(const Classifier&) = delete;
    Classifier& operator=(const Classifier&) = delete;

    ForwardResult forward_t(const std::vector<tensor::Tensor>& waves,
                            bool want_attention = false) const;
    ClassifierOutput forward(const std::vector<std::vector<double>>& waves,
                             bool want_attention = false) const;
    // One row of logits per sample; each sample is one waveform per input.
    tensor::Tensor batch_logits(
        const std::vector<std::vector<std::vector<double>>>& batch) const;

    tensor::ParamStore& params() { return store_; }
    const tensor::ParamStore& params() const { return store_; }
    const ClassifierConfig& config() const { return cfg_; }
    Encoder& encoder(std::size_t i);
    const Encoder& encoder(std::size_t i) const;
    MlpHead& head() { return *head_; }

    void save(const std::filesystem::path& path, const nlohmann::json& extra_meta = {}) const;
    static std::unique_ptr<Classifier> load(const std::filesystem::path& path);

private:
    ClassifierConfig cfg_;
    tensor::ParamStore store_;
    std::vector<std::unique_ptr<Encoder>> encoders_;
    std::unique_ptr<MlpHead> head_;
};

// Copies parameter values between stores, rewriting "<src_prefix>..." names to
// "<dst_prefix>...". Used to assemble multi-input models from single-channel
// pre-trained encoders.
void copy_prefixed_values(const tensor::ParamStore& src, const std::string& src_prefix,
                          tensor::ParamStore& dst, const std::string& dst_prefix);

nlohmann::json classifier_config_to_json(const ClassifierConfig& cfg);
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);

struct SVMHead {
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> dual_coef;  // alpha_i * y_i per support vector
    double bias = 0.0;
    double gamma = 1.0;
    double c = 1.0;

    double decision(const std::vector<double>& x) const;
    int predict(const std::vector<double>& x) const;  // 0 or 1
};

// gamma "scale": 1 / (n_features * variance of the pooled feature values).
double svm_scale_gamma(const std::vector<std::vector<double>>& xs);
// RBF-kernel SVM trained with SMO to KKT tolerance 1e-3. gamma <= 0 selects
// the scale default. Labels are {0, 1}.
SVMHead svm_fit(const std::vector<std::vector<double>>& xs, const std::vector<int>& labels,
                double gamma = 0.0, double c = 1.0);

// Final-layer attention received per token, averaged over heads, upsampled to
// sample resolution and normalized so the maximum is 1.
std::vector<double> attention_importance(const Classifier& model,
                                         const std::vector<double>& fragment);
void write_importance_csv(const std::filesystem::path& path,
                          const std::vector<double>& curve);

}  // namespace cardioforge::model
