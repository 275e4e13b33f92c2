#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardioforge/augment.hpp"
#include "cardioforge/common.hpp"
#include "cardioforge/dsp.hpp"
#include "cardioforge/eval.hpp"
#include "cardioforge/model.hpp"
#include "cardioforge/signal_io.hpp"
#include "cardioforge/tensor.hpp"

namespace cardioforge::train {

struct OptimizerConfig {
    enum class Kind { SgdMomentum, RmsProp };
    Kind kind = Kind::SgdMomentum;
    double learning_rate = 0.001;
    double weight_decay = 0.0;
    double momentum = 0.0;    // sgd
    double smoothing = 0.99;  // rmsprop
    double epsilon = 1e-8;    // rmsprop
    std::size_t batch_size = 64;

    void validate() const;
};

struct LRSchedule {
    double gamma = 1.0;
    std::size_t step_size = 1;

    void validate() const;
};

double lr_at(std::size_t epoch, double base_lr, const LRSchedule& sched);

// Velocity (sgd) or squared-gradient accumulator (rmsprop) per parameter.
struct OptState {
    std::map<std::string, std::vector<double>> slots;
};

void sgd_step(tensor::ParamStore& params, OptState& state, const OptimizerConfig& cfg, double lr);
void rmsprop_step(tensor::ParamStore& params, OptState& state, const OptimizerConfig& cfg,
                  double lr);

// Inverse class frequency, normalized so weights average 1 over the samples.
std::vector<double> class_weights(const std::vector<int>& labels, std::size_t n_classes);

enum class DataSource { Original, DiffWave, WaveGrad, TrainingASynth, TrainingBSynth };

std::string to_string(DataSource s);
DataSource data_source_from_string(const std::string& s);

struct SourceSpec {
    DataSource source = DataSource::Original;
    std::size_t normal_augments = 0;
    std::size_t abnormal_augments = 0;
};

struct ScheduleStage {
    std::vector<SourceSpec> sources;
    std::size_t epochs = 1;

    void validate() const;
};

std::vector<ScheduleStage> schedule_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const std::vector<ScheduleStage>& stages);
std::vector<ScheduleStage> load_schedule(const std::string& path);

OptimizerConfig optimizer_from_json(const nlohmann::json& j);
nlohmann::json optimizer_to_json(const OptimizerConfig& cfg);
LRSchedule lr_schedule_from_json(const nlohmann::json& j);
nlohmann::json lr_schedule_to_json(const LRSchedule& sched);

struct TrainDataset {
    std::map<DataSource, std::vector<MultiRecord>> sources;
    std::vector<MultiRecord> validation;  // always original data
};

struct TrainOptions {
    dsp::SegmentSpec segment;
    augment::AugmentConfig augment_cfg;
    augment::NoiseBank noise_bank;
    std::size_t synthetic_segment_cap = 2;  // fragments kept per synthetic-source record
    std::uint64_t seed = 0;
    std::filesystem::path checkpoint_dir;  // per-epoch checkpoints when set
    bool restore_best = true;              // reload the highest subject-MCC epoch at the end
};

struct EpochLog {
    std::size_t stage = 0;
    std::size_t epoch = 0;  // global index across stages
    double lr = 0.0;
    double train_loss = 0.0;
    nlohmann::json val_metrics;
};

using TrainLog = std::vector<EpochLog>;

nlohmann::json epoch_log_to_json(const EpochLog& e);
void write_train_log(const TrainLog& log, const std::string& path);

// Executes the staged schedule: per stage the training pool is the stage's
// sources plus their per-class augmented copies; online augmentation applies
// during batching; validation always runs on the original validation records.
TrainLog run_schedule(model::Classifier& model, const std::vector<ScheduleStage>& stages,
                      const TrainDataset& data, const OptimizerConfig& ocfg,
                      const LRSchedule& lsched, const TrainOptions& opts);

// Trains one single-input model per channel on stage 1 only, then copies each
// encoder into the assembled multi-input model.
void pretrain_encoders(model::Classifier& assembled, const std::vector<ScheduleStage>& stages,
                       const TrainDataset& data, const OptimizerConfig& ocfg,
                       const LRSchedule& lsched, const TrainOptions& opts);

// argmax of validation MCC; ties resolved toward the later index.
std::size_t select_best(const std::vector<double>& val_mcc);

struct SearchSpace {
    std::array<double, 2> learning_rate{1e-4, 1e-1};  // log-uniform
    std::array<double, 2> weight_decay{1e-6, 1e-3};   // log-uniform
    std::array<double, 2> momentum{0.0, 0.95};
    std::array<double, 2> gamma{0.01, 1.0};
    std::vector<std::size_t> step_sizes{1, 2, 3, 4, 5, 6, 7};
    std::vector<std::size_t> batch_sizes{16, 32, 64};
    std::vector<std::size_t> hidden_layers{1, 2, 3};
    std::vector<std::size_t> hidden_sizes{128, 256, 512, 1024};

    void validate() const;
};

struct Trial {
    OptimizerConfig optimizer;
    LRSchedule lr_schedule;
    std::size_t hidden_layers = 1;
    std::size_t hidden_size = 512;
    double objective = 0.0;  // mean over runs_per_trial
};

struct SearchResult {
    Trial best;
    std::size_t best_index = 0;
    std::vector<Trial> trials;
};

SearchResult random_search(const SearchSpace& space, std::size_t n_trials,
                           std::size_t runs_per_trial,
                           const std::function<double(const Trial&, std::size_t run)>& objective,
                           std::uint64_t seed);

// Fragment pool entry: the segmented waveforms plus bookkeeping for
// class weighting, subject aggregation and the synthetic cap.
struct PoolEntry {
    Fragment fragment;
    int label = 0;  // 1 = abnormal
};

// Segments records into pool entries; non-original sources are capped at
// `synthetic_cap` fragments per record.
std::vector<PoolEntry> build_pool(const std::vector<MultiRecord>& records, DataSource source,
                                  const dsp::SegmentSpec& spec, std::size_t synthetic_cap);

// Forward pass over fragments; returns per-fragment abnormal probability.
std::vector<double> predict_probs(const model::Classifier& model,
                                  const std::vector<PoolEntry>& pool);

// Fragment- and subject-level metrics of the model on the given pool.
nlohmann::json evaluate_pool(const model::Classifier& model, const std::vector<PoolEntry>& pool);

}  // namespace cardioforge::train
