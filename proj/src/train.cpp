#include "cardioforge/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <utility>

namespace cardioforge::train {

namespace ts = tensor;
using nlohmann::json;

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw ArgumentError("OptimizerConfig: learning_rate must be positive");
    }
    if (momentum < 0.0 || momentum >= 1.0) {
        throw ArgumentError("OptimizerConfig: momentum must lie in [0, 1)");
    }
    if (weight_decay < 0.0) {
        throw ArgumentError("OptimizerConfig: weight_decay must be non-negative");
    }
    if (smoothing <= 0.0 || smoothing >= 1.0) {
        throw ArgumentError("OptimizerConfig: smoothing must lie in (0, 1)");
    }
    if (epsilon <= 0.0) throw ArgumentError("OptimizerConfig: epsilon must be positive");
    if (batch_size == 0) throw ArgumentError("OptimizerConfig: batch_size must be positive");
}

void LRSchedule::validate() const {
    if (gamma <= 0.0 || gamma > 1.0) throw ArgumentError("LRSchedule: gamma must lie in (0, 1]");
    if (step_size < 1) throw ArgumentError("LRSchedule: step_size must be at least 1");
}

double lr_at(std::size_t epoch, double base_lr, const LRSchedule& sched) {
    sched.validate();
    return base_lr * std::pow(sched.gamma, static_cast<double>(epoch / sched.step_size));
}

namespace {

std::vector<double>& slot(OptState& state, const std::string& name, std::size_t n) {
    std::vector<double>& v = state.slots[name];
    if (v.size() != n) v.assign(n, 0.0);
    return v;
}

}  // namespace

void sgd_step(ts::ParamStore& params, OptState& state, const OptimizerConfig& cfg, double lr) {
    for (const std::string& name : params.names()) {
        const ts::Tensor t = params.get(name);
        if (!t->trainable) continue;
        std::vector<double>& v = slot(state, name, t->size());
        for (std::size_t i = 0; i < t->size(); ++i) {
            const double g = t->grad[i] + cfg.weight_decay * t->value[i];
            if (!std::isfinite(g)) {
                throw TrainingError("sgd_step: non-finite gradient in " + name);
            }
            v[i] = cfg.momentum * v[i] + g;
            t->value[i] -= lr * v[i];
        }
    }
}

void rmsprop_step(ts::ParamStore& params, OptState& state, const OptimizerConfig& cfg,
                  double lr) {
    for (const std::string& name : params.names()) {
        const ts::Tensor t = params.get(name);
        if (!t->trainable) continue;
        std::vector<double>& s = slot(state, name, t->size());
        for (std::size_t i = 0; i < t->size(); ++i) {
            const double g = t->grad[i] + cfg.weight_decay * t->value[i];
            if (!std::isfinite(g)) {
                throw TrainingError("rmsprop_step: non-finite gradient in " + name);
            }
            s[i] = cfg.smoothing * s[i] + (1.0 - cfg.smoothing) * g * g;
            t->value[i] -= lr * g / (std::sqrt(s[i]) + cfg.epsilon);
        }
    }
}

std::vector<double> class_weights(const std::vector<int>& labels, std::size_t n_classes) {
    if (labels.empty()) throw ArgumentError("class_weights: no labels");
    if (n_classes == 0) throw ArgumentError("class_weights: n_classes must be positive");
    std::vector<std::size_t> counts(n_classes, 0);
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
            throw ArgumentError("class_weights: label out of range");
        }
        ++counts[static_cast<std::size_t>(y)];
    }
    std::vector<double> w(n_classes, 0.0);
    const double n = static_cast<double>(labels.size());
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (counts[c] > 0) {
            w[c] = n / (static_cast<double>(n_classes) * static_cast<double>(counts[c]));
        }
    }
    return w;
}

std::string to_string(DataSource s) {
    switch (s) {
        case DataSource::Original: return "original";
        case DataSource::DiffWave: return "diffwave";
        case DataSource::WaveGrad: return "wavegrad";
        case DataSource::TrainingASynth: return "training-a-synth";
        case DataSource::TrainingBSynth: return "training-b-synth";
    }
    throw ArgumentError("to_string: unknown data source");
}

DataSource data_source_from_string(const std::string& s) {
    if (s == "original") return DataSource::Original;
    if (s == "diffwave") return DataSource::DiffWave;
    if (s == "wavegrad") return DataSource::WaveGrad;
    if (s == "training-a-synth") return DataSource::TrainingASynth;
    if (s == "training-b-synth") return DataSource::TrainingBSynth;
    throw ConfigError("unknown data source '" + s + "'");
}

void ScheduleStage::validate() const {
    if (epochs < 1) throw ConfigError("ScheduleStage: epochs must be at least 1");
    if (sources.empty()) throw ConfigError("ScheduleStage: no data sources");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        for (std::size_t j = i + 1; j < sources.size(); ++j) {
            if (sources[i].source == sources[j].source) {
                throw ConfigError("ScheduleStage: duplicate source '" +
                                  to_string(sources[i].source) + "'");
            }
        }
    }
}

std::vector<ScheduleStage> schedule_from_json(const json& j) {
    const json* stages_json = &j;
    if (j.is_object()) {
        if (!j.contains("stages")) throw ConfigError("schedule: object form needs a 'stages' key");
        stages_json = &j.at("stages");
    }
    if (!stages_json->is_array()) throw ConfigError("schedule: expected an array of stages");
    std::vector<ScheduleStage> stages;
    stages.reserve(stages_json->size());
    for (const json& js : *stages_json) {
        if (!js.is_object()) throw ConfigError("schedule: stage must be an object");
        ScheduleStage st;
        if (!js.contains("epochs") || !js.at("epochs").is_number_integer()) {
            throw ConfigError("schedule: stage needs an integer 'epochs'");
        }
        const long long e = js.at("epochs").get<long long>();
        if (e < 1) throw ConfigError("schedule: epochs must be at least 1");
        st.epochs = static_cast<std::size_t>(e);
        if (!js.contains("sources") || !js.at("sources").is_array()) {
            throw ConfigError("schedule: stage needs a 'sources' array");
        }
        for (const json& s : js.at("sources")) {
            if (!s.is_object() || !s.contains("source")) {
                throw ConfigError("schedule: source entry needs a 'source' name");
            }
            SourceSpec spec;
            spec.source = data_source_from_string(s.at("source").get<std::string>());
            const long long na = s.value("normal_augments", static_cast<long long>(0));
            const long long ab = s.value("abnormal_augments", static_cast<long long>(0));
            if (na < 0 || ab < 0) {
                throw ConfigError("schedule: augment counts must be non-negative");
            }
            spec.normal_augments = static_cast<std::size_t>(na);
            spec.abnormal_augments = static_cast<std::size_t>(ab);
            st.sources.push_back(spec);
        }
        st.validate();
        stages.push_back(std::move(st));
    }
    return stages;
}

json schedule_to_json(const std::vector<ScheduleStage>& stages) {
    json arr = json::array();
    for (const ScheduleStage& st : stages) {
        json sources = json::array();
        for (const SourceSpec& s : st.sources) {
            sources.push_back({{"source", to_string(s.source)},
                               {"normal_augments", s.normal_augments},
                               {"abnormal_augments", s.abnormal_augments}});
        }
        arr.push_back({{"epochs", st.epochs}, {"sources", std::move(sources)}});
    }
    return json{{"stages", std::move(arr)}};
}

std::vector<ScheduleStage> load_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schedule file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& err) {
        throw ConfigError("schedule file " + path + ": " + err.what());
    }
    return schedule_from_json(j);
}

OptimizerConfig optimizer_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("optimizer: expected an object");
    OptimizerConfig cfg;
    const std::string kind = j.value("kind", std::string("sgd_momentum"));
    if (kind == "sgd_momentum") {
        cfg.kind = OptimizerConfig::Kind::SgdMomentum;
    } else if (kind == "rmsprop") {
        cfg.kind = OptimizerConfig::Kind::RmsProp;
    } else {
        throw ConfigError("optimizer: unknown kind '" + kind + "'");
    }
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.smoothing = j.value("smoothing", cfg.smoothing);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    const long long bs = j.value("batch_size", static_cast<long long>(cfg.batch_size));
    if (bs < 1) throw ConfigError("optimizer: batch_size must be at least 1");
    cfg.batch_size = static_cast<std::size_t>(bs);
    cfg.validate();
    return cfg;
}

json optimizer_to_json(const OptimizerConfig& cfg) {
    json j{{"kind", cfg.kind == OptimizerConfig::Kind::RmsProp ? "rmsprop" : "sgd_momentum"},
           {"learning_rate", cfg.learning_rate},
           {"weight_decay", cfg.weight_decay},
           {"batch_size", cfg.batch_size}};
    if (cfg.kind == OptimizerConfig::Kind::RmsProp) {
        j["smoothing"] = cfg.smoothing;
        j["epsilon"] = cfg.epsilon;
    } else {
        j["momentum"] = cfg.momentum;
    }
    return j;
}

LRSchedule lr_schedule_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("lr_schedule: expected an object");
    LRSchedule sched;
    sched.gamma = j.value("gamma", sched.gamma);
    const long long step = j.value("step_size", static_cast<long long>(sched.step_size));
    if (step < 1) throw ConfigError("lr_schedule: step_size must be at least 1");
    sched.step_size = static_cast<std::size_t>(step);
    sched.validate();
    return sched;
}

json lr_schedule_to_json(const LRSchedule& sched) {
    return json{{"gamma", sched.gamma}, {"step_size", sched.step_size}};
}

json epoch_log_to_json(const EpochLog& e) {
    return json{{"stage", e.stage},
                {"epoch", e.epoch},
                {"lr", e.lr},
                {"train_loss", e.train_loss},
                {"val_metrics", e.val_metrics.is_null() ? json::object() : e.val_metrics}};
}

void write_train_log(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open training log for writing: " + path);
    for (const EpochLog& e : log) out << epoch_log_to_json(e).dump() << "\n";
    out.flush();
    if (!out) throw IoError("failed writing training log: " + path);
}

std::vector<PoolEntry> build_pool(const std::vector<MultiRecord>& records, DataSource source,
                                  const dsp::SegmentSpec& spec, std::size_t synthetic_cap) {
    std::vector<PoolEntry> pool;
    for (const MultiRecord& rec : records) {
        Flagged<std::vector<Fragment>> segs = dsp::segment(rec, spec);
        std::vector<Fragment>& frags = segs.value;
        std::size_t keep = frags.size();
        if (source != DataSource::Original && synthetic_cap > 0) {
            keep = std::min(keep, synthetic_cap);
        }
        for (std::size_t i = 0; i < keep; ++i) {
            PoolEntry entry;
            entry.fragment = std::move(frags[i]);
            entry.label = rec.label == Label::Abnormal ? 1 : 0;
            pool.push_back(std::move(entry));
        }
    }
    return pool;
}

std::vector<double> predict_probs(const model::Classifier& model,
                                  const std::vector<PoolEntry>& pool) {
    std::vector<double> probs;
    probs.reserve(pool.size());
    for (const PoolEntry& e : pool) {
        const model::ClassifierOutput out = model.forward(e.fragment.channels);
        probs.push_back(out.probs.at(1));
    }
    return probs;
}

namespace {

struct PoolEval {
    eval::MetricsReport fragment;
    eval::MetricsReport subject;
};

PoolEval eval_on(const model::Classifier& model, const std::vector<PoolEntry>& pool) {
    const std::vector<double> probs = predict_probs(model, pool);
    std::vector<int> labels, preds;
    labels.reserve(pool.size());
    preds.reserve(pool.size());
    std::map<std::string, eval::SubjectFragments> groups;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        labels.push_back(pool[i].label);
        preds.push_back(probs[i] >= 0.5 ? 1 : 0);
        eval::SubjectFragments& g = groups[pool[i].fragment.subject_id];
        g.label = pool[i].label;
        g.probs.push_back(probs[i]);
    }
    PoolEval out;
    out.fragment = eval::metrics(eval::confusion(labels, preds));
    out.fragment.level = "fragment";
    std::vector<int> slabels, spreds;
    for (const eval::SubjectPrediction& p : eval::aggregate_subject(groups)) {
        slabels.push_back(p.label);
        spreds.push_back(p.predicted);
    }
    out.subject = eval::metrics(eval::confusion(slabels, spreds));
    out.subject.level = "subject";
    return out;
}

json pool_eval_to_json(const PoolEval& pe) {
    return json{{"fragment", eval::metrics_to_json(pe.fragment)},
                {"subject", eval::metrics_to_json(pe.subject)}};
}

}  // namespace

nlohmann::json evaluate_pool(const model::Classifier& model, const std::vector<PoolEntry>& pool) {
    if (pool.empty()) return json::object();
    return pool_eval_to_json(eval_on(model, pool));
}

TrainLog run_schedule(model::Classifier& model, const std::vector<ScheduleStage>& stages,
                      const TrainDataset& data, const OptimizerConfig& ocfg,
                      const LRSchedule& lsched, const TrainOptions& opts) {
    ocfg.validate();
    lsched.validate();
    opts.segment.validate();
    opts.augment_cfg.validate();

    TrainLog log;
    if (stages.empty()) return log;
    for (const ScheduleStage& st : stages) {
        st.validate();
        for (const SourceSpec& src : st.sources) {
            if (data.sources.find(src.source) == data.sources.end()) {
                throw ConfigError("run_schedule: schedule references source '" +
                                  to_string(src.source) + "' with no data");
            }
        }
    }

    const std::vector<PoolEntry> val_pool =
        build_pool(data.validation, DataSource::Original, opts.segment, opts.synthetic_segment_cap);

    if (!opts.checkpoint_dir.empty()) std::filesystem::create_directories(opts.checkpoint_dir);

    OptState state;
    std::map<std::string, std::vector<double>> best_snap;
    double best_mcc = -2.0;
    std::size_t global_epoch = 0;

    for (std::size_t si = 0; si < stages.size(); ++si) {
        const ScheduleStage& stage = stages[si];

        std::vector<PoolEntry> pool;
        for (const SourceSpec& src : stage.sources) {
            const std::vector<MultiRecord>& records = data.sources.at(src.source);
            std::vector<PoolEntry> base =
                build_pool(records, src.source, opts.segment, opts.synthetic_segment_cap);
            pool.insert(pool.end(), std::make_move_iterator(base.begin()),
                        std::make_move_iterator(base.end()));
            if (src.normal_augments > 0 || src.abnormal_augments > 0) {
                augment::AugmentCounts counts;
                counts.normal = static_cast<int>(src.normal_augments);
                counts.abnormal = static_cast<int>(src.abnormal_augments);
                std::vector<augment::AugmentedRecord> copies = augment::make_augmented_dataset(
                    records, counts, opts.augment_cfg, opts.noise_bank,
                    derive_seed(opts.seed, "stage-aug:" + to_string(src.source), si));
                std::vector<MultiRecord> recs;
                recs.reserve(copies.size());
                for (augment::AugmentedRecord& c : copies) recs.push_back(std::move(c.rec));
                std::vector<PoolEntry> extra =
                    build_pool(recs, src.source, opts.segment, opts.synthetic_segment_cap);
                pool.insert(pool.end(), std::make_move_iterator(extra.begin()),
                            std::make_move_iterator(extra.end()));
            }
        }
        if (pool.empty()) {
            throw TrainingError("run_schedule: stage " + std::to_string(si) +
                                " produced no training fragments");
        }

        std::vector<int> pool_labels;
        pool_labels.reserve(pool.size());
        for (const PoolEntry& e : pool) pool_labels.push_back(e.label);
        const std::vector<double> weights =
            class_weights(pool_labels, model.config().head.n_classes);

        for (std::size_t e = 0; e < stage.epochs; ++e, ++global_epoch) {
            const double lr = lr_at(global_epoch, ocfg.learning_rate, lsched);
            Rng rng(derive_seed(opts.seed, "epoch", global_epoch));
            std::vector<std::size_t> order(pool.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            rng.shuffle(order);

            double loss_sum = 0.0;
            for (std::size_t b0 = 0; b0 < order.size(); b0 += ocfg.batch_size) {
                const std::size_t b1 = std::min(order.size(), b0 + ocfg.batch_size);
                std::vector<std::vector<std::vector<double>>> batch;
                std::vector<int> labels;
                batch.reserve(b1 - b0);
                labels.reserve(b1 - b0);
                for (std::size_t k = b0; k < b1; ++k) {
                    const PoolEntry& entry = pool[order[k]];
                    Fragment frag = augment::online_augment(entry.fragment, opts.augment_cfg, rng);
                    batch.push_back(std::move(frag.channels));
                    labels.push_back(entry.label);
                }
                const ts::Tensor logits = model.batch_logits(batch);
                const ts::Tensor loss = ts::cross_entropy(logits, labels, weights);
                if (!std::isfinite(loss->value.at(0))) {
                    throw TrainingError("run_schedule: non-finite training loss");
                }
                model.params().zero_grad();
                ts::backward(loss);
                if (ocfg.kind == OptimizerConfig::Kind::RmsProp) {
                    rmsprop_step(model.params(), state, ocfg, lr);
                } else {
                    sgd_step(model.params(), state, ocfg, lr);
                }
                loss_sum += loss->value.at(0) * static_cast<double>(b1 - b0);
            }

            EpochLog entry;
            entry.stage = si;
            entry.epoch = global_epoch;
            entry.lr = lr;
            entry.train_loss = loss_sum / static_cast<double>(pool.size());
            entry.val_metrics = json::object();
            if (!val_pool.empty()) {
                const PoolEval pe = eval_on(model, val_pool);
                entry.val_metrics = pool_eval_to_json(pe);
                if (pe.subject.mcc >= best_mcc) {
                    best_mcc = pe.subject.mcc;
                    best_snap = ts::snapshot(model.params());
                }
            }
            if (!opts.checkpoint_dir.empty()) {
                char name[32];
                std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", global_epoch);
                model.save(opts.checkpoint_dir / name,
                           json{{"stage", si}, {"epoch", global_epoch}});
            }
            log.push_back(std::move(entry));
        }
    }

    if (opts.restore_best && !best_snap.empty()) ts::restore(model.params(), best_snap);
    return log;
}

namespace {

std::vector<MultiRecord> take_channel(const std::vector<MultiRecord>& records, std::size_t i) {
    std::vector<MultiRecord> out;
    out.reserve(records.size());
    for (const MultiRecord& rec : records) {
        if (i >= rec.channels.size()) {
            throw ConfigError("pretrain_encoders: record " + rec.subject_id +
                              " lacks channel " + std::to_string(i));
        }
        MultiRecord one;
        one.subject_id = rec.subject_id;
        one.label = rec.label;
        one.source = rec.source;
        one.channels.push_back(rec.channels[i]);
        out.push_back(std::move(one));
    }
    return out;
}

}  // namespace

void pretrain_encoders(model::Classifier& assembled, const std::vector<ScheduleStage>& stages,
                       const TrainDataset& data, const OptimizerConfig& ocfg,
                       const LRSchedule& lsched, const TrainOptions& opts) {
    const std::size_t n = assembled.config().n_inputs;
    if (n < 2) throw ArgumentError("pretrain_encoders: model has a single input");
    if (stages.empty()) throw ConfigError("pretrain_encoders: empty schedule");

    const std::vector<ScheduleStage> first(stages.begin(), stages.begin() + 1);

    for (std::size_t i = 0; i < n; ++i) {
        TrainDataset single;
        for (const auto& [src, records] : data.sources) {
            single.sources[src] = take_channel(records, i);
        }
        single.validation = take_channel(data.validation, i);

        model::ClassifierConfig ccfg;
        ccfg.encoder = assembled.config().encoder;
        ccfg.head = assembled.config().head;
        ccfg.n_inputs = 1;
        ccfg.head.n_features_in = ccfg.encoder.transformer.d_model;
        model::Classifier single_model(ccfg, derive_seed(opts.seed, "pretrain-init", i));

        TrainOptions sub = opts;
        sub.seed = derive_seed(opts.seed, "pretrain-run", i);
        if (!opts.checkpoint_dir.empty()) {
            sub.checkpoint_dir = opts.checkpoint_dir / ("pretrain_enc" + std::to_string(i));
        }
        run_schedule(single_model, first, single, ocfg, lsched, sub);

        model::copy_prefixed_values(single_model.params(), "enc0", assembled.params(),
                                    "enc" + std::to_string(i));
    }
}

std::size_t select_best(const std::vector<double>& val_mcc) {
    if (val_mcc.empty()) throw ArgumentError("select_best: no checkpoints");
    std::size_t best = 0;
    for (std::size_t i = 1; i < val_mcc.size(); ++i) {
        if (val_mcc[i] >= val_mcc[best]) best = i;
    }
    return best;
}

void SearchSpace::validate() const {
    auto ordered = [](const std::array<double, 2>& r) { return r[0] <= r[1]; };
    if (!ordered(learning_rate) || learning_rate[0] <= 0.0) {
        throw ConfigError("SearchSpace: bad learning_rate range");
    }
    if (!ordered(weight_decay) || weight_decay[0] <= 0.0) {
        throw ConfigError("SearchSpace: bad weight_decay range");
    }
    if (!ordered(momentum) || momentum[0] < 0.0 || momentum[1] >= 1.0) {
        throw ConfigError("SearchSpace: bad momentum range");
    }
    if (!ordered(gamma) || gamma[0] <= 0.0 || gamma[1] > 1.0) {
        throw ConfigError("SearchSpace: bad gamma range");
    }
    if (step_sizes.empty() || batch_sizes.empty() || hidden_layers.empty() ||
        hidden_sizes.empty()) {
        throw ConfigError("SearchSpace: empty choice list");
    }
    for (std::size_t s : step_sizes) {
        if (s < 1) throw ConfigError("SearchSpace: step_size must be at least 1");
    }
    for (std::size_t b : batch_sizes) {
        if (b < 1) throw ConfigError("SearchSpace: batch_size must be at least 1");
    }
}

SearchResult random_search(const SearchSpace& space, std::size_t n_trials,
                           std::size_t runs_per_trial,
                           const std::function<double(const Trial&, std::size_t)>& objective,
                           std::uint64_t seed) {
    if (n_trials == 0) throw ArgumentError("random_search: n_trials must be positive");
    if (runs_per_trial == 0) throw ArgumentError("random_search: runs_per_trial must be positive");
    if (!objective) throw ArgumentError("random_search: no objective");
    space.validate();

    Rng rng(seed);
    SearchResult result;
    result.trials.reserve(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t) {
        Trial trial;
        trial.optimizer.learning_rate = rng.log_uniform(space.learning_rate[0],
                                                        space.learning_rate[1]);
        trial.optimizer.weight_decay = rng.log_uniform(space.weight_decay[0],
                                                       space.weight_decay[1]);
        trial.optimizer.momentum = rng.uniform(space.momentum[0], space.momentum[1]);
        trial.optimizer.batch_size = space.batch_sizes[rng.below(space.batch_sizes.size())];
        trial.lr_schedule.gamma = rng.uniform(space.gamma[0], space.gamma[1]);
        trial.lr_schedule.step_size = space.step_sizes[rng.below(space.step_sizes.size())];
        trial.hidden_layers = space.hidden_layers[rng.below(space.hidden_layers.size())];
        trial.hidden_size = space.hidden_sizes[rng.below(space.hidden_sizes.size())];

        double sum = 0.0;
        for (std::size_t r = 0; r < runs_per_trial; ++r) sum += objective(trial, r);
        trial.objective = sum / static_cast<double>(runs_per_trial);

        if (result.trials.empty() || trial.objective > result.best.objective) {
            result.best = trial;
            result.best_index = t;
        }
        result.trials.push_back(trial);
    }
    return result;
}

}  // namespace cardioforge::train
