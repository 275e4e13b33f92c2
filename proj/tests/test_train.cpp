#include "cardioforge/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

using namespace cardioforge;
namespace ts = tensor;
using nlohmann::json;
using train::DataSource;
using train::LRSchedule;
using train::OptimizerConfig;
using train::OptState;

namespace {

ts::Tensor add_param(ts::ParamStore& store, const std::string& name, std::vector<double> values) {
    const std::vector<std::size_t> shape{values.size()};
    return store.add_value(name, shape, std::move(values));
}

void set_grad(const ts::Tensor& t, const std::vector<double>& g) {
    REQUIRE(t->grad.size() == g.size());
    t->grad = g;
}

OptimizerConfig sgd_cfg(double lr, double momentum = 0.0, double wd = 0.0) {
    OptimizerConfig cfg;
    cfg.kind = OptimizerConfig::Kind::SgdMomentum;
    cfg.learning_rate = lr;
    cfg.momentum = momentum;
    cfg.weight_decay = wd;
    return cfg;
}

OptimizerConfig rms_cfg(double lr, double smoothing = 0.99, double wd = 0.0) {
    OptimizerConfig cfg;
    cfg.kind = OptimizerConfig::Kind::RmsProp;
    cfg.learning_rate = lr;
    cfg.smoothing = smoothing;
    cfg.weight_decay = wd;
    return cfg;
}

// Toy corpus: normal subjects carry a quiet 5 Hz tone, abnormal subjects a
// strong 20 Hz tone, plus a little per-subject noise so records differ.
MultiRecord toy_record(const std::string& id, Label label, double fs = 100.0,
                       double duration_s = 0.6, std::size_t n_channels = 1) {
    MultiRecord rec;
    rec.subject_id = id;
    rec.label = label;
    Rng rng(derive_seed(9000, id, 0));
    for (std::size_t c = 0; c < n_channels; ++c) {
        Recording ch;
        if (c == 0) {
            const double freq = label == Label::Abnormal ? 20.0 : 5.0;
            const double amp = label == Label::Abnormal ? 0.9 : 0.3;
            ch = cftest::make_sine(freq, fs, duration_s, amp);
        } else {
            ch = cftest::make_sine(8.0, fs, duration_s, 0.5);
        }
        for (double& v : ch.samples) v += 0.02 * rng.normal();
        rec.channels.push_back(std::move(ch));
    }
    return rec;
}

std::vector<MultiRecord> toy_corpus(std::size_t n_normal, std::size_t n_abnormal,
                                    const std::string& tag, std::size_t n_channels = 1) {
    std::vector<MultiRecord> out;
    for (std::size_t i = 0; i < n_normal; ++i) {
        out.push_back(toy_record(tag + "_n" + std::to_string(i), Label::Normal, 100.0, 0.6,
                                 n_channels));
    }
    for (std::size_t i = 0; i < n_abnormal; ++i) {
        out.push_back(toy_record(tag + "_a" + std::to_string(i), Label::Abnormal, 100.0, 0.6,
                                 n_channels));
    }
    return out;
}

model::ClassifierConfig tiny_classifier_config(std::size_t n_inputs = 1) {
    model::ClassifierConfig cfg;
    cfg.encoder.conv_blocks = {{6, 6, 3}, {6, 4, 2}};
    cfg.encoder.transformer = {1, 16, 32, 2};
    cfg.head.n_hidden_layers = 1;
    cfg.head.hidden_size = 8;
    cfg.head.n_classes = 2;
    cfg.n_inputs = n_inputs;
    cfg.head.n_features_in = n_inputs * cfg.encoder.transformer.d_model;
    return cfg;
}

train::TrainOptions toy_options(std::uint64_t seed) {
    train::TrainOptions opts;
    opts.segment = dsp::SegmentSpec{0.4, 0.1, 0.1};
    opts.augment_cfg = augment::AugmentConfig{};
    // The toy corpus runs at fs 100; keep EQ centers below Nyquist.
    opts.augment_cfg.eq_center_hz_pcg = {5.0, 40.0};
    opts.augment_cfg.eq_center_hz_ecg = {1.0, 20.0};
    opts.noise_bank = augment::NoiseBank::synthetic_standin(100.0, 1.0, 77);
    opts.seed = seed;
    return opts;
}

std::vector<train::ScheduleStage> single_stage(std::size_t epochs, std::size_t normal = 0,
                                               std::size_t abnormal = 0) {
    train::SourceSpec src;
    src.source = DataSource::Original;
    src.normal_augments = normal;
    src.abnormal_augments = abnormal;
    train::ScheduleStage st;
    st.sources = {src};
    st.epochs = epochs;
    return {st};
}

double val_subject_mcc(const train::EpochLog& e) {
    return e.val_metrics.at("subject").at("metrics").at("mcc").get<double>();
}

}  // namespace

TEST_CASE("config validation rejects out-of-range values") {
    CHECK_THROWS_AS(sgd_cfg(0.0).validate(), ArgumentError);
    CHECK_THROWS_AS(sgd_cfg(-0.1).validate(), ArgumentError);
    CHECK_THROWS_AS(sgd_cfg(0.1, 1.0).validate(), ArgumentError);
    CHECK_THROWS_AS(sgd_cfg(0.1, -0.1).validate(), ArgumentError);
    CHECK_THROWS_AS(sgd_cfg(0.1, 0.0, -1.0).validate(), ArgumentError);
    {
        OptimizerConfig cfg = sgd_cfg(0.1);
        cfg.batch_size = 0;
        CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    }
    {
        OptimizerConfig cfg = rms_cfg(0.1);
        cfg.smoothing = 1.0;
        CHECK_THROWS_AS(cfg.validate(), ArgumentError);
        cfg.smoothing = 0.99;
        cfg.epsilon = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    }
    CHECK_NOTHROW(sgd_cfg(0.1, 0.9, 1e-5).validate());

    CHECK_THROWS_AS((LRSchedule{0.0, 1}).validate(), ArgumentError);
    CHECK_THROWS_AS((LRSchedule{1.5, 1}).validate(), ArgumentError);
    CHECK_THROWS_AS((LRSchedule{0.5, 0}).validate(), ArgumentError);
    CHECK_NOTHROW((LRSchedule{1.0, 1}).validate());
}

TEST_CASE("sgd_step matches the published oracles") {
    SUBCASE("plain step") {
        ts::ParamStore store;
        ts::Tensor w = add_param(store, "w", {1.0});
        set_grad(w, {0.5});
        OptState state;
        train::sgd_step(store, state, sgd_cfg(0.1), 0.1);
        CHECK(w->value[0] == doctest::Approx(0.95).epsilon(1e-15));
    }
    SUBCASE("momentum recurrence") {
        ts::ParamStore store;
        ts::Tensor w = add_param(store, "w", {0.0});
        OptState state;
        const OptimizerConfig cfg = sgd_cfg(0.1, 0.9);
        set_grad(w, {1.0});
        train::sgd_step(store, state, cfg, 0.1);
        CHECK(w->value[0] == doctest::Approx(-0.1).epsilon(1e-15));
        set_grad(w, {1.0});
        train::sgd_step(store, state, cfg, 0.1);
        CHECK(state.slots.at("w")[0] == doctest::Approx(1.9).epsilon(1e-15));
        CHECK(w->value[0] == doctest::Approx(-0.29).epsilon(1e-15));
    }
    SUBCASE("decay only") {
        ts::ParamStore store;
        ts::Tensor w = add_param(store, "w", {1.0});
        OptState state;
        train::sgd_step(store, state, sgd_cfg(0.1, 0.0, 0.1), 0.1);
        CHECK(w->value[0] == doctest::Approx(0.99).epsilon(1e-15));
    }
    SUBCASE("non-finite gradient is fatal") {
        ts::ParamStore store;
        ts::Tensor w = add_param(store, "w", {1.0});
        set_grad(w, {std::nan("")});
        OptState state;
        CHECK_THROWS_AS(train::sgd_step(store, state, sgd_cfg(0.1), 0.1), TrainingError);
    }
    SUBCASE("frozen parameters stay put") {
        ts::ParamStore store;
        ts::Tensor w = add_param(store, "w", {1.0});
        w->trainable = false;
        set_grad(w, {5.0});
        OptState state;
        train::sgd_step(store, state, sgd_cfg(0.1), 0.1);
        CHECK(w->value[0] == 1.0);
    }
}

TEST_CASE("sgd_step tracks an independent recurrence over many steps") {
    ts::ParamStore store;
    Rng rng(1234);
    std::vector<double> init(8);
    for (double& v : init) v = rng.uniform(-1.0, 1.0);
    ts::Tensor w = add_param(store, "w", init);

    const OptimizerConfig cfg = sgd_cfg(0.05, 0.8, 0.01);
    OptState state;
    std::vector<double> expect_w = init;
    std::vector<double> expect_v(8, 0.0);
    for (int step = 0; step < 20; ++step) {
        std::vector<double> g(8);
        for (double& v : g) v = rng.uniform(-2.0, 2.0);
        set_grad(w, g);
        for (std::size_t i = 0; i < 8; ++i) {
            const double ge = g[i] + cfg.weight_decay * expect_w[i];
            expect_v[i] = cfg.momentum * expect_v[i] + ge;
            expect_w[i] -= cfg.learning_rate * expect_v[i];
        }
        train::sgd_step(store, state, cfg, cfg.learning_rate);
        for (std::size_t i = 0; i < 8; ++i) CHECK(w->value[i] == expect_w[i]);
    }
}

TEST_CASE("rmsprop_step matches the closed-form first step and an independent recurrence") {
    SUBCASE("first step") {
        ts::ParamStore store;
        ts::Tensor w = add_param(store, "w", {0.0});
        set_grad(w, {1.0});
        OptState state;
        train::rmsprop_step(store, state, rms_cfg(0.01), 0.01);
        CHECK(state.slots.at("w")[0] == doctest::Approx(0.01).epsilon(1e-13));
        CHECK(w->value[0] == doctest::Approx(-0.01 / (0.1 + 1e-8)).epsilon(1e-13));
        CHECK(w->value[0] == doctest::Approx(-0.09999).epsilon(1e-4));
    }
    SUBCASE("zero gradients leave parameters unchanged") {
        ts::ParamStore store;
        ts::Tensor w = add_param(store, "w", {0.7, -0.4});
        OptState state;
        for (int i = 0; i < 5; ++i) {
            set_grad(w, {0.0, 0.0});
            train::rmsprop_step(store, state, rms_cfg(0.01), 0.01);
        }
        CHECK(w->value[0] == 0.7);
        CHECK(w->value[1] == -0.4);
    }
    SUBCASE("non-finite gradient is fatal") {
        ts::ParamStore store;
        ts::Tensor w = add_param(store, "w", {1.0});
        set_grad(w, {std::numeric_limits<double>::infinity()});
        OptState state;
        CHECK_THROWS_AS(train::rmsprop_step(store, state, rms_cfg(0.01), 0.01), TrainingError);
    }
    SUBCASE("independent recurrence with weight decay") {
        ts::ParamStore store;
        Rng rng(99);
        std::vector<double> init(6);
        for (double& v : init) v = rng.uniform(-1.0, 1.0);
        ts::Tensor w = add_param(store, "w", init);
        const OptimizerConfig cfg = rms_cfg(0.02, 0.9, 0.05);
        OptState state;
        std::vector<double> expect_w = init;
        std::vector<double> expect_s(6, 0.0);
        for (int step = 0; step < 20; ++step) {
            std::vector<double> g(6);
            for (double& v : g) v = rng.uniform(-2.0, 2.0);
            set_grad(w, g);
            for (std::size_t i = 0; i < 6; ++i) {
                const double ge = g[i] + cfg.weight_decay * expect_w[i];
                expect_s[i] = cfg.smoothing * expect_s[i] + (1.0 - cfg.smoothing) * ge * ge;
                expect_w[i] -= cfg.learning_rate * ge / (std::sqrt(expect_s[i]) + cfg.epsilon);
            }
            train::rmsprop_step(store, state, cfg, cfg.learning_rate);
            for (std::size_t i = 0; i < 6; ++i) CHECK(w->value[i] == expect_w[i]);
        }
    }
    SUBCASE("identical setups give identical trajectories") {
        auto run = [] {
            ts::ParamStore store;
            ts::Tensor w = add_param(store, "w", {0.3, -0.2, 0.9});
            OptState state;
            Rng rng(5);
            for (int i = 0; i < 10; ++i) {
                set_grad(w, {rng.normal(), rng.normal(), rng.normal()});
                train::rmsprop_step(store, state, rms_cfg(0.01), 0.01);
            }
            return w->value;
        };
        CHECK(run() == run());
    }
}

TEST_CASE("lr_at follows the step-decay closed form") {
    const LRSchedule table{0.1, 3};
    CHECK(train::lr_at(3, 0.001, table) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(train::lr_at(0, 0.001, table) == 0.001);
    CHECK(train::lr_at(2, 0.001, table) == 0.001);

    const LRSchedule flat{1.0, 4};
    for (std::size_t e = 0; e < 20; ++e) CHECK(train::lr_at(e, 0.37, flat) == 0.37);

    for (double gamma : {1.0, 0.5, 0.1}) {
        for (std::size_t step : {std::size_t{1}, std::size_t{2}, std::size_t{3}, std::size_t{5}}) {
            const LRSchedule sched{gamma, step};
            for (std::size_t epoch = 0; epoch <= 30; ++epoch) {
                double expect = 0.01;
                for (std::size_t k = 0; k < epoch / step; ++k) expect *= gamma;
                CHECK(train::lr_at(epoch, 0.01, sched) ==
                      doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("class_weights are inversely proportional to class frequency") {
    const std::vector<double> w = train::class_weights({0, 0, 0, 1}, 2);
    CHECK(w[0] == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(2.0).epsilon(1e-15));
    // Weighted sample mean is 1 when every class occurs.
    CHECK(3.0 * w[0] + 1.0 * w[1] == doctest::Approx(4.0).epsilon(1e-12));

    const std::vector<double> balanced = train::class_weights({0, 1, 0, 1}, 2);
    CHECK(balanced[0] == 1.0);
    CHECK(balanced[1] == 1.0);

    CHECK_THROWS_AS(train::class_weights({}, 2), ArgumentError);
    CHECK_THROWS_AS(train::class_weights({0, 2}, 2), ArgumentError);
    CHECK_THROWS_AS(train::class_weights({-1}, 2), ArgumentError);
}

TEST_CASE("data source names round trip") {
    const std::vector<DataSource> all = {DataSource::Original, DataSource::DiffWave,
                                         DataSource::WaveGrad, DataSource::TrainingASynth,
                                         DataSource::TrainingBSynth};
    for (DataSource s : all) CHECK(train::data_source_from_string(train::to_string(s)) == s);
    CHECK(train::to_string(DataSource::TrainingASynth) == "training-a-synth");
    CHECK_THROWS_AS(train::data_source_from_string("Original"), ConfigError);
    CHECK_THROWS_AS(train::data_source_from_string("cgan"), ConfigError);
}

TEST_CASE("staged schedule config files parse to the published shapes") {
    SUBCASE("six-stage schedule") {
        const auto stages = train::load_schedule(std::string(CF_SOURCE_DIR) +
                                                 "/configs/schedule_staged.json");
        REQUIRE(stages.size() == 6);
        std::size_t total = 0;
        for (const auto& st : stages) total += st.epochs;
        CHECK(total == 26);

        CHECK(stages[0].sources.size() == 1);
        CHECK(stages[0].sources[0].source == DataSource::Original);
        CHECK(stages[0].sources[0].normal_augments == 60);
        CHECK(stages[0].sources[0].abnormal_augments == 30);
        CHECK(stages[0].epochs == 10);

        CHECK(stages[1].sources[0].source == DataSource::DiffWave);
        CHECK(stages[1].sources[0].normal_augments == 30);
        CHECK(stages[1].sources[0].abnormal_augments == 5);

        REQUIRE(stages[3].sources.size() == 3);
        CHECK(stages[3].sources[0].source == DataSource::Original);
        CHECK(stages[3].sources[0].normal_augments == 30);
        CHECK(stages[3].sources[0].abnormal_augments == 30);
        CHECK(stages[3].sources[1].source == DataSource::DiffWave);
        CHECK(stages[3].sources[1].normal_augments == 5);
        CHECK(stages[3].sources[2].source == DataSource::WaveGrad);
        CHECK(stages[3].sources[2].abnormal_augments == 5);

        CHECK(stages[4].sources[0].source == DataSource::WaveGrad);
        CHECK(stages[5].sources[0].source == DataSource::Original);
        CHECK(stages[5].epochs == 2);

        const auto round = train::schedule_from_json(train::schedule_to_json(stages));
        REQUIRE(round.size() == stages.size());
        for (std::size_t i = 0; i < stages.size(); ++i) {
            CHECK(round[i].epochs == stages[i].epochs);
            REQUIRE(round[i].sources.size() == stages[i].sources.size());
            for (std::size_t k = 0; k < stages[i].sources.size(); ++k) {
                CHECK(round[i].sources[k].source == stages[i].sources[k].source);
                CHECK(round[i].sources[k].normal_augments == stages[i].sources[k].normal_augments);
                CHECK(round[i].sources[k].abnormal_augments ==
                      stages[i].sources[k].abnormal_augments);
            }
        }
    }
    SUBCASE("two-stage multichannel schedule") {
        const auto stages = train::load_schedule(std::string(CF_SOURCE_DIR) +
                                                 "/configs/schedule_multichannel.json");
        REQUIRE(stages.size() == 2);
        CHECK(stages[0].epochs + stages[1].epochs == 12);
        REQUIRE(stages[1].sources.size() == 3);
        CHECK(stages[1].sources[0].normal_augments == 20);
        CHECK(stages[1].sources[0].abnormal_augments == 10);
        CHECK(stages[1].sources[1].source == DataSource::TrainingASynth);
        CHECK(stages[1].sources[1].normal_augments == 4);
        CHECK(stages[1].sources[1].abnormal_augments == 2);
        CHECK(stages[1].sources[2].source == DataSource::TrainingBSynth);
        CHECK(stages[1].sources[2].normal_augments == 4);
        CHECK(stages[1].sources[2].abnormal_augments == 2);
    }
    SUBCASE("rejects malformed schedules") {
        CHECK_THROWS_AS(train::schedule_from_json(json::parse("{}")), ConfigError);
        CHECK_THROWS_AS(train::schedule_from_json(json::parse("3")), ConfigError);
        CHECK_THROWS_AS(train::schedule_from_json(json::parse(
                            R"([{"epochs": 0, "sources": [{"source": "original"}]}])")),
                        ConfigError);
        CHECK_THROWS_AS(train::schedule_from_json(json::parse(
                            R"([{"epochs": 1, "sources": []}])")),
                        ConfigError);
        CHECK_THROWS_AS(train::schedule_from_json(json::parse(
                            R"([{"epochs": 1, "sources": [{"source": "nope"}]}])")),
                        ConfigError);
        CHECK_THROWS_AS(
            train::schedule_from_json(json::parse(
                R"([{"epochs": 1, "sources": [{"source": "original", "normal_augments": -1}]}])")),
            ConfigError);
        CHECK_THROWS_AS(
            train::schedule_from_json(json::parse(
                R"([{"epochs": 1, "sources": [{"source": "original"}, {"source": "original"}]}])")),
            ConfigError);
        CHECK_THROWS_AS(train::load_schedule("/nonexistent/schedule.json"), IoError);
    }
}

TEST_CASE("hyperparameter preset files load and validate") {
    struct Expect {
        std::string name;
        bool rmsprop;
        double lr, wd, gamma;
        std::size_t step, batch, layers, hidden;
    };
    const std::vector<Expect> presets = {
        {"hparams_single_baseline.json", false, 0.001, 1e-5, 0.1, 3, 64, 1, 512},
        {"hparams_single_augmented.json", false, 0.001, 4.11e-5, 0.167, 2, 32, 3, 512},
        {"hparams_multimodal_baseline.json", false, 0.001, 1e-5, 0.1, 3, 64, 3, 512},
        {"hparams_multimodal_augmented.json", false, 0.001, 3.11e-5, 0.002444, 7, 64, 3, 1024},
        {"hparams_multichannel_baseline.json", true, 0.001, 1e-5, 0.1, 3, 64, 1, 512},
        {"hparams_multichannel_augmented.json", true, 1e-5, 6.1148e-5, 0.02444, 4, 32, 3, 512},
    };
    for (const Expect& p : presets) {
        CAPTURE(p.name);
        std::ifstream in(std::string(CF_SOURCE_DIR) + "/configs/" + p.name);
        REQUIRE(in.good());
        const json doc = json::parse(in);
        const OptimizerConfig ocfg = train::optimizer_from_json(doc.at("optimizer"));
        const LRSchedule sched = train::lr_schedule_from_json(doc.at("lr_schedule"));
        CHECK((ocfg.kind == OptimizerConfig::Kind::RmsProp) == p.rmsprop);
        CHECK(ocfg.learning_rate == doctest::Approx(p.lr).epsilon(1e-12));
        CHECK(ocfg.weight_decay == doctest::Approx(p.wd).epsilon(1e-12));
        CHECK(ocfg.batch_size == p.batch);
        CHECK(sched.gamma == doctest::Approx(p.gamma).epsilon(1e-12));
        CHECK(sched.step_size == p.step);
        CHECK(doc.at("head").at("hidden_layers").get<std::size_t>() == p.layers);
        CHECK(doc.at("head").at("hidden_size").get<std::size_t>() == p.hidden);
        if (p.rmsprop) {
            CHECK(ocfg.smoothing == doctest::Approx(0.99));
            CHECK(ocfg.epsilon == doctest::Approx(1e-8));
        }

        const OptimizerConfig round = train::optimizer_from_json(train::optimizer_to_json(ocfg));
        CHECK(round.kind == ocfg.kind);
        CHECK(round.learning_rate == ocfg.learning_rate);
        CHECK(round.weight_decay == ocfg.weight_decay);
        CHECK(round.batch_size == ocfg.batch_size);
        const LRSchedule round_s = train::lr_schedule_from_json(train::lr_schedule_to_json(sched));
        CHECK(round_s.gamma == sched.gamma);
        CHECK(round_s.step_size == sched.step_size);
    }
    CHECK_THROWS_AS(train::optimizer_from_json(json::parse(R"({"kind": "adam"})")), ConfigError);
    CHECK_THROWS_AS(train::optimizer_from_json(json::parse(R"({"batch_size": 0})")), ConfigError);
    CHECK_THROWS_AS(train::lr_schedule_from_json(json::parse(R"({"step_size": 0})")), ConfigError);
}

TEST_CASE("build_pool caps fragments for synthetic sources only") {
    std::vector<MultiRecord> records;
    records.push_back(toy_record("long_n0", Label::Normal, 100.0, 2.0));
    records.push_back(toy_record("long_a0", Label::Abnormal, 100.0, 2.0));
    const dsp::SegmentSpec spec{0.4, 0.1, 0.1};
    REQUIRE(dsp::segment_count(2.0, spec) == 6);

    const auto original = train::build_pool(records, DataSource::Original, spec, 2);
    CHECK(original.size() == 12);
    const auto synth = train::build_pool(records, DataSource::DiffWave, spec, 2);
    CHECK(synth.size() == 4);
    const auto uncapped = train::build_pool(records, DataSource::DiffWave, spec, 0);
    CHECK(uncapped.size() == 12);

    for (const auto& e : synth) {
        CHECK(e.fragment.length() == 40);
        CHECK((e.label == 0 || e.label == 1));
    }
    // Too-short records contribute nothing rather than failing.
    std::vector<MultiRecord> short_recs = {toy_record("short", Label::Normal, 100.0, 0.3)};
    CHECK(train::build_pool(short_recs, DataSource::Original, spec, 2).empty());
}

TEST_CASE("run_schedule learns a separable toy corpus end to end") {
    train::TrainDataset data;
    data.sources[DataSource::Original] = toy_corpus(10, 10, "tr");
    data.validation = toy_corpus(3, 3, "va");

    model::Classifier clf(tiny_classifier_config(), 42);
    const train::TrainOptions opts = toy_options(7);

    OptimizerConfig ocfg = sgd_cfg(0.05, 0.9, 0.0);
    ocfg.batch_size = 8;
    const LRSchedule lsched{0.5, 20};

    const train::TrainLog log =
        train::run_schedule(clf, single_stage(50), data, ocfg, lsched, opts);
    REQUIRE(log.size() == 50);

    for (std::size_t i = 0; i < log.size(); ++i) {
        CHECK(log[i].stage == 0);
        CHECK(log[i].epoch == i);
        CHECK(log[i].lr == doctest::Approx(train::lr_at(i, 0.05, lsched)).epsilon(1e-12));
    }
    CHECK(log[19].lr == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(log[20].lr == doctest::Approx(0.025).epsilon(1e-12));

    CHECK(log.back().train_loss <= 0.5 * log.front().train_loss);

    // 100% training accuracy on the un-augmented pool.
    const auto pool = train::build_pool(data.sources[DataSource::Original], DataSource::Original,
                                        opts.segment, opts.synthetic_segment_cap);
    REQUIRE(pool.size() == 20);
    const std::vector<double> probs = train::predict_probs(clf, pool);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        CHECK((probs[i] >= 0.5 ? 1 : 0) == pool[i].label);
    }

    // Validation metrics cover exactly the validation set at both levels.
    const json& vm = log.back().val_metrics;
    REQUIRE(vm.contains("fragment"));
    REQUIRE(vm.contains("subject"));
    const json& counts = vm.at("fragment").at("counts");
    const std::size_t total = counts.at("tp").get<std::size_t>() +
                              counts.at("tn").get<std::size_t>() +
                              counts.at("fp").get<std::size_t>() +
                              counts.at("fn").get<std::size_t>();
    CHECK(total == 6);
    CHECK(val_subject_mcc(log.back()) == doctest::Approx(1.0));
}

TEST_CASE("run_schedule is deterministic and honors edge contracts") {
    train::TrainDataset data;
    data.sources[DataSource::Original] = toy_corpus(4, 4, "tr");
    data.validation = toy_corpus(2, 2, "va");

    OptimizerConfig ocfg = sgd_cfg(0.05, 0.9);
    ocfg.batch_size = 4;
    const LRSchedule lsched{1.0, 1};

    SUBCASE("bit-identical repeat runs") {
        auto run = [&] {
            model::Classifier clf(tiny_classifier_config(), 42);
            const train::TrainLog log =
                train::run_schedule(clf, single_stage(3, 2, 2), data, ocfg, lsched,
                                    toy_options(7));
            json dumped = json::array();
            for (const auto& e : log) dumped.push_back(train::epoch_log_to_json(e));
            return std::make_pair(ts::snapshot(clf.params()), dumped.dump());
        };
        const auto a = run();
        const auto b = run();
        CHECK(a.first == b.first);
        CHECK(a.second == b.second);
    }
    SUBCASE("different seeds move the parameters differently") {
        auto run = [&](std::uint64_t seed) {
            model::Classifier clf(tiny_classifier_config(), 42);
            train::run_schedule(clf, single_stage(2, 1, 1), data, ocfg, lsched,
                                toy_options(seed));
            return ts::snapshot(clf.params());
        };
        CHECK(run(7) != run(8));
    }
    SUBCASE("empty stage list leaves the model untouched") {
        model::Classifier clf(tiny_classifier_config(), 42);
        const auto before = ts::snapshot(clf.params());
        const train::TrainLog log =
            train::run_schedule(clf, {}, data, ocfg, lsched, toy_options(7));
        CHECK(log.empty());
        CHECK(ts::snapshot(clf.params()) == before);
    }
    SUBCASE("missing source is a config error") {
        model::Classifier clf(tiny_classifier_config(), 42);
        train::SourceSpec src;
        src.source = DataSource::DiffWave;
        train::ScheduleStage st;
        st.sources = {src};
        st.epochs = 1;
        CHECK_THROWS_AS(train::run_schedule(clf, {st}, data, ocfg, lsched, toy_options(7)),
                        ConfigError);
    }
    SUBCASE("mixed-source stages concatenate every pool") {
        train::TrainDataset mixed = data;
        mixed.sources[DataSource::DiffWave] = toy_corpus(2, 2, "dw");
        model::Classifier clf(tiny_classifier_config(), 42);
        train::SourceSpec a, b;
        a.source = DataSource::Original;
        b.source = DataSource::DiffWave;
        train::ScheduleStage st;
        st.sources = {a, b};
        st.epochs = 1;
        const train::TrainLog log =
            train::run_schedule(clf, {st}, mixed, ocfg, lsched, toy_options(7));
        REQUIRE(log.size() == 1);
        CHECK(std::isfinite(log[0].train_loss));
    }
}

TEST_CASE("per-epoch checkpoints round trip and restore_best picks the MCC argmax") {
    cftest::TempDir tmp("train_ck");
    train::TrainDataset data;
    data.sources[DataSource::Original] = toy_corpus(6, 6, "tr");
    data.validation = toy_corpus(3, 3, "va");

    model::Classifier clf(tiny_classifier_config(), 42);
    train::TrainOptions opts = toy_options(7);
    opts.checkpoint_dir = tmp.path / "ckpts";

    OptimizerConfig ocfg = sgd_cfg(0.05, 0.9);
    ocfg.batch_size = 4;
    const train::TrainLog log =
        train::run_schedule(clf, single_stage(5), data, ocfg, LRSchedule{1.0, 1}, opts);
    REQUIRE(log.size() == 5);

    std::vector<double> mccs;
    for (const auto& e : log) {
        const std::string name = "epoch_00" + std::to_string(e.epoch) + ".ckpt";
        CHECK(std::filesystem::exists(opts.checkpoint_dir / name));
        mccs.push_back(val_subject_mcc(e));
    }

    const std::size_t best = train::select_best(mccs);
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", best);
    const auto loaded = model::Classifier::load(opts.checkpoint_dir / name);
    REQUIRE(loaded != nullptr);

    // restore_best leaves the model at exactly the best epoch's parameters.
    const auto final_snap = ts::snapshot(clf.params());
    const auto best_snap = ts::snapshot(loaded->params());
    CHECK(final_snap == best_snap);
}

TEST_CASE("select_best picks the argmax with later-epoch tie break") {
    CHECK(train::select_best({0.1, 0.5, 0.3}) == 1);
    CHECK(train::select_best({0.5, 0.5}) == 1);
    CHECK(train::select_best({0.7}) == 0);
    CHECK(train::select_best({0.3, 0.1, 0.3}) == 2);
    CHECK_THROWS_AS(train::select_best({}), ArgumentError);
}

TEST_CASE("pretrain_encoders trains each input on stage one and copies it in") {
    train::TrainDataset data;
    data.sources[DataSource::Original] = toy_corpus(4, 4, "tr", 2);
    data.validation = toy_corpus(2, 2, "va", 2);

    OptimizerConfig ocfg = sgd_cfg(0.05, 0.9);
    ocfg.batch_size = 4;
    const LRSchedule lsched{1.0, 1};
    const auto stages = single_stage(2);

    auto run = [&] {
        model::Classifier assembled(tiny_classifier_config(2), 42);
        train::pretrain_encoders(assembled, stages, data, ocfg, lsched, toy_options(7));
        return ts::snapshot(assembled.params());
    };

    model::Classifier reference(tiny_classifier_config(2), 42);
    const auto before = ts::snapshot(reference.params());
    const auto after = run();

    bool enc0_changed = false, enc1_changed = false;
    for (const auto& [name, values] : after) {
        if (name.rfind("enc0.", 0) == 0 && values != before.at(name)) enc0_changed = true;
        if (name.rfind("enc1.", 0) == 0 && values != before.at(name)) enc1_changed = true;
        if (name.rfind("enc", 0) != 0) CHECK(values == before.at(name));
    }
    CHECK(enc0_changed);
    CHECK(enc1_changed);

    CHECK(run() == after);

    model::Classifier single(tiny_classifier_config(1), 42);
    CHECK_THROWS_AS(train::pretrain_encoders(single, stages, data, ocfg, lsched, toy_options(7)),
                    ArgumentError);
    model::Classifier fresh(tiny_classifier_config(2), 42);
    CHECK_THROWS_AS(train::pretrain_encoders(fresh, {}, data, ocfg, lsched, toy_options(7)),
                    ConfigError);
}

TEST_CASE("random_search samples within bounds and finds a planted optimum") {
    train::SearchSpace space;
    space.learning_rate = {1e-4, 1e-1};
    space.weight_decay = {1e-6, 1e-3};

    SUBCASE("argument checks") {
        auto noop = [](const train::Trial&, std::size_t) { return 0.0; };
        CHECK_THROWS_AS(train::random_search(space, 0, 1, noop, 1), ArgumentError);
        CHECK_THROWS_AS(train::random_search(space, 1, 0, noop, 1), ArgumentError);
        train::SearchSpace bad = space;
        bad.step_sizes.clear();
        CHECK_THROWS_AS(train::random_search(bad, 1, 1, noop, 1), ConfigError);
        train::SearchSpace inverted = space;
        inverted.learning_rate = {1e-1, 1e-4};
        CHECK_THROWS_AS(train::random_search(inverted, 1, 1, noop, 1), ConfigError);
    }
    SUBCASE("constant objective keeps the first trial") {
        const auto res = train::random_search(
            space, 10, 2, [](const train::Trial&, std::size_t) { return 0.5; }, 3);
        CHECK(res.best_index == 0);
        CHECK(res.trials.size() == 10);
        CHECK(res.best.objective == 0.5);
    }
    SUBCASE("objective is the mean over runs") {
        const auto res = train::random_search(
            space, 3, 4,
            [](const train::Trial&, std::size_t run) { return static_cast<double>(run); }, 3);
        for (const auto& t : res.trials) CHECK(t.objective == doctest::Approx(1.5));
    }
    SUBCASE("bounds hold for every trial") {
        const auto res = train::random_search(
            space, 40, 1, [](const train::Trial& t, std::size_t) { return t.optimizer.momentum; },
            11);
        for (const auto& t : res.trials) {
            CHECK(t.optimizer.learning_rate >= 1e-4);
            CHECK(t.optimizer.learning_rate <= 1e-1);
            CHECK(t.optimizer.weight_decay >= 1e-6);
            CHECK(t.optimizer.weight_decay <= 1e-3);
            CHECK(t.optimizer.momentum >= 0.0);
            CHECK(t.optimizer.momentum < 1.0);
            CHECK(t.lr_schedule.gamma > 0.0);
            CHECK(t.lr_schedule.gamma <= 1.0);
            CHECK(std::find(space.step_sizes.begin(), space.step_sizes.end(),
                            t.lr_schedule.step_size) != space.step_sizes.end());
            CHECK(std::find(space.batch_sizes.begin(), space.batch_sizes.end(),
                            t.optimizer.batch_size) != space.batch_sizes.end());
            CHECK(std::find(space.hidden_layers.begin(), space.hidden_layers.end(),
                            t.hidden_layers) != space.hidden_layers.end());
            CHECK(std::find(space.hidden_sizes.begin(), space.hidden_sizes.end(), t.hidden_size) !=
                  space.hidden_sizes.end());
        }
    }
    SUBCASE("planted quadratic optimum lands within a decade") {
        const auto res = train::random_search(
            space, 50, 1,
            [](const train::Trial& t, std::size_t) {
                const double d = t.optimizer.learning_rate - 0.001;
                return -d * d;
            },
            2024);
        const double ratio = res.best.optimizer.learning_rate / 0.001;
        CHECK(std::abs(std::log10(ratio)) <= 1.0);
        CHECK(res.trials[res.best_index].objective == res.best.objective);
    }
    SUBCASE("deterministic given the seed") {
        auto lrs = [&](std::uint64_t seed) {
            std::vector<double> out;
            const auto res = train::random_search(
                space, 8, 1, [](const train::Trial&, std::size_t) { return 0.0; }, seed);
            for (const auto& t : res.trials) out.push_back(t.optimizer.learning_rate);
            return out;
        };
        CHECK(lrs(5) == lrs(5));
        CHECK(lrs(5) != lrs(6));
    }
}

TEST_CASE("training log serializes one JSON object per epoch") {
    cftest::TempDir tmp("train_log");
    train::TrainLog log;
    for (std::size_t i = 0; i < 3; ++i) {
        train::EpochLog e;
        e.stage = i / 2;
        e.epoch = i;
        e.lr = 0.1 / static_cast<double>(i + 1);
        e.train_loss = 1.0 / static_cast<double>(i + 1);
        e.val_metrics = json{{"subject", {{"metrics", {{"mcc", 0.5}}}}}};
        log.push_back(e);
    }
    const std::string path = tmp.file("log.jsonl");
    train::write_train_log(log, path);

    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const json j = json::parse(line);
        CHECK(j.at("stage").get<std::size_t>() == log[n].stage);
        CHECK(j.at("epoch").get<std::size_t>() == n);
        CHECK(j.at("lr").get<double>() == doctest::Approx(log[n].lr));
        CHECK(j.at("train_loss").get<double>() == doctest::Approx(log[n].train_loss));
        CHECK(j.contains("val_metrics"));
        ++n;
    }
    CHECK(n == 3);
    CHECK_THROWS_AS(train::write_train_log(log, "/nonexistent/dir/log.jsonl"), IoError);

    // evaluate_pool emits the same metrics document used in the log.
    model::Classifier clf(tiny_classifier_config(), 42);
    const auto pool = train::build_pool(toy_corpus(2, 2, "ev"), DataSource::Original,
                                        dsp::SegmentSpec{0.4, 0.1, 0.1}, 2);
    const json doc = train::evaluate_pool(clf, pool);
    CHECK(doc.contains("fragment"));
    CHECK(doc.contains("subject"));
    CHECK(doc.at("fragment").at("level") == "fragment");
    CHECK(doc.at("subject").at("level") == "subject");
    CHECK(train::evaluate_pool(clf, {}).is_object());
    CHECK(train::evaluate_pool(clf, {}).empty());
}
