#include <cmath>
#include <fstream>
#include <vector>

#include "cardioforge/model.hpp"
#include "doctest.h"
#include "grad_check.hpp"
#include "test_util.hpp"

using namespace cardioforge;
namespace ts = cardioforge::tensor;
using namespace cardioforge::model;

namespace {

std::vector<double> random_wave(std::size_t len, Rng& rng) {
    std::vector<double> w(len);
    for (auto& v : w) v = rng.uniform(-1, 1);
    return w;
}

EncoderConfig mini_encoder() {
    EncoderConfig cfg;
    cfg.conv_blocks = {{6, 6, 3}, {6, 4, 2}};
    cfg.transformer = {1, 8, 16, 2};
    return cfg;
}

void zero_param(ts::ParamStore& store, const std::string& name) {
    ts::Tensor t = store.get(name);
    std::fill(t->value.begin(), t->value.end(), 0.0);
}

}  // namespace

TEST_CASE("encoder presets reproduce the published geometry") {
    EncoderConfig paper = EncoderConfig::paper_preset();
    CHECK(paper.conv_blocks.size() == 7);
    CHECK(paper.conv_blocks[0].channels == 512);
    CHECK(paper.receptive_field() == 400);
    CHECK(paper.total_stride() == 320);
    CHECK(paper.transformer.n_layers == 12);
    CHECK(paper.transformer.d_model == 768);
    CHECK(paper.transformer.d_mlp == 3072);
    CHECK(paper.transformer.n_heads == 8);
    CHECK(frames_for(64000, paper) == 199);  // 4 s at 16 kHz
    CHECK(frames_for(400, paper) == 1);

    EncoderConfig toy = EncoderConfig::toy_preset();
    CHECK(toy.receptive_field() == 64);
    CHECK(toy.total_stride() == 16);
    CHECK(frames_for(320, toy) == 17);
    CHECK(frames_for(64, toy) == 1);
    CHECK_THROWS_AS(frames_for(63, toy), ShapeError);

    SUBCASE("invalid configs are rejected") {
        EncoderConfig bad = mini_encoder();
        bad.transformer.d_model = 9;  // not divisible by 2 heads
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = mini_encoder();
        bad.conv_blocks[0].stride = 0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = mini_encoder();
        bad.conv_blocks.clear();
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("conv stack frame count matches the closed formula on random configs") {
    Rng rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        EncoderConfig cfg;
        std::size_t n_blocks = 1 + rng.below(3);
        for (std::size_t b = 0; b < n_blocks; ++b) {
            cfg.conv_blocks.push_back({2 + rng.below(4), 1 + rng.below(8), 1 + rng.below(4)});
        }
        std::size_t heads = 1 + rng.below(2);
        cfg.transformer = {1, 4 * heads, 8, heads};

        ts::ParamStore store;
        Rng init(7);
        Encoder enc(cfg, store, "enc", init);
        std::size_t r = cfg.receptive_field();
        std::size_t len = r + rng.below(200);
        auto wave = random_wave(len, rng);
        ts::Tensor feats = enc.conv_features(ts::constant({1, len}, wave));
        CAPTURE(trial);
        CHECK(feats->rows() == frames_for(len, cfg));
        CHECK(feats->cols() == cfg.transformer.d_model);
    }
}

TEST_CASE("transformer attention is a proper distribution per row") {
    EncoderConfig cfg;
    cfg.conv_blocks = {{6, 6, 3}};
    cfg.transformer = {2, 8, 16, 2};
    ts::ParamStore store;
    Rng init(31);
    Encoder enc(cfg, store, "enc", init);

    Rng rng(5);
    auto wave = random_wave(40, rng);
    EncodeResult res = enc.encode(ts::constant({1, 40}, wave), true);
    std::size_t frames = frames_for(40, cfg);
    CHECK(res.features->rows() == frames);
    CHECK(res.features->cols() == 8);
    REQUIRE(res.attention.size() == 2);
    for (const auto& layer : res.attention) {
        REQUIRE(layer.size() == 2);
        for (const auto& head : layer) {
            REQUIRE(head.rows == frames);
            REQUIRE(head.cols == frames);
            for (std::size_t i = 0; i < head.rows; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < head.cols; ++j) {
                    CHECK(head.at(i, j) >= 0.0);
                    sum += head.at(i, j);
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
            }
        }
    }

    SUBCASE("a single frame yields the trivial attention matrix") {
        std::vector<double> feat(8);
        for (auto& v : feat) v = rng.uniform(-1, 1);
        EncodeResult one = enc.transformer_encode(ts::constant({1, 8}, feat), true);
        for (const auto& layer : one.attention) {
            for (const auto& head : layer) {
                REQUIRE(head.rows == 1);
                REQUIRE(head.cols == 1);
                CHECK(head.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }

    SUBCASE("zeroed value/output and mlp-out projections give the residual identity") {
        for (std::size_t l = 0; l < 2; ++l) {
            std::string base = "enc.t" + std::to_string(l);
            for (const char* suffix :
                 {".attn.wv", ".attn.bv", ".attn.wo", ".attn.bo", ".mlp.w2", ".mlp.b2"}) {
                zero_param(store, base + suffix);
            }
        }
        std::vector<double> feat(5 * 8);
        for (auto& v : feat) v = rng.uniform(-1, 1);
        ts::Tensor in = ts::constant({5, 8}, feat);
        EncodeResult out = enc.transformer_encode(in, false);
        CHECK(out.features->value == in->value);
    }

    SUBCASE("feature width must match d_model") {
        CHECK_THROWS_AS(enc.transformer_encode(ts::constant({3, 5}, std::vector<double>(15))),
                        ShapeError);
    }
}

TEST_CASE("concat_features mean-pools then joins in input order") {
    Rng rng(8);
    std::vector<double> av(5 * 4), bv(3 * 4);
    for (auto& v : av) v = rng.uniform(-1, 1);
    for (auto& v : bv) v = rng.uniform(-1, 1);
    ts::Tensor a = ts::constant({5, 4}, av);
    ts::Tensor b = ts::constant({3, 4}, bv);

    ts::Tensor one = concat_features({a});
    REQUIRE(one->shape == std::vector<std::size_t>{1, 4});
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 5; ++i) mean += av[i * 4 + j];
        mean /= 5.0;
        CHECK(one->value[j] == doctest::Approx(mean).epsilon(1e-12));
    }

    ts::Tensor ab = concat_features({a, b});
    ts::Tensor ba = concat_features({b, a});
    REQUIRE(ab->shape == std::vector<std::size_t>{1, 8});
    // Permuting the inputs permutes the fused blocks.
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(ab->value[j] == ba->value[4 + j]);
        CHECK(ab->value[4 + j] == ba->value[j]);
    }

    CHECK_THROWS_AS(concat_features({a, ts::constant({2, 3}, std::vector<double>(6))}),
                    ShapeError);
    CHECK_THROWS_AS(concat_features({}), ArgumentError);
}

TEST_CASE("mlp head produces normalized probabilities and the penultimate layer") {
    HeadConfig cfg;
    cfg.n_hidden_layers = 2;
    cfg.hidden_size = 6;
    cfg.n_features_in = 4;
    ts::ParamStore store;
    Rng init(12);
    MlpHead head(cfg, store, "head", init);

    Rng rng(3);
    std::vector<double> fused(4);
    for (auto& v : fused) v = rng.uniform(-1, 1);
    HeadOutput out = head.forward(ts::constant({1, 4}, fused));
    CHECK(out.probs->value[0] + out.probs->value[1] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(out.penultimate->cols() == 6);

    SUBCASE("all-zero weights give the uniform prediction") {
        for (const auto& name : store.names()) zero_param(store, name);
        HeadOutput z = head.forward(ts::constant({1, 4}, fused));
        CHECK(z.probs->value[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(z.probs->value[1] == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("fused width must match the config") {
        CHECK_THROWS_AS(head.forward(ts::constant({1, 5}, std::vector<double>(5))), ShapeError);
        HeadConfig bad = cfg;
        bad.n_classes = 1;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("lora adapters wrap, train and merge as specified") {
    Rng rng(77);
    ts::ParamStore store;
    store.add_uniform("lin.w", {6, 4}, 4, rng);
    store.add_uniform("lin.b", {6}, 4, rng);
    std::vector<double> xv(3 * 4);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    ts::Tensor x = ts::constant({3, 4}, xv);
    std::vector<double> base_out = ts::linear(x, store.get("lin.w"), store.get("lin.b"))->value;

    SUBCASE("zero-initialized b makes the wrap a no-op") {
        LoRAAdapter ad = lora_wrap(store, "lin.w", 2, 4.0, rng);
        std::vector<double> wrapped =
            lora_linear(x, store.get("lin.w"), store.get("lin.b"), &ad)->value;
        CHECK(wrapped == base_out);
        CHECK_FALSE(store.get("lin.w")->trainable);
        CHECK(store.get("lin.w.lora_a")->trainable);
        CHECK(store.get("lin.w.lora_b")->trainable);
        CHECK(lora_trainable_count(ad) == 2 * (4 + 6));
    }

    SUBCASE("merge folds the low-rank update into the base weight") {
        LoRAAdapter ad = lora_wrap(store, "lin.w", 2, 4.0, rng);
        for (auto& v : ad.b->value) v = rng.uniform(-0.5, 0.5);
        std::vector<double> adapted =
            lora_linear(x, store.get("lin.w"), store.get("lin.b"), &ad)->value;
        lora_merge(store, ad);
        std::vector<double> merged =
            lora_linear(x, store.get("lin.w"), store.get("lin.b"), &ad)->value;
        REQUIRE(merged.size() == adapted.size());
        for (std::size_t i = 0; i < merged.size(); ++i) {
            CHECK(std::abs(merged[i] - adapted[i]) < 1e-6);
        }
        CHECK_FALSE(ad.a->trainable);
        CHECK_THROWS_AS(lora_merge(store, ad), ArgumentError);
    }

    SUBCASE("invalid ranks are rejected") {
        CHECK_THROWS_AS(lora_wrap(store, "lin.w", 0, 1.0, rng), ArgumentError);
        CHECK_THROWS_AS(lora_wrap(store, "lin.w", 5, 1.0, rng), ArgumentError);
    }

    SUBCASE("encoder-level wrap leaves the forward pass unchanged") {
        ts::ParamStore estore;
        Rng init(4);
        EncoderConfig cfg = mini_encoder();
        Encoder enc(cfg, estore, "enc", init);
        auto wave = random_wave(40, rng);
        std::vector<double> before = enc.encode(ts::constant({1, 40}, wave)).features->value;
        enc.add_lora(2, 8.0, rng);
        std::vector<double> after = enc.encode(ts::constant({1, 40}, wave)).features->value;
        CHECK(before == after);
        // Only adapter parameters stay trainable inside the transformer.
        for (const auto& name : estore.names()) {
            bool is_adapter = name.find(".lora_") != std::string::npos;
            bool is_wrapped_base = name == "enc.t0.attn.wq" || name == "enc.t0.attn.wv" ||
                                   name == "enc.t0.mlp.w1";
            if (is_adapter) CHECK(estore.get(name)->trainable);
            if (is_wrapped_base) CHECK_FALSE(estore.get(name)->trainable);
        }
        enc.merge_lora();
        CHECK_FALSE(enc.has_lora());
    }
}

TEST_CASE("svm head separates blobs and xor with the scale gamma") {
    SUBCASE("gamma scale formula") {
        std::vector<std::vector<double>> xs = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
        // Pooled values have mean 0.5 and variance 0.25.
        CHECK(svm_scale_gamma(xs) == doctest::Approx(2.0).epsilon(1e-12));
    }

    SUBCASE("linearly separable blobs reach full training accuracy") {
        Rng rng(60);
        std::vector<std::vector<double>> xs;
        std::vector<int> ys;
        for (int i = 0; i < 10; ++i) {
            xs.push_back({rng.normal() * 0.3, rng.normal() * 0.3});
            ys.push_back(0);
            xs.push_back({3.0 + rng.normal() * 0.3, 3.0 + rng.normal() * 0.3});
            ys.push_back(1);
        }
        SVMHead head = svm_fit(xs, ys);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            CHECK(head.predict(xs[i]) == ys[i]);
        }
        for (double dc : head.dual_coef) {
            CHECK(std::abs(dc) <= head.c + 1e-9);
        }
        CHECK_FALSE(head.support_vectors.empty());
    }

    SUBCASE("xor is fit exactly by the rbf kernel") {
        std::vector<std::vector<double>> xs = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
        std::vector<int> ys = {0, 1, 1, 0};
        SVMHead head = svm_fit(xs, ys);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(head.predict(xs[i]) == ys[i]);
        }
    }

    SUBCASE("degenerate inputs are rejected") {
        std::vector<std::vector<double>> xs = {{0, 0}, {1, 1}};
        CHECK_THROWS_AS(svm_fit(xs, {1, 1}), FitError);
        CHECK_THROWS_AS(svm_fit({}, {}), FitError);
        CHECK_THROWS_AS(svm_fit(xs, {0, 2}), ArgumentError);
    }
}

TEST_CASE("end-to-end gradients agree with finite differences") {
    ClassifierConfig cfg;
    cfg.encoder = mini_encoder();
    cfg.head = {1, 8, 8, 2};
    cfg.n_inputs = 1;
    Classifier clf(cfg, 123);
    REQUIRE(clf.params().total_size() >= 200);

    Rng rng(9);
    std::vector<std::vector<std::vector<double>>> batch = {{random_wave(40, rng)},
                                                           {random_wave(40, rng)}};
    std::vector<int> labels = {0, 1};
    auto loss_fn = [&]() {
        return ts::cross_entropy(clf.batch_logits(batch), labels, {1.0, 1.0});
    };
    auto res = cftest::check_gradients(clf.params(), loss_fn);
    CAPTURE(res.worst);
    CHECK(res.n_probed >= 200);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("classifier forward, checkpointing and assembly") {
    ClassifierConfig cfg;
    cfg.encoder = mini_encoder();
    cfg.head = {1, 8, 8, 2};
    cfg.n_inputs = 1;

    Rng rng(14);
    auto wave = random_wave(52, rng);

    SUBCASE("deterministic construction") {
        Classifier a(cfg, 5);
        Classifier b(cfg, 5);
        Classifier c(cfg, 6);
        CHECK(a.params().get("enc0.conv0.w")->value == b.params().get("enc0.conv0.w")->value);
        CHECK(a.params().get("enc0.conv0.w")->value != c.params().get("enc0.conv0.w")->value);
        CHECK(a.forward({wave}).probs == b.forward({wave}).probs);
    }

    SUBCASE("config validation ties the head to the fused width") {
        ClassifierConfig bad = cfg;
        bad.n_inputs = 2;  // fused width becomes 16, head still expects 8
        CHECK_THROWS_AS(Classifier(bad, 1), ConfigError);
        CHECK_THROWS_AS(Classifier(cfg, 1).forward({wave, wave}), ShapeError);
    }

    SUBCASE("checkpoint round trip preserves outputs byte for byte") {
        cftest::TempDir dir("ckpt");
        Classifier a(cfg, 21);
        auto before = a.forward({wave});
        a.save(dir.file("model.ckpt"), {{"stage", 3}});
        auto loaded = Classifier::load(dir.file("model.ckpt"));
        auto after = loaded->forward({wave});
        CHECK(before.probs == after.probs);
        CHECK(loaded->config().head.hidden_size == 8);

        ts::Checkpoint ck = ts::load_checkpoint(dir.file("model.ckpt"));
        CHECK(ck.meta.at("stage") == 3);
        CHECK(ck.meta.at("kind") == "classifier");

        a.save(dir.file("model2.ckpt"), {{"stage", 3}});
        std::ifstream f1(dir.file("model.ckpt"), std::ios::binary);
        std::ifstream f2(dir.file("model2.ckpt"), std::ios::binary);
        std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(s1 == s2);
        CHECK(s1.substr(0, 4) == "CFCK");
    }

    SUBCASE("corrupted checkpoints are reported") {
        cftest::TempDir dir("ckpt_bad");
        std::ofstream(dir.file("junk.ckpt")) << "not a checkpoint";
        CHECK_THROWS_AS(ts::load_checkpoint(dir.file("junk.ckpt")), FormatError);
        CHECK_THROWS_AS(ts::load_checkpoint(dir.file("missing.ckpt")), IoError);
    }

    SUBCASE("single-channel encoders assemble into a multimodal model") {
        Classifier pcg(cfg, 31);
        Classifier ecg(cfg, 32);
        ClassifierConfig multi = cfg;
        multi.n_inputs = 2;
        multi.head.n_features_in = 16;
        Classifier fused(multi, 33);
        copy_prefixed_values(pcg.params(), "enc0", fused.params(), "enc0");
        copy_prefixed_values(ecg.params(), "enc0", fused.params(), "enc1");
        CHECK(fused.params().get("enc0.proj.w")->value == pcg.params().get("enc0.proj.w")->value);
        CHECK(fused.params().get("enc1.proj.w")->value == ecg.params().get("enc0.proj.w")->value);
        CHECK_THROWS_AS(copy_prefixed_values(pcg.params(), "nope", fused.params(), "enc0"),
                        ArgumentError);

        auto out = fused.forward({wave, wave});
        CHECK(out.probs[0] + out.probs[1] == doctest::Approx(1.0).epsilon(1e-7));
    }
}

TEST_CASE("attention importance covers the fragment at sample resolution") {
    ClassifierConfig cfg;
    cfg.encoder = mini_encoder();
    cfg.head = {1, 8, 8, 2};
    cfg.n_inputs = 1;
    Classifier clf(cfg, 44);

    Rng rng(17);
    auto frag = random_wave(52, rng);
    auto curve = attention_importance(clf, frag);
    REQUIRE(curve.size() == frag.size());
    double mx = 0.0, mn = 1e9;
    for (double v : curve) {
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    CHECK(mx == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mn >= 0.0);

    SUBCASE("one frame gives a flat unit curve") {
        ClassifierConfig tiny = cfg;
        tiny.encoder.conv_blocks = {{6, 10, 10}};
        Classifier one(tiny, 2);
        auto flat = attention_importance(one, random_wave(10, rng));
        REQUIRE(flat.size() == 10);
        for (double v : flat) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("csv export is plot-ready") {
        cftest::TempDir dir("imp");
        write_importance_csv(dir.file("imp.csv"), curve);
        std::ifstream is(dir.file("imp.csv"));
        std::string line;
        std::getline(is, line);
        CHECK(line == "sample_index,importance");
        std::size_t rows = 0;
        while (std::getline(is, line)) ++rows;
        CHECK(rows == curve.size());
    }
}
