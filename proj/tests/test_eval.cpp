#include "cardioforge/eval.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"

using namespace cardioforge;
using namespace cardioforge::eval;

namespace {

// Direct evaluation of the printed formulas, coded independently of the
// library implementation.
struct Direct {
    double acc, uar, tpr, tnr, fpr, fprc, f1, mcc;
    bool degenerate;
};

Direct direct_eval(double tp, double tn, double fp, double fn) {
    Direct d{};
    auto safe = [&](double num, double den) {
        if (den == 0.0) {
            d.degenerate = true;
            return 0.0;
        }
        return num / den;
    };
    d.tpr = safe(tp, tp + fn);
    d.tnr = safe(tn, tn + fp);
    d.fpr = safe(fp, tp + fp);
    d.fprc = safe(fp, fp + tn);
    d.acc = safe(tp + tn, tp + tn + fp + fn);
    d.uar = (d.tpr + d.tnr) / 2.0;
    d.f1 = safe(2.0 * tp, 2.0 * tp + fp + fn);
    const double prod = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (prod == 0.0) {
        d.degenerate = true;
        d.mcc = 0.0;
    } else {
        d.mcc = (tp * tn - fp * fn) / std::sqrt(prod);
    }
    return d;
}

}  // namespace

TEST_CASE("hand-evaluated metric oracles") {
    auto m = metrics({1, 1, 0, 0});
    CHECK(m.acc == 1.0);
    CHECK(m.uar == 1.0);
    CHECK(m.mcc == 1.0);
    CHECK(m.fpr == 0.0);
    CHECK_FALSE(m.degenerate);

    m = metrics({2, 1, 1, 0});
    CHECK(m.tpr == 1.0);
    CHECK(m.tnr == 0.5);
    CHECK(m.uar == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(m.mcc == doctest::Approx(2.0 / std::sqrt(12.0)).epsilon(1e-12));
    CHECK(m.fpr == doctest::Approx(1.0 / 3.0).epsilon(1e-15));  // Eq. (3) as printed
    CHECK(m.fpr_conventional == 0.5);
    CHECK(m.f1 == doctest::Approx(4.0 / 5.0).epsilon(1e-15));

    m = metrics({0, 0, 0, 4});
    CHECK(m.tpr == 0.0);
    CHECK(m.mcc == 0.0);
    CHECK(m.degenerate);
}

TEST_CASE("brute-force oracle over all small confusion matrices") {
    for (std::size_t tp = 0; tp <= 5; ++tp)
        for (std::size_t tn = 0; tn <= 5; ++tn)
            for (std::size_t fp = 0; fp <= 5; ++fp)
                for (std::size_t fn = 0; fn <= 5; ++fn) {
                    const auto m = metrics({tp, tn, fp, fn});
                    const auto d = direct_eval(tp, tn, fp, fn);
                    CHECK(std::abs(m.acc - d.acc) < 1e-12);
                    CHECK(std::abs(m.uar - d.uar) < 1e-12);
                    CHECK(std::abs(m.tpr - d.tpr) < 1e-12);
                    CHECK(std::abs(m.tnr - d.tnr) < 1e-12);
                    CHECK(std::abs(m.fpr - d.fpr) < 1e-12);
                    CHECK(std::abs(m.fpr_conventional - d.fprc) < 1e-12);
                    CHECK(std::abs(m.f1 - d.f1) < 1e-12);
                    CHECK(std::abs(m.mcc - d.mcc) < 1e-12);
                    CHECK(m.degenerate == d.degenerate);
                }
}

TEST_CASE("mcc symmetry and prediction inversion") {
    for (std::size_t tp = 0; tp <= 5; ++tp)
        for (std::size_t tn = 0; tn <= 5; ++tn)
            for (std::size_t fp = 0; fp <= 5; ++fp)
                for (std::size_t fn = 0; fn <= 5; ++fn) {
                    const double base = metrics({tp, tn, fp, fn}).mcc;
                    // class swap: tp <-> tn, fp <-> fn
                    CHECK(std::abs(metrics({tn, tp, fn, fp}).mcc - base) < 1e-12);
                    // inverted predictions: tp -> fn, fp -> tn, tn -> fp, fn -> tp
                    CHECK(std::abs(metrics({fn, fp, tn, tp}).mcc + base) < 1e-12);
                }
}

TEST_CASE("metric identities on balanced counts") {
    for (std::size_t tp = 0; tp <= 4; ++tp)
        for (std::size_t fn = 0; fn <= 4 - tp; ++fn)
            for (std::size_t tn = 0; tn <= 4; ++tn) {
                const std::size_t pos = tp + fn;
                if (tn > pos) continue;
                const std::size_t fp = pos - tn;  // negatives sized to match positives
                if (pos == 0) continue;
                const auto m = metrics({tp, tn, fp, fn});
                CHECK(m.acc == doctest::Approx(m.uar).epsilon(1e-12));
            }
}

TEST_CASE("subject aggregation") {
    std::map<std::string, SubjectFragments> groups;
    groups["a"] = {1, {0.9, 0.2, 0.7}};
    groups["b"] = {0, {0.4}};
    groups["c"] = {1, {0.5}};
    const auto preds = aggregate_subject(groups);
    REQUIRE(preds.size() == 3);
    CHECK(preds[0].subject_id == "a");
    CHECK(preds[0].score == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(preds[0].predicted == 1);
    CHECK(preds[1].predicted == 0);
    CHECK(preds[2].predicted == 1);  // exactly 0.5 goes abnormal

    groups["d"] = {0, {}};
    CHECK_THROWS_AS(aggregate_subject(groups), AggregationError);
}

TEST_CASE("aggregation consistency when fragments agree within subjects") {
    Rng rng(17);
    for (const std::size_t k : {1, 3, 5}) {  // same fragment count for every subject
        std::map<std::string, SubjectFragments> groups;
        std::vector<int> frag_labels, frag_preds;
        for (int s = 0; s < 12; ++s) {
            const int label = rng.below(2) == 0 ? 0 : 1;
            const double p = rng.uniform();
            SubjectFragments sf;
            sf.label = label;
            sf.probs.assign(k, p);
            groups["s" + std::to_string(s)] = sf;
            for (std::size_t i = 0; i < k; ++i) {
                frag_labels.push_back(label);
                frag_preds.push_back(p >= 0.5 ? 1 : 0);
            }
        }
        const auto subj = aggregate_subject(groups);
        std::vector<int> s_labels, s_preds;
        for (const auto& p : subj) {
            s_labels.push_back(p.label);
            s_preds.push_back(p.predicted);
        }
        const auto mf = metrics(confusion(frag_labels, frag_preds));
        const auto ms = metrics(confusion(s_labels, s_preds));
        CHECK(mf.tpr == doctest::Approx(ms.tpr).epsilon(1e-12));
        CHECK(mf.tnr == doctest::Approx(ms.tnr).epsilon(1e-12));
    }
}

TEST_CASE("roc sweep, auc oracles and symmetry") {
    SUBCASE("perfect separation") {
        const auto c = roc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
        CHECK(c.auc == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(c.fpr.front() == 0.0);
        CHECK(c.tpr.front() == 0.0);
        CHECK(c.fpr.back() == 1.0);
        CHECK(c.tpr.back() == 1.0);
        for (std::size_t i = 1; i < c.fpr.size(); ++i) {
            CHECK(c.fpr[i] >= c.fpr[i - 1]);
            CHECK(c.tpr[i] >= c.tpr[i - 1]);
        }
    }

    SUBCASE("independent scores sit on the diagonal") {
        Rng rng(23);
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < 10000; ++i) {
            scores.push_back(rng.uniform());
            labels.push_back(rng.below(2) == 0 ? 0 : 1);
        }
        const auto c = roc(scores, labels);
        CHECK(c.auc == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +- 0.02
    }

    SUBCASE("reversing scores mirrors the auc") {
        Rng rng(29);
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < 500; ++i) {
            const int l = rng.below(2) == 0 ? 0 : 1;
            labels.push_back(l);
            scores.push_back(0.3 * rng.normal() + 0.4 * l);
        }
        const auto fwd = roc(scores, labels);
        std::vector<double> neg(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) neg[i] = -scores[i];
        const auto rev = roc(neg, labels);
        CHECK(rev.auc == doctest::Approx(1.0 - fwd.auc).epsilon(1e-12));
    }

    SUBCASE("single class rejected") {
        CHECK_THROWS_AS(roc({0.1, 0.9}, {1, 1}), ArgumentError);
        CHECK_THROWS_AS(roc({0.1, 0.9}, {0, 0}), ArgumentError);
        CHECK_THROWS_AS(roc({0.1}, {0, 1}), ArgumentError);
    }
}

TEST_CASE("roc confidence bands") {
    const auto mk = [](std::vector<double> s, std::vector<int> l) { return roc(s, l); };

    SUBCASE("identical curves collapse the band") {
        const auto c = mk({0.9, 0.6, 0.4, 0.1}, {1, 0, 1, 0});
        const auto b = roc_bands({c, c, c});
        REQUIRE(b.fpr_grid.size() == 101);
        for (std::size_t i = 0; i < 101; ++i) {
            CHECK(b.tpr_lo[i] == b.tpr_hi[i]);
            CHECK(b.tpr_mean[i] == b.tpr_lo[i]);
        }
    }

    SUBCASE("two curves give min/max envelopes") {
        auto interp = [](const RocCurve& c, double x) {
            if (x <= c.fpr.front()) return c.tpr.front();
            for (std::size_t i = 1; i < c.fpr.size(); ++i) {
                if (x <= c.fpr[i]) {
                    const double span = c.fpr[i] - c.fpr[i - 1];
                    if (span <= 0.0) return std::max(c.tpr[i - 1], c.tpr[i]);
                    return c.tpr[i - 1] + (x - c.fpr[i - 1]) / span * (c.tpr[i] - c.tpr[i - 1]);
                }
            }
            return c.tpr.back();
        };
        const auto a = mk({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
        const auto c = mk({0.9, 0.2, 0.8, 0.1}, {1, 1, 0, 0});
        const auto b = roc_bands({a, c});
        for (std::size_t i = 0; i < 101; ++i) {
            const double x = b.fpr_grid[i];
            const double ya = interp(a, x), yc = interp(c, x);
            CHECK(b.tpr_lo[i] == doctest::Approx(std::min(ya, yc)).epsilon(1e-12));
            CHECK(b.tpr_hi[i] == doctest::Approx(std::max(ya, yc)).epsilon(1e-12));
            CHECK(b.tpr_mean[i] == doctest::Approx((ya + yc) / 2.0).epsilon(1e-12));
        }
    }

    SUBCASE("random-score bands hug the diagonal") {
        Rng rng(31);
        std::vector<RocCurve> curves;
        for (int r = 0; r < 10; ++r) {
            std::vector<double> scores;
            std::vector<int> labels;
            for (int i = 0; i < 2000; ++i) {
                scores.push_back(rng.uniform());
                labels.push_back(rng.below(2) == 0 ? 0 : 1);
            }
            curves.push_back(roc(scores, labels));
        }
        const auto b = roc_bands(curves);
        for (std::size_t i = 0; i < 101; ++i) {
            CHECK(std::abs(b.tpr_mean[i] - b.fpr_grid[i]) < 0.05);
        }
    }

    SUBCASE("fewer than two runs rejected") {
        const auto c = mk({0.9, 0.1}, {1, 0});
        CHECK_THROWS_AS(roc_bands({c}), ArgumentError);
        CHECK_THROWS_AS(roc_bands({}), ArgumentError);
    }
}

TEST_CASE("report aggregates folds inside runs first") {
    auto run = [](int run_id, int fold_id, double acc) {
        RunResult r;
        r.run_id = run_id;
        r.fold_id = fold_id;
        r.fragment.acc = acc;
        r.subject.acc = acc;
        return r;
    };

    SUBCASE("two runs oracle") {
        const auto s = report({run(0, 0, 0.8), run(1, 0, 0.9)});
        CHECK(s.n_runs == 2);
        CHECK(s.fragment.at("acc").mean == doctest::Approx(0.85).epsilon(1e-12));
        CHECK(s.fragment.at("acc").stddev ==
              doctest::Approx(std::sqrt(0.005)).epsilon(1e-9));  // 0.0707
    }

    SUBCASE("single run has zero deviation") {
        const auto s = report({run(0, 0, 0.8)});
        CHECK(s.n_runs == 1);
        CHECK(s.subject.at("acc").mean == 0.8);
        CHECK(s.subject.at("acc").stddev == 0.0);
    }

    SUBCASE("vest mode: folds averaged before the run statistics") {
        const auto s = report({run(0, 0, 0.8), run(0, 1, 0.9), run(1, 0, 0.6), run(1, 1, 0.7)});
        CHECK(s.n_runs == 2);
        // per-run means 0.85 and 0.65
        CHECK(s.fragment.at("acc").mean == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(s.fragment.at("acc").stddev ==
              doctest::Approx(std::sqrt(2.0 * 0.01)).epsilon(1e-9));  // 0.1414
        CHECK_THROWS_AS(report({}), ArgumentError);
    }
}

TEST_CASE("metrics json and csv emission") {
    cftest::TempDir tmp("eval_io");

    auto m = metrics({3, 2, 1, 0});
    m.level = "subject";
    m.run_id = 2;
    m.fold_id = 1;
    const auto j = metrics_to_json(m);
    CHECK(j["level"] == "subject");
    CHECK(j["run"] == 2);
    CHECK(j["fold"] == 1);
    CHECK(j["counts"]["tp"] == 3);
    CHECK(j["counts"]["fn"] == 0);
    CHECK(j["metrics"]["mcc"].get<double>() == doctest::Approx(m.mcc));
    CHECK(j["metrics"].contains("fpr_conventional"));

    const auto jpath = tmp.file("m.json");
    write_metrics_json(m, jpath);
    std::ifstream in(jpath);
    nlohmann::json back;
    in >> back;
    CHECK(back == j);

    RunResult r1, r2;
    r1.run_id = 0;
    r2.run_id = 1;
    r1.fragment = r1.subject = metrics({3, 2, 1, 0});
    r2.fragment = r2.subject = metrics({2, 3, 0, 1});
    const auto s = report({r1, r2});
    const auto cpath = tmp.file("summary.csv");
    write_summary_csv(s, cpath);
    std::ifstream cin(cpath);
    std::string header, frag_row, subj_row;
    std::getline(cin, header);
    std::getline(cin, frag_row);
    std::getline(cin, subj_row);
    CHECK(header.rfind("level,acc_mean,acc_std,uar_mean", 0) == 0);
    CHECK(frag_row.rfind("fragment,", 0) == 0);
    CHECK(subj_row.rfind("subject,", 0) == 0);

    const auto a = roc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    const auto c = roc({0.9, 0.2, 0.8, 0.1}, {1, 1, 0, 0});
    const auto rpath = tmp.file("roc.csv");
    write_roc_csv(roc_bands({a, c}), rpath);
    std::ifstream rin(rpath);
    std::string line;
    std::getline(rin, line);
    CHECK(line == "fpr,tpr_mean,tpr_lo,tpr_hi");
    int rows = 0;
    while (std::getline(rin, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 101);
}
