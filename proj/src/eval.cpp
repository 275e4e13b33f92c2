#include "cardioforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace cardioforge::eval {

namespace {

double rate(double num, double den, bool& degenerate) {
    if (den <= 0.0) {
        degenerate = true;
        return 0.0;
    }
    return num / den;
}

// Empirical quantile by rank floor(q * n), so n = 2 yields min/max envelopes.
double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const std::size_t idx = std::min(
        v.size() - 1, static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size()))));
    return v[idx];
}

// TPR of a step ROC curve at a given FPR, by linear interpolation.
double tpr_at(const RocCurve& c, double x) {
    if (c.fpr.empty()) return 0.0;
    if (x <= c.fpr.front()) return c.tpr.front();
    for (std::size_t i = 1; i < c.fpr.size(); ++i) {
        if (x <= c.fpr[i]) {
            const double span = c.fpr[i] - c.fpr[i - 1];
            if (span <= 0.0) return std::max(c.tpr[i - 1], c.tpr[i]);
            const double w = (x - c.fpr[i - 1]) / span;
            return c.tpr[i - 1] + w * (c.tpr[i] - c.tpr[i - 1]);
        }
    }
    return c.tpr.back();
}

const std::vector<std::pair<std::string, double MetricsReport::*>>& metric_fields() {
    static const std::vector<std::pair<std::string, double MetricsReport::*>> fields = {
        {"acc", &MetricsReport::acc},
        {"uar", &MetricsReport::uar},
        {"tpr", &MetricsReport::tpr},
        {"tnr", &MetricsReport::tnr},
        {"f1", &MetricsReport::f1},
        {"mcc", &MetricsReport::mcc},
        {"fpr", &MetricsReport::fpr},
        {"fpr_conventional", &MetricsReport::fpr_conventional},
    };
    return fields;
}

std::map<std::string, MetricSummary> summarize(
    const std::vector<std::vector<const MetricsReport*>>& by_run) {
    std::map<std::string, MetricSummary> out;
    for (const auto& [name, member] : metric_fields()) {
        std::vector<double> per_run;
        for (const auto& fold_reports : by_run) {
            double acc = 0.0;
            for (const auto* m : fold_reports) acc += m->*member;
            per_run.push_back(acc / static_cast<double>(fold_reports.size()));
        }
        MetricSummary s;
        const double n = static_cast<double>(per_run.size());
        s.mean = std::accumulate(per_run.begin(), per_run.end(), 0.0) / n;
        if (per_run.size() > 1) {
            double ss = 0.0;
            for (double v : per_run) ss += (v - s.mean) * (v - s.mean);
            s.stddev = std::sqrt(ss / (n - 1.0));
        }
        out[name] = s;
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

MetricsReport metrics(const ConfusionCounts& c) {
    MetricsReport m;
    m.counts = c;
    const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);

    m.tpr = rate(tp, tp + fn, m.degenerate);
    m.tnr = rate(tn, tn + fp, m.degenerate);
    m.fpr = rate(fp, tp + fp, m.degenerate);  // Eq. (3) as printed
    m.fpr_conventional = rate(fp, fp + tn, m.degenerate);
    m.acc = rate(tp + tn, tp + tn + fp + fn, m.degenerate);
    m.uar = (m.tpr + m.tnr) / 2.0;
    m.f1 = rate(2.0 * tp, 2.0 * tp + fp + fn, m.degenerate);

    const double m1 = tp + fp, m2 = tp + fn, m3 = tn + fp, m4 = tn + fn;
    if (m1 <= 0.0 || m2 <= 0.0 || m3 <= 0.0 || m4 <= 0.0) {
        m.degenerate = true;
        m.mcc = 0.0;
    } else {
        m.mcc = (tp * tn - fp * fn) / std::sqrt(m1 * m2 * m3 * m4);
    }
    return m;
}

ConfusionCounts confusion(const std::vector<int>& labels, const std::vector<int>& predictions) {
    if (labels.size() != predictions.size())
        throw ArgumentError("confusion: labels/predictions size mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1)
            (predictions[i] == 1 ? c.tp : c.fn) += 1;
        else
            (predictions[i] == 1 ? c.fp : c.tn) += 1;
    }
    return c;
}

std::vector<SubjectPrediction> aggregate_subject(
    const std::map<std::string, SubjectFragments>& groups, double threshold) {
    std::vector<SubjectPrediction> out;
    for (const auto& [subject, frags] : groups) {
        if (frags.probs.empty())
            throw AggregationError("aggregate_subject: subject " + subject + " has no fragments");
        SubjectPrediction p;
        p.subject_id = subject;
        p.label = frags.label;
        p.score = std::accumulate(frags.probs.begin(), frags.probs.end(), 0.0) /
                  static_cast<double>(frags.probs.size());
        p.predicted = p.score >= threshold ? 1 : 0;
        out.push_back(std::move(p));
    }
    return out;
}

RocCurve roc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ArgumentError("roc: scores/labels size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw ArgumentError("roc: both classes required");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve c;
    c.fpr.push_back(0.0);
    c.tpr.push_back(0.0);
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        c.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
        c.tpr.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
    }
    for (std::size_t k = 1; k < c.fpr.size(); ++k) {
        c.auc += (c.fpr[k] - c.fpr[k - 1]) * (c.tpr[k] + c.tpr[k - 1]) / 2.0;
    }
    return c;
}

RocBands roc_bands(const std::vector<RocCurve>& curves) {
    if (curves.size() < 2) throw ArgumentError("roc_bands: need at least two runs");
    RocBands b;
    for (int k = 0; k <= 100; ++k) {
        const double x = static_cast<double>(k) / 100.0;
        std::vector<double> ys;
        ys.reserve(curves.size());
        for (const auto& c : curves) ys.push_back(tpr_at(c, x));
        b.fpr_grid.push_back(x);
        b.tpr_mean.push_back(std::accumulate(ys.begin(), ys.end(), 0.0) /
                             static_cast<double>(ys.size()));
        b.tpr_lo.push_back(quantile(ys, 0.025));
        b.tpr_hi.push_back(quantile(ys, 0.975));
    }
    return b;
}

Summary report(const std::vector<RunResult>& runs) {
    if (runs.empty()) throw ArgumentError("report: need at least one run");
    std::map<int, std::vector<const RunResult*>> by_run;
    for (const auto& r : runs) by_run[r.run_id].push_back(&r);

    std::vector<std::vector<const MetricsReport*>> frag, subj;
    for (const auto& [run, results] : by_run) {
        std::vector<const MetricsReport*> f, s;
        for (const auto* r : results) {
            f.push_back(&r->fragment);
            s.push_back(&r->subject);
        }
        frag.push_back(std::move(f));
        subj.push_back(std::move(s));
    }
    Summary out;
    out.fragment = summarize(frag);
    out.subject = summarize(subj);
    out.n_runs = by_run.size();
    return out;
}

nlohmann::json metrics_to_json(const MetricsReport& m) {
    nlohmann::json j;
    j["level"] = m.level;
    j["run"] = m.run_id;
    j["fold"] = m.fold_id;
    j["degenerate"] = m.degenerate;
    nlohmann::json jm;
    for (const auto& [name, member] : metric_fields()) jm[name] = m.*member;
    j["metrics"] = jm;
    j["counts"] = {{"tp", m.counts.tp}, {"tn", m.counts.tn}, {"fp", m.counts.fp},
                   {"fn", m.counts.fn}};
    return j;
}

void write_metrics_json(const MetricsReport& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_metrics_json: cannot open " + path);
    out << metrics_to_json(m).dump(2) << "\n";
}

void write_summary_csv(const Summary& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_summary_csv: cannot open " + path);
    // Mirrors the result-table column order, one row per level.
    const std::vector<std::string> cols = {"acc", "uar", "tpr", "tnr", "f1", "mcc",
                                           "fpr", "fpr_conventional"};
    out << "level";
    for (const auto& c : cols) out << "," << c << "_mean," << c << "_std";
    out << ",n_runs\n";
    const auto row = [&](const std::string& level,
                         const std::map<std::string, MetricSummary>& m) {
        out << level;
        for (const auto& c : cols) {
            const auto& ms = m.at(c);
            out << "," << fmt(ms.mean) << "," << fmt(ms.stddev);
        }
        out << "," << s.n_runs << "\n";
    };
    row("fragment", s.fragment);
    row("subject", s.subject);
}

void write_roc_csv(const RocBands& b, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_roc_csv: cannot open " + path);
    out << "fpr,tpr_mean,tpr_lo,tpr_hi\n";
    for (std::size_t i = 0; i < b.fpr_grid.size(); ++i) {
        out << fmt(b.fpr_grid[i]) << "," << fmt(b.tpr_mean[i]) << "," << fmt(b.tpr_lo[i]) << ","
            << fmt(b.tpr_hi[i]) << "\n";
    }
}

}  // namespace cardioforge::eval
