#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cardioforge/common.hpp"

namespace cardioforge::eval {

struct ConfusionCounts {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
};

// fpr follows the printed formula FP/(TP+FP); fpr_conventional is FP/(FP+TN)
// and feeds the ROC axes. Both are exported.
struct MetricsReport {
    double acc = 0, uar = 0, tpr = 0, tnr = 0, fpr = 0, fpr_conventional = 0, f1 = 0, mcc = 0;
    bool degenerate = false;  // some denominator (or an MCC marginal) was zero
    std::string level = "fragment";
    int run_id = 0;
    int fold_id = 0;
    ConfusionCounts counts;
};

MetricsReport metrics(const ConfusionCounts& c);

// labels/predictions: 1 = abnormal (positive), 0 = normal.
ConfusionCounts confusion(const std::vector<int>& labels, const std::vector<int>& predictions);

struct SubjectFragments {
    int label = 0;
    std::vector<double> probs;  // abnormal-class probability per fragment
};

struct SubjectPrediction {
    std::string subject_id;
    double score = 0.0;
    int predicted = 0;
    int label = 0;
};

// Mean abnormal probability per subject; abnormal iff score >= threshold.
std::vector<SubjectPrediction> aggregate_subject(
    const std::map<std::string, SubjectFragments>& groups, double threshold = 0.5);

struct RocCurve {
    std::vector<double> fpr, tpr;  // conventional FPR, from (0,0) to (1,1)
    double auc = 0.0;
};

RocCurve roc(const std::vector<double>& scores, const std::vector<int>& labels);

struct RocBands {
    std::vector<double> fpr_grid;  // 101 fixed points
    std::vector<double> tpr_mean, tpr_lo, tpr_hi;
};

// Vertical averaging with empirical 2.5%/97.5% envelopes.
RocBands roc_bands(const std::vector<RocCurve>& curves);

struct RunResult {
    MetricsReport fragment;
    MetricsReport subject;
    int run_id = 0;
    int fold_id = 0;
};

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n - 1)
};

struct Summary {
    std::map<std::string, MetricSummary> fragment;
    std::map<std::string, MetricSummary> subject;
    std::size_t n_runs = 0;
};

// Folds are averaged within each run first, then mean and sample standard
// deviation are taken across runs.
Summary report(const std::vector<RunResult>& runs);

nlohmann::json metrics_to_json(const MetricsReport& m);
void write_metrics_json(const MetricsReport& m, const std::string& path);
void write_summary_csv(const Summary& s, const std::string& path);
void write_roc_csv(const RocBands& b, const std::string& path);

}  // namespace cardioforge::eval
