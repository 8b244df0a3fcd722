#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stcids/dataset.hpp"

namespace stcids::eval {

struct LengthMismatch : Error {
    using Error::Error;
};
struct EmptyCounts : Error {
    using Error::Error;
};

struct ConfusionCounts {
    int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    int64_t total() const { return tp + tn + fp + fn; }
};

struct MetricsReport {
    double acc = 0, precision = 0, recall = 0, f1 = 0, fnr = 0, er = 0;
    ConfusionCounts counts;
};

// Positive class is intrusion (label 1).
ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels);

// Acc=(TP+TN)/total, P=TP/(TP+FP), R=TP/(TP+FN), F1=2PR/(P+R),
// FNR=FN/(TP+FN), ER=(FN+FP)/total. Degenerate denominators: P (and R)
// fall back to 1 when the classifier made no such call and no positives were
// missed, else 0; F1 is 0 when P+R == 0.
MetricsReport metrics(const ConfusionCounts& counts);

std::string metrics_csv(const MetricsReport& r);
std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

// ---- repeated k-fold evaluation -------------------------------------------------

// Trains on the train indices, predicts labels for the test indices.
using TrainPredictFn = std::function<std::vector<int>(
    const dataset::Dataset& data, const std::vector<size_t>& train_idx,
    const std::vector<size_t>& test_idx, uint64_t seed)>;

struct Dispersion {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct KFoldEvalResult {
    std::vector<MetricsReport> repeats;
    Dispersion fnr, er;
    std::string box_plot_csv() const;  // per-repeat FNR/ER rows
};

// Repeat r re-stratifies with seed+r and holds out fold (r mod k).
KFoldEvalResult kfold_evaluate(const TrainPredictFn& fn, const dataset::Dataset& data, int k,
                               int repeats, uint64_t seed);

Dispersion dispersion_of(std::vector<double> values);

// ---- latency benchmark ----------------------------------------------------------

struct LatencyRow {
    int batch = 0;
    double mean_ms = 0, p50_ms = 0, p95_ms = 0, p99_ms = 0;  // per message
    double throughput = 0;                                   // messages / second
};

struct LatencyReport {
    std::string model_kind;
    int messages_per_item = 1;
    std::vector<LatencyRow> rows;
    std::string to_csv() const;
};

// Steady-state wall time per message on a monotonic clock. A multi-frame
// item covers 64 messages, so its per-message cost is the per-item cost / 64.
LatencyReport benchmark_latency(models::Model<float>& model, const dataset::Dataset& inputs,
                                const std::vector<int>& batch_sizes, int warmup_iters = 50,
                                int timed_iters = 500);

}  // namespace stcids::eval
