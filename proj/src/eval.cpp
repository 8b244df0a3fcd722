#include "stcids/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <numeric>
#include <sstream>

#include "stcids/train.hpp"

namespace stcids::eval {

ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw LengthMismatch("predictions and labels differ in length");
    if (predictions.empty()) throw EmptyCounts("confusion needs at least one pair");
    ConfusionCounts c;
    for (size_t i = 0; i < predictions.size(); ++i) {
        bool pred = predictions[i] != 0;
        bool truth = labels[i] != 0;
        if (pred && truth)
            ++c.tp;
        else if (!pred && !truth)
            ++c.tn;
        else if (pred)
            ++c.fp;
        else
            ++c.fn;
    }
    return c;
}

MetricsReport metrics(const ConfusionCounts& c) {
    if (c.total() <= 0) throw EmptyCounts("metrics need a positive total");
    if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0) throw EmptyCounts("negative count");
    MetricsReport r;
    r.counts = c;
    double total = static_cast<double>(c.total());
    r.acc = static_cast<double>(c.tp + c.tn) / total;
    r.er = static_cast<double>(c.fn + c.fp) / total;
    r.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                                    : (c.fn == 0 ? 1.0 : 0.0);
    r.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                                 : (c.fp == 0 ? 1.0 : 0.0);
    r.fnr = (c.tp + c.fn) > 0 ? static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn)
                              : 1.0 - r.recall;
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

std::string metrics_csv(const MetricsReport& r) {
    std::ostringstream out;
    out << "tp,tn,fp,fn,acc,precision,recall,f1,fnr,er\n";
    out << r.counts.tp << ',' << r.counts.tn << ',' << r.counts.fp << ',' << r.counts.fn << ','
        << format_double(r.acc) << ',' << format_double(r.precision) << ','
        << format_double(r.recall) << ',' << format_double(r.f1) << ',' << format_double(r.fnr)
        << ',' << format_double(r.er) << '\n';
    return out.str();
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::ostringstream out;
    out << "model                 ER (%)   FNR (%)  P (%)    R (%)    F1 (%)\n";
    for (const auto& [name, r] : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-20s  %-8.4f %-8.4f %-8.4f %-8.4f %-8.4f\n", name.c_str(),
                      r.er * 100.0, r.fnr * 100.0, r.precision * 100.0, r.recall * 100.0,
                      r.f1 * 100.0);
        out << buf;
    }
    return out.str();
}

Dispersion dispersion_of(std::vector<double> values) {
    if (values.empty()) throw EmptyCounts("dispersion of an empty set");
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        // linear interpolation between closest ranks
        double pos = q * static_cast<double>(values.size() - 1);
        size_t lo = static_cast<size_t>(pos);
        size_t hi = std::min(values.size() - 1, lo + 1);
        double frac = pos - static_cast<double>(lo);
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    Dispersion d;
    d.min = values.front();
    d.q1 = quantile(0.25);
    d.median = quantile(0.5);
    d.q3 = quantile(0.75);
    d.max = values.back();
    return d;
}

std::string KFoldEvalResult::box_plot_csv() const {
    std::ostringstream out;
    out << "repeat,fnr,er\n";
    for (size_t i = 0; i < repeats.size(); ++i)
        out << (i + 1) << ',' << format_double(repeats[i].fnr) << ',' << format_double(repeats[i].er)
            << '\n';
    return out.str();
}

KFoldEvalResult kfold_evaluate(const TrainPredictFn& fn, const dataset::Dataset& data, int k,
                               int repeats, uint64_t seed) {
    KFoldEvalResult result;
    std::vector<double> fnrs, ers;
    for (int r = 0; r < repeats; ++r) {
        uint64_t rep_seed = seed + static_cast<uint64_t>(r);
        auto splits = features::stratified_kfold(data.y, k, rep_seed);
        const auto& split = splits[static_cast<size_t>(r % k)];
        std::vector<int> preds = fn(data, split.train, split.test, rep_seed);
        std::vector<int> truth(split.test.size());
        for (size_t i = 0; i < split.test.size(); ++i) truth[i] = data.y[split.test[i]];
        MetricsReport rep = metrics(confusion(preds, truth));
        fnrs.push_back(rep.fnr);
        ers.push_back(rep.er);
        result.repeats.push_back(rep);
    }
    result.fnr = dispersion_of(fnrs);
    result.er = dispersion_of(ers);
    return result;
}

std::string LatencyReport::to_csv() const {
    std::ostringstream out;
    out << "model,batch,mean_ms_per_msg,p50_ms,p95_ms,p99_ms,throughput_msg_per_s\n";
    for (const auto& row : rows)
        out << model_kind << ',' << row.batch << ',' << format_double(row.mean_ms) << ','
            << format_double(row.p50_ms) << ',' << format_double(row.p95_ms) << ','
            << format_double(row.p99_ms) << ',' << format_double(row.throughput) << '\n';
    return out.str();
}

LatencyReport benchmark_latency(models::Model<float>& model, const dataset::Dataset& inputs,
                                const std::vector<int>& batch_sizes, int warmup_iters,
                                int timed_iters) {
    using clock = std::chrono::steady_clock;
    static_assert(clock::period::den >= 1000000, "steady clock resolution is too coarse");
    if (inputs.count == 0) throw EmptyCounts("benchmark needs at least one input");

    LatencyReport report;
    report.model_kind = models::kind_name(model.cfg.kind);
    report.messages_per_item =
        model.cfg.kind == models::ModelKind::MultiFrame ? features::kWindowHeight : 1;

    for (int batch : batch_sizes) {
        if (batch < 1) throw ConfigError("batch sizes must be positive");
        std::vector<size_t> idx(static_cast<size_t>(batch));
        for (int i = 0; i < batch; ++i) idx[static_cast<size_t>(i)] = i % inputs.count;
        auto x = dataset::gather(inputs, idx, 0, idx.size());

        for (int i = 0; i < warmup_iters; ++i) model.predict(x);

        std::vector<double> per_msg_ms(static_cast<size_t>(timed_iters));
        double msgs = static_cast<double>(batch) * report.messages_per_item;
        for (int i = 0; i < timed_iters; ++i) {
            auto t0 = clock::now();
            model.predict(x);
            auto t1 = clock::now();
            double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            per_msg_ms[static_cast<size_t>(i)] = ms / msgs;
        }
        std::sort(per_msg_ms.begin(), per_msg_ms.end());
        auto pct = [&](double q) {
            size_t i = static_cast<size_t>(q * static_cast<double>(per_msg_ms.size() - 1));
            return per_msg_ms[i];
        };
        LatencyRow row;
        row.batch = batch;
        row.mean_ms = std::accumulate(per_msg_ms.begin(), per_msg_ms.end(), 0.0) /
                      static_cast<double>(per_msg_ms.size());
        row.p50_ms = pct(0.50);
        row.p95_ms = pct(0.95);
        row.p99_ms = pct(0.99);
        row.throughput = 1000.0 / row.mean_ms;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace stcids::eval
