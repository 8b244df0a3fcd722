#include "stcids/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace stcids::hpo {

std::string TrialConfig::describe() const {
    std::ostringstream out;
    out << "lr=" << format_double(learning_rate) << " opt=" << train::optimizer_name(optimizer)
        << " dropout=" << format_double(dropout_rate) << " filters=" << conv_filters[0] << ','
        << conv_filters[1] << ',' << conv_filters[2] << " dense=" << dense_width;
    return out.str();
}

SearchSpace SearchSpace::defaults() {
    SearchSpace s;
    s.learning_rates = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    s.optimizers = {train::OptimizerKind::Adam, train::OptimizerKind::SGD,
                    train::OptimizerKind::RMSprop};
    s.dropout_rates = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    for (auto& menu : s.filter_menus) menu = {8, 16, 24, 32, 64, 80, 96, 128, 192};
    s.dense_widths = {48, 64, 80, 128, 256};
    return s;
}

void SearchSpace::validate() const {
    if (learning_rates.empty() || optimizers.empty() || dropout_rates.empty() ||
        dense_widths.empty() || filter_menus[0].empty() || filter_menus[1].empty() ||
        filter_menus[2].empty())
        throw EmptySpace("every search axis needs at least one level");
}

size_t SearchSpace::size() const {
    return learning_rates.size() * optimizers.size() * dropout_rates.size() *
           filter_menus[0].size() * filter_menus[1].size() * filter_menus[2].size() *
           dense_widths.size();
}

TrialConfig SearchSpace::at(size_t flat) const {
    TrialConfig c;
    c.dense_width = dense_widths[flat % dense_widths.size()];
    flat /= dense_widths.size();
    for (int b = 2; b >= 0; --b) {
        c.conv_filters[b] = filter_menus[b][flat % filter_menus[b].size()];
        flat /= filter_menus[b].size();
    }
    c.dropout_rate = dropout_rates[flat % dropout_rates.size()];
    flat /= dropout_rates.size();
    c.optimizer = optimizers[flat % optimizers.size()];
    flat /= optimizers.size();
    c.learning_rate = learning_rates[flat % learning_rates.size()];
    return c;
}

namespace {

template <class T>
size_t level_of(const std::vector<T>& axis, const T& v, const char* what) {
    for (size_t i = 0; i < axis.size(); ++i)
        if (axis[i] == v) return i;
    throw UnknownLevel(std::string("value not on the ") + what + " axis");
}

}  // namespace

size_t SearchSpace::index_of(const TrialConfig& c) const {
    size_t flat = level_of(learning_rates, c.learning_rate, "learning-rate");
    flat = flat * optimizers.size() + level_of(optimizers, c.optimizer, "optimizer");
    flat = flat * dropout_rates.size() + level_of(dropout_rates, c.dropout_rate, "dropout");
    for (int b = 0; b < 3; ++b)
        flat = flat * filter_menus[b].size() +
               level_of(filter_menus[b], c.conv_filters[b], "filter");
    flat = flat * dense_widths.size() + level_of(dense_widths, c.dense_width, "dense-width");
    return flat;
}

size_t SearchSpace::encoded_width() const {
    return learning_rates.size() + optimizers.size() + dropout_rates.size() +
           filter_menus[0].size() + filter_menus[1].size() + filter_menus[2].size() +
           dense_widths.size();
}

std::vector<double> SearchSpace::encode(const TrialConfig& c) const {
    std::vector<double> v(encoded_width(), 0.0);
    size_t off = 0;
    v[off + level_of(learning_rates, c.learning_rate, "learning-rate")] = 1.0;
    off += learning_rates.size();
    v[off + level_of(optimizers, c.optimizer, "optimizer")] = 1.0;
    off += optimizers.size();
    v[off + level_of(dropout_rates, c.dropout_rate, "dropout")] = 1.0;
    off += dropout_rates.size();
    for (int b = 0; b < 3; ++b) {
        v[off + level_of(filter_menus[b], c.conv_filters[b], "filter")] = 1.0;
        off += filter_menus[b].size();
    }
    v[off + level_of(dense_widths, c.dense_width, "dense-width")] = 1.0;
    return v;
}

TrialConfig SearchSpace::decode(const std::vector<double>& onehot) const {
    if (onehot.size() != encoded_width()) throw UnknownLevel("encoded vector has wrong width");
    TrialConfig c;
    size_t off = 0;
    auto pick = [&](size_t len) {
        size_t best = 0;
        for (size_t i = 1; i < len; ++i)
            if (onehot[off + i] > onehot[off + best]) best = i;
        off += len;
        return best;
    };
    c.learning_rate = learning_rates[pick(learning_rates.size())];
    c.optimizer = optimizers[pick(optimizers.size())];
    c.dropout_rate = dropout_rates[pick(dropout_rates.size())];
    for (int b = 0; b < 3; ++b) c.conv_filters[b] = filter_menus[b][pick(filter_menus[b].size())];
    c.dense_width = dense_widths[pick(dense_widths.size())];
    return c;
}

// ---- Gaussian process ------------------------------------------------------

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

void GaussianProcess::fit(std::vector<std::vector<double>> xs, std::vector<double> ys) {
    x = std::move(xs);
    y = std::move(ys);
    size_t n = x.size();
    y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);

    std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j <= i; ++j) {
            double v = std::exp(-sq_dist(x[i], x[j]) / (2.0 * lengthscale * lengthscale));
            k[i][j] = v;
            k[j][i] = v;
        }
    for (size_t i = 0; i < n; ++i) k[i][i] += noise;

    // Cholesky K = L L^T
    chol.assign(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j <= i; ++j) {
            double sum = k[i][j];
            for (size_t p = 0; p < j; ++p) sum -= chol[i][p] * chol[j][p];
            if (i == j) {
                if (sum <= 0.0) throw Error("GP kernel matrix is not positive definite");
                chol[i][j] = std::sqrt(sum);
            } else {
                chol[i][j] = sum / chol[j][j];
            }
        }

    // alpha = K^-1 (y - mean)
    std::vector<double> z(n);
    for (size_t i = 0; i < n; ++i) {
        double sum = y[i] - y_mean;
        for (size_t p = 0; p < i; ++p) sum -= chol[i][p] * z[p];
        z[i] = sum / chol[i][i];
    }
    alpha.assign(n, 0.0);
    for (size_t ii = n; ii-- > 0;) {
        double sum = z[ii];
        for (size_t p = ii + 1; p < n; ++p) sum -= chol[p][ii] * alpha[p];
        alpha[ii] = sum / chol[ii][ii];
    }
}

std::pair<double, double> GaussianProcess::predict(const std::vector<double>& q) const {
    size_t n = x.size();
    std::vector<double> kq(n);
    for (size_t i = 0; i < n; ++i)
        kq[i] = std::exp(-sq_dist(x[i], q) / (2.0 * lengthscale * lengthscale));
    double mean = y_mean;
    for (size_t i = 0; i < n; ++i) mean += kq[i] * alpha[i];

    // v = L^-1 kq ; var = k(q,q) - v.v
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) {
        double sum = kq[i];
        for (size_t p = 0; p < i; ++p) sum -= chol[i][p] * v[p];
        v[i] = sum / chol[i][i];
    }
    double var = 1.0;
    for (size_t i = 0; i < n; ++i) var -= v[i] * v[i];
    return {mean, std::max(var, 0.0)};
}

double expected_improvement(double mean, double variance, double best, double xi) {
    double sigma = std::sqrt(variance);
    if (sigma < 1e-12) return 0.0;
    double gap = mean - best - xi;
    double z = gap / sigma;
    double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return gap * cdf + sigma * pdf;
}

// ---- tuner -------------------------------------------------------------------

std::vector<TrialRecord> tune(const SearchSpace& space, const ObjectiveFn& objective,
                              const TuneOptions& options) {
    space.validate();
    if (options.trials < 1) throw ConfigError("trials must be >= 1");
    if (options.repeats < 1) throw ConfigError("repeats must be >= 1");

    size_t space_size = space.size();
    size_t budget = std::min(static_cast<size_t>(options.trials), space_size);
    std::mt19937_64 rng(options.seed);

    std::set<size_t> proposed;
    std::vector<TrialRecord> records;
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;

    auto evaluate = [&](size_t flat) {
        TrialRecord rec;
        rec.config = space.at(flat);
        for (int r = 0; r < options.repeats; ++r) {
            uint64_t run_seed = splitmix64(options.seed ^ splitmix64(flat) ^
                                           (static_cast<uint64_t>(r) * 0x9E3779B97F4A7C15ull));
            double score = objective(rec.config, r, run_seed);
            rec.run_scores.push_back(score);
            rec.mean_score += score;
        }
        rec.mean_score /= static_cast<double>(options.repeats);
        proposed.insert(flat);
        xs.push_back(space.encode(rec.config));
        ys.push_back(rec.mean_score);
        records.push_back(std::move(rec));
    };

    size_t n_random = (budget + 2) / 3;  // first third of the budget explores at random
    while (proposed.size() < n_random) {
        size_t flat = static_cast<size_t>(draw_index(rng, space_size));
        if (proposed.count(flat)) continue;
        evaluate(flat);
    }

    while (proposed.size() < budget) {
        GaussianProcess gp;
        gp.lengthscale = options.gp_lengthscale;
        gp.noise = options.gp_noise;
        gp.fit(xs, ys);
        double best = *std::max_element(ys.begin(), ys.end());

        // candidate pool: the whole space, or a seeded sample of it when huge
        std::vector<size_t> candidates;
        if (space_size <= options.enumeration_cap) {
            candidates.resize(space_size);
            for (size_t i = 0; i < space_size; ++i) candidates[i] = i;
        } else {
            std::set<size_t> sample;
            while (sample.size() < options.enumeration_cap / 4)
                sample.insert(static_cast<size_t>(draw_index(rng, space_size)));
            candidates.assign(sample.begin(), sample.end());
        }

        double best_ei = -1.0;
        size_t best_flat = space_size;
        for (size_t flat : candidates) {
            if (proposed.count(flat)) continue;
            auto [mean, var] = gp.predict(space.encode(space.at(flat)));
            double ei = expected_improvement(mean, var, best, options.ei_xi);
            if (ei > best_ei) {
                best_ei = ei;
                best_flat = flat;
            }
        }
        if (best_flat == space_size) {
            // every candidate already evaluated (tiny space): fall back to any
            for (size_t i = 0; i < space_size && best_flat == space_size; ++i)
                if (!proposed.count(i)) best_flat = i;
            if (best_flat == space_size) break;
        }
        evaluate(best_flat);
    }

    std::stable_sort(records.begin(), records.end(),
                     [](const TrialRecord& a, const TrialRecord& b) {
                         return a.mean_score > b.mean_score;
                     });
    return records;
}

std::string tuning_report_csv(const std::vector<TrialRecord>& records) {
    std::ostringstream out;
    size_t max_runs = 0;
    for (const auto& r : records) max_runs = std::max(max_runs, r.run_scores.size());
    out << "rank,learning_rate,optimizer,dropout_rate,filters,dense,mean_val_acc";
    for (size_t i = 1; i <= max_runs; ++i) out << ",run" << i;
    out << '\n';
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        out << (i + 1) << ',' << format_double(r.config.learning_rate) << ','
            << train::optimizer_name(r.config.optimizer) << ','
            << format_double(r.config.dropout_rate) << ',' << r.config.conv_filters[0] << ' '
            << r.config.conv_filters[1] << ' ' << r.config.conv_filters[2] << ','
            << r.config.dense_width << ',' << format_double(r.mean_score);
        for (double s : r.run_scores) out << ',' << format_double(s);
        out << '\n';
    }
    return out.str();
}

std::string top3_table(const std::vector<TrialRecord>& records) {
    std::ostringstream out;
    out << "rank  learning-rate  dropout  filters      dense  optimizer  val-acc\n";
    for (size_t i = 0; i < records.size() && i < 3; ++i) {
        const auto& r = records[i];
        char filters[32];
        std::snprintf(filters, sizeof(filters), "%d,%d,%d", r.config.conv_filters[0],
                      r.config.conv_filters[1], r.config.conv_filters[2]);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-5zu %-14g %-8g %-12s %-6d %-10s %.4f\n", i + 1,
                      r.config.learning_rate, r.config.dropout_rate, filters, r.config.dense_width,
                      train::optimizer_name(r.config.optimizer), r.mean_score);
        out << buf;
    }
    return out.str();
}

}  // namespace stcids::hpo
