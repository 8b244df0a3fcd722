#pragma once

#include <functional>

#include "stcids/train.hpp"

namespace stcids::hpo {

struct EmptySpace : Error {
    using Error::Error;
};
struct UnknownLevel : Error {
    using Error::Error;
};

// One point of the finite search grid.
struct TrialConfig {
    double learning_rate = 1e-3;
    train::OptimizerKind optimizer = train::OptimizerKind::Adam;
    double dropout_rate = 0.0;
    std::array<int, 3> conv_filters{16, 32, 128};
    int dense_width = 64;

    bool operator==(const TrialConfig&) const = default;
    std::string describe() const;
};

// Categorical menus over seven axes: learning rate, optimizer, dropout,
// three per-block filter counts, dense width.
struct SearchSpace {
    std::vector<double> learning_rates;
    std::vector<train::OptimizerKind> optimizers;
    std::vector<double> dropout_rates;
    std::array<std::vector<int>, 3> filter_menus;
    std::vector<int> dense_widths;

    static SearchSpace defaults();
    void validate() const;
    size_t size() const;
    TrialConfig at(size_t flat_index) const;     // lexicographic over the axes
    size_t index_of(const TrialConfig& c) const;  // throws UnknownLevel

    // One-hot per axis, concatenated; injective over the space.
    std::vector<double> encode(const TrialConfig& c) const;
    TrialConfig decode(const std::vector<double>& onehot) const;
    size_t encoded_width() const;
};

struct TrialRecord {
    TrialConfig config;
    std::vector<double> run_scores;  // one validation accuracy per repeat
    double mean_score = 0.0;
};

// Maps (config, repeat index, seed) to a validation accuracy in [0,1].
using ObjectiveFn = std::function<double(const TrialConfig&, int repeat, uint64_t seed)>;

struct TuneOptions {
    int trials = 10;
    int repeats = 3;
    uint64_t seed = 0;
    double gp_lengthscale = 1.0;      // squared-exponential over one-hots
    double gp_noise = 1e-4;
    double ei_xi = 0.01;              // exploration jitter
    size_t enumeration_cap = 200000;  // sample candidates above this size
};

// Sequential Bayesian optimization: the first ceil(trials/3) proposals are
// random, the rest maximize expected improvement under a fixed-hyperparameter
// Gaussian-process surrogate fitted to the per-trial mean scores. Never
// proposes a duplicate while the space has unevaluated points. Returns all
// trial records sorted by mean score, best first.
std::vector<TrialRecord> tune(const SearchSpace& space, const ObjectiveFn& objective,
                              const TuneOptions& options);

std::string tuning_report_csv(const std::vector<TrialRecord>& records);
std::string top3_table(const std::vector<TrialRecord>& records);

// Exposed for the surrogate's own tests: exact GP regression with a
// squared-exponential kernel and fixed observation noise.
struct GaussianProcess {
    double lengthscale = 1.0;
    double noise = 1e-4;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    double y_mean = 0.0;
    std::vector<std::vector<double>> chol;  // lower factor of K + noise I
    std::vector<double> alpha;

    void fit(std::vector<std::vector<double>> xs, std::vector<double> ys);
    std::pair<double, double> predict(const std::vector<double>& q) const;  // mean, variance
};

double expected_improvement(double mean, double variance, double best, double xi);

}  // namespace stcids::hpo
