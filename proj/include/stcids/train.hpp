#pragma once

#include <functional>
#include <optional>

#include "stcids/dataset.hpp"
#include "stcids/models.hpp"

namespace stcids::train {

struct Diverged : Error {
    using Error::Error;
    // loss went NaN/Inf; the history up to the failing epoch rides along
    std::vector<double> partial_train_loss;
};

enum class OptimizerKind { Adam, SGD, RMSprop };

const char* optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& name);

struct Hyperparameters {
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double dropout_rate = 0.4;
    std::array<int, 3> conv_filters{64, 16, 32};
    int dense_width = 128;
    int batch_size = 256;
    int max_epochs = 30;
    double l2_lambda = 0.0;
    uint64_t seed = 0;
    int patience = 10;          // early stopping
    double min_delta = 1e-4;
    double clip_norm = 5.0;     // global gradient-norm ceiling
    int lstm_hidden = 64;
};

models::ModelConfig make_config(const Hyperparameters& hp, models::ModelKind kind);

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_acc;
    int best_epoch = 0;     // 1-based epoch of the best validation loss
    int stopped_epoch = 0;  // last completed epoch

    size_t epochs() const { return train_loss.size(); }
    std::string to_csv() const;
};

// One update for every trainable parameter. SGD: theta -= lr * g.
// Adam: bias-corrected moments, beta = (0.9, 0.999), eps = 1e-8.
// RMSprop: decay 0.9, eps = 1e-8.
template <class T = float>
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

    void step(const std::vector<neural::Param<T>*>& params) {
        if (state_.empty()) {
            state_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                state_[i].m.assign(params[i]->value.size(), T{0});
                state_[i].v.assign(params[i]->value.size(), T{0});
            }
        }
        ++t_;
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i]->value.d;
            auto& g = params[i]->grad.d;
            if (p.size() != g.size() || p.size() != state_[i].m.size())
                throw neural::ShapeMismatch("optimizer state/parameter shape mismatch");
            auto& st = state_[i];
            switch (kind_) {
                case OptimizerKind::SGD:
                    for (size_t j = 0; j < p.size(); ++j)
                        p[j] -= static_cast<T>(lr_) * g[j];
                    break;
                case OptimizerKind::Adam: {
                    double bc1 = 1.0 - std::pow(0.9, t_);
                    double bc2 = 1.0 - std::pow(0.999, t_);
                    for (size_t j = 0; j < p.size(); ++j) {
                        st.m[j] = static_cast<T>(0.9) * st.m[j] + static_cast<T>(0.1) * g[j];
                        st.v[j] = static_cast<T>(0.999) * st.v[j] + static_cast<T>(0.001) * g[j] * g[j];
                        double mhat = st.m[j] / bc1;
                        double vhat = st.v[j] / bc2;
                        p[j] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + 1e-8));
                    }
                    break;
                }
                case OptimizerKind::RMSprop:
                    for (size_t j = 0; j < p.size(); ++j) {
                        st.v[j] = static_cast<T>(0.9) * st.v[j] + static_cast<T>(0.1) * g[j] * g[j];
                        p[j] -= static_cast<T>(lr_ * g[j] /
                                               (std::sqrt(static_cast<double>(st.v[j])) + 1e-8));
                    }
                    break;
            }
        }
    }

private:
    struct PerParam {
        std::vector<T> m, v;
    };
    OptimizerKind kind_;
    double lr_;
    std::vector<PerParam> state_;
    int64_t t_ = 0;
};

// Scales all gradients so their global L2 norm is at most `max_norm`.
template <class T>
void clip_global_norm(const std::vector<neural::Param<T>*>& params, double max_norm) {
    double sq = 0.0;
    for (auto* p : params)
        for (T g : p->grad.d) sq += static_cast<double>(g) * static_cast<double>(g);
    double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    T scale = static_cast<T>(max_norm / norm);
    for (auto* p : params)
        for (T& g : p->grad.d) g *= scale;
}

// Mini-batch training with per-epoch validation and early stopping
// (patience/min-delta on validation loss); returns the history and leaves
// the model holding its best-validation weights. Expects normalized data.
TrainHistory fit(models::Model<float>& model, const dataset::Dataset& train_data,
                 const std::vector<size_t>& train_idx, const dataset::Dataset& val_data,
                 const std::vector<size_t>& val_idx, const Hyperparameters& hp);

TrainHistory fit(models::Model<float>& model, const dataset::Dataset& train_data,
                 const dataset::Dataset& val_data, const Hyperparameters& hp);

// Inference over an index set in fixed batches; returns intrusion
// probabilities aligned with `idx`.
std::vector<double> predict_probs(models::Model<float>& model, const dataset::Dataset& data,
                                  const std::vector<size_t>& idx, int batch_size = 256);

std::vector<int> predict_labels(models::Model<float>& model, const dataset::Dataset& data,
                                const std::vector<size_t>& idx, int batch_size = 256);

}  // namespace stcids::train
