#include "stcids/train.hpp"

#include <numeric>
#include <random>
#include <sstream>

namespace stcids::train {

const char* optimizer_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::SGD: return "sgd";
        default: return "rmsprop";
    }
}

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "adam" || name == "Adam") return OptimizerKind::Adam;
    if (name == "sgd" || name == "SGD") return OptimizerKind::SGD;
    if (name == "rmsprop" || name == "RMSprop") return OptimizerKind::RMSprop;
    throw ConfigError("unknown optimizer: " + name);
}

models::ModelConfig make_config(const Hyperparameters& hp, models::ModelKind kind) {
    models::ModelConfig cfg =
        kind == models::ModelKind::SingleFrame ? models::ModelConfig::best_single_frame()
                                               : models::ModelConfig::best_multi_frame();
    cfg.conv_filters = hp.conv_filters;
    cfg.dense_width = hp.dense_width;
    cfg.dropout_rate = hp.dropout_rate;
    cfg.l2_lambda = hp.l2_lambda;
    cfg.lstm_hidden = hp.lstm_hidden;
    return cfg;
}

std::string TrainHistory::to_csv() const {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,val_acc\n";
    for (size_t e = 0; e < train_loss.size(); ++e)
        out << (e + 1) << ',' << format_double(train_loss[e]) << ',' << format_double(val_loss[e])
            << ',' << format_double(val_acc[e]) << '\n';
    return out.str();
}

namespace {

std::vector<int> gather_labels(const dataset::Dataset& ds, const std::vector<size_t>& idx,
                               size_t begin, size_t end) {
    std::vector<int> out(end - begin);
    for (size_t i = begin; i < end; ++i) out[i - begin] = ds.y[idx[i]];
    return out;
}

struct ValScore {
    double loss = 0.0;
    double acc = 0.0;
};

ValScore evaluate(models::Model<float>& model, const dataset::Dataset& ds,
                  const std::vector<size_t>& idx, int batch_size) {
    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t b = 0; b < idx.size(); b += static_cast<size_t>(batch_size)) {
        size_t e = std::min(idx.size(), b + static_cast<size_t>(batch_size));
        auto x = dataset::gather(ds, idx, b, e);
        auto labels = gather_labels(ds, idx, b, e);
        auto probs = model.predict(x);
        loss_sum += models::data_loss(probs, labels) * static_cast<double>(e - b);
        for (size_t i = 0; i < labels.size(); ++i) {
            int pred = probs.at(static_cast<int>(i), 1) > 0.5f ? 1 : 0;
            if (pred == labels[i]) ++correct;
        }
    }
    ValScore v;
    v.loss = loss_sum / static_cast<double>(idx.size());
    v.acc = static_cast<double>(correct) / static_cast<double>(idx.size());
    return v;
}

}  // namespace

TrainHistory fit(models::Model<float>& model, const dataset::Dataset& train_data,
                 const std::vector<size_t>& train_idx, const dataset::Dataset& val_data,
                 const std::vector<size_t>& val_idx, const Hyperparameters& hp) {
    if (train_idx.empty() || val_idx.empty()) throw models::EmptyBatch("fit needs non-empty splits");
    if (hp.batch_size < 1) throw ConfigError("batch_size must be >= 1");

    Optimizer<float> opt(hp.optimizer, hp.learning_rate);
    std::mt19937_64 rng(hp.seed);
    TrainHistory history;

    auto& params = model.params();
    auto buffers = model.buffers();
    std::vector<std::vector<float>> best_weights, best_buffers;
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<size_t> order = train_idx;
    for (int epoch = 1; epoch <= hp.max_epochs; ++epoch) {
        shuffle_indices(order, rng);
        double loss_sum = 0.0;
        size_t seen = 0;
        for (size_t b = 0; b < order.size(); b += static_cast<size_t>(hp.batch_size)) {
            size_t e = std::min(order.size(), b + static_cast<size_t>(hp.batch_size));
            if (e - b < 2 && e > 1) b = e - 2;  // batch-norm needs at least two rows
            auto x = dataset::gather(train_data, order, b, e);
            auto labels = gather_labels(train_data, order, b, e);

            model.zero_grads();
            auto logits = model.forward(x, true);
            auto probs = neural::softmax_rows(logits);
            double batch_loss = models::loss(probs, labels, params, hp.l2_lambda);
            if (!std::isfinite(batch_loss)) {
                Diverged err("training loss became non-finite at epoch " + std::to_string(epoch));
                err.partial_train_loss = history.train_loss;
                throw err;
            }
            loss_sum += batch_loss * static_cast<double>(e - b);
            seen += e - b;

            model.backward(models::ce_dlogits(probs, labels));
            if (hp.l2_lambda > 0.0)
                for (auto* p : params)
                    if (p->decay)
                        for (size_t j = 0; j < p->value.size(); ++j)
                            p->grad.d[j] += static_cast<float>(2.0 * hp.l2_lambda) * p->value.d[j];
            clip_global_norm(params, hp.clip_norm);
            opt.step(params);
        }

        ValScore v = evaluate(model, val_data, val_idx, hp.batch_size);
        history.train_loss.push_back(loss_sum / static_cast<double>(seen));
        history.val_loss.push_back(v.loss);
        history.val_acc.push_back(v.acc);
        history.stopped_epoch = epoch;

        if (v.loss < best_val - hp.min_delta) {
            best_val = v.loss;
            history.best_epoch = epoch;
            best_weights.clear();
            best_buffers.clear();
            for (auto* p : params) best_weights.push_back(p->value.d);
            for (auto& [name, t] : buffers) best_buffers.push_back(t->d);
        } else if (epoch - history.best_epoch >= hp.patience) {
            break;
        }
    }

    if (!best_weights.empty()) {
        for (size_t i = 0; i < params.size(); ++i) params[i]->value.d = best_weights[i];
        for (size_t i = 0; i < buffers.size(); ++i) buffers[i].second->d = best_buffers[i];
    }
    return history;
}

TrainHistory fit(models::Model<float>& model, const dataset::Dataset& train_data,
                 const dataset::Dataset& val_data, const Hyperparameters& hp) {
    std::vector<size_t> ti(train_data.count), vi(val_data.count);
    std::iota(ti.begin(), ti.end(), 0);
    std::iota(vi.begin(), vi.end(), 0);
    return fit(model, train_data, ti, val_data, vi, hp);
}

std::vector<double> predict_probs(models::Model<float>& model, const dataset::Dataset& data,
                                  const std::vector<size_t>& idx, int batch_size) {
    std::vector<double> probs;
    probs.reserve(idx.size());
    for (size_t b = 0; b < idx.size(); b += static_cast<size_t>(batch_size)) {
        size_t e = std::min(idx.size(), b + static_cast<size_t>(batch_size));
        auto x = dataset::gather(data, idx, b, e);
        auto p = model.predict(x);
        for (int i = 0; i < p.ext[0]; ++i) probs.push_back(p.at(i, 1));
    }
    return probs;
}

std::vector<int> predict_labels(models::Model<float>& model, const dataset::Dataset& data,
                                const std::vector<size_t>& idx, int batch_size) {
    auto probs = predict_probs(model, data, idx, batch_size);
    std::vector<int> labels(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) labels[i] = probs[i] > 0.5 ? 1 : 0;
    return labels;
}

}  // namespace stcids::train
