#pragma once

#include <memory>
#include <random>

#include "stcids/attention.hpp"
#include "stcids/neural.hpp"

namespace stcids::models {

using neural::Param;
using neural::ShapeMismatch;
using neural::Ten;

struct ConfigInvalid : Error {
    using Error::Error;
};
struct EmptyBatch : Error {
    using Error::Error;
};
struct LengthMismatch : Error {
    using Error::Error;
};

enum class ModelKind { SingleFrame, MultiFrame };

inline const char* kind_name(ModelKind k) {
    return k == ModelKind::SingleFrame ? "single" : "multi";
}

struct ModelConfig {
    ModelKind kind = ModelKind::SingleFrame;
    std::array<int, 3> conv_filters{16, 32, 128};
    int lstm_hidden = 64;
    int lstm_blocks = 2;  // fixed by both architectures
    int conv_blocks = 3;  // fixed by both architectures
    int dense_width = 64;
    double dropout_rate = 0.4;
    double l2_lambda = 0.0;
    int attention_reduction = 8;
    int conv_kernel = 3;
    int spatial_kernel = 2;

    void validate() const {
        if (lstm_blocks != 2) throw ConfigInvalid("lstm_blocks is fixed at 2");
        if (conv_blocks != 3) throw ConfigInvalid("conv_blocks is fixed at 3");
        for (int f : conv_filters)
            if (f <= 0) throw ConfigInvalid("conv_filters must be positive");
        if (lstm_hidden <= 0 || dense_width <= 0)
            throw ConfigInvalid("lstm_hidden and dense_width must be positive");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw ConfigInvalid("dropout_rate must be in [0,1)");
        if (l2_lambda < 0.0) throw ConfigInvalid("l2_lambda must be nonnegative");
        if (attention_reduction <= 0) throw ConfigInvalid("attention_reduction must be positive");
        if (kind == ModelKind::MultiFrame && conv_filters[1] % attention_reduction != 0)
            throw ConfigInvalid("second conv filter count must be divisible by attention_reduction");
    }

    static ModelConfig best_single_frame();  // tuned defaults for each kind
    static ModelConfig best_multi_frame();
};

inline ModelConfig ModelConfig::best_single_frame() {
    ModelConfig c;
    c.kind = ModelKind::SingleFrame;
    c.conv_filters = {16, 32, 128};
    c.dense_width = 64;
    c.dropout_rate = 0.4;
    return c;
}

inline ModelConfig ModelConfig::best_multi_frame() {
    ModelConfig c;
    c.kind = ModelKind::MultiFrame;
    c.conv_filters = {64, 16, 32};
    c.dense_width = 128;
    c.dropout_rate = 0.4;
    return c;
}

// Copy with new extents over the same row-major data.
template <class T>
Ten<T> reshaped(const Ten<T>& x, std::initializer_list<int> shape) {
    Ten<T> y;
    y.rank = static_cast<int>(shape.size());
    y.ext = {1, 1, 1, 1};
    int i = 0;
    size_t n = 1;
    for (int e : shape) {
        y.ext[i++] = e;
        n *= static_cast<size_t>(e);
    }
    if (n != x.size()) throw ShapeMismatch("reshape size mismatch");
    y.d = x.d;
    return y;
}

template <class T>
Ten<T> concat_cols(const Ten<T>& a, const Ten<T>& b) {
    if (a.rank != 2 || b.rank != 2 || a.ext[0] != b.ext[0])
        throw ShapeMismatch("concat needs matching [N,*] tensors");
    Ten<T> y({a.ext[0], a.ext[1] + b.ext[1]});
    for (int n = 0; n < a.ext[0]; ++n) {
        for (int j = 0; j < a.ext[1]; ++j) y.at(n, j) = a.at(n, j);
        for (int j = 0; j < b.ext[1]; ++j) y.at(n, a.ext[1] + j) = b.at(n, j);
    }
    return y;
}

// The A-LSTM block: hidden states reweighted by their attention coefficients,
// then dropout. Summing the block output over steps recovers the attention
// context vector (exactly so once dropout is inactive).
template <class T>
struct TemporalBlock {
    neural::Lstm<T> lstm;
    attention::TemporalAttention<T> att;
    neural::Dropout<T> drop;
    Ten<T> h_, rew_;

    TemporalBlock() = default;
    TemporalBlock(std::string name, int din, int dh, double dropout_rate, uint64_t drop_seed)
        : lstm(name + ".lstm", din, dh),
          att(name + ".att", dh, dh),
          drop(dropout_rate, drop_seed) {}

    template <class Rng>
    void init(Rng& rng) {
        lstm.init(rng);
        att.init(rng);
    }

    void collect(std::vector<Param<T>*>& out) {
        lstm.collect(out);
        att.collect(out);
    }

    const Ten<T>& weights() const { return att.weights(); }

    Ten<T> forward(const Ten<T>& x, bool train) {
        h_ = lstm.forward(x, train);
        att.forward(h_);
        const Ten<T>& a = att.weights();
        int n = h_.ext[0], steps = h_.ext[1], dh = h_.ext[2];
        rew_.reshape({n, steps, dh});
        for (int nn = 0; nn < n; ++nn)
            for (int t = 0; t < steps; ++t) {
                T w = a.at(nn, t);
                for (int j = 0; j < dh; ++j) rew_.at(nn, t, j) = w * h_.at(nn, t, j);
            }
        return drop.forward(rew_, train);
    }

    Ten<T> backward(const Ten<T>& dout) {
        Ten<T> dr = drop.backward(dout);
        const Ten<T>& a = att.weights();
        int n = h_.ext[0], steps = h_.ext[1], dh = h_.ext[2];
        Ten<T> da({n, steps});
        Ten<T> dh_dir({n, steps, dh});
        for (int nn = 0; nn < n; ++nn)
            for (int t = 0; t < steps; ++t) {
                T acc{0};
                for (int j = 0; j < dh; ++j) {
                    acc += dr.at(nn, t, j) * h_.at(nn, t, j);
                    dh_dir.at(nn, t, j) = dr.at(nn, t, j) * a.at(nn, t);
                }
                da.at(nn, t) = acc;
            }
        Ten<T> dhidden = att.backward(Ten<T>{}, da);
        for (size_t i = 0; i < dhidden.size(); ++i) dhidden.d[i] += dh_dir.d[i];
        return lstm.backward(dhidden);
    }
};

template <class T>
Ten<T> sum_over_steps(const Ten<T>& seq) {
    Ten<T> out({seq.ext[0], seq.ext[2]});
    for (int n = 0; n < seq.ext[0]; ++n)
        for (int t = 0; t < seq.ext[1]; ++t)
            for (int j = 0; j < seq.ext[2]; ++j) out.at(n, j) += seq.at(n, t, j);
    return out;
}

// Parallel byte-attention / convolution encoder over one 19-feature frame.
// The dimension shuffle reduces to exposing the byte axis as the step axis:
// [N,19] -> 19 steps of width 1.
template <class T>
struct SingleFrameNet {
    ModelConfig cfg;
    TemporalBlock<T> tb1, tb2;
    neural::Conv1d<T> c1, c2, c3;
    neural::BatchNorm<T> bn1, bn2, bn3;
    neural::ReluLayer<T> r1, r2, r3, rd;
    neural::GlobalPool<T> gp{neural::PoolKind::Max};
    neural::Dense<T> fuse, head;
    int steps_ = 19;

    explicit SingleFrameNet(const ModelConfig& config, uint64_t seed) : cfg(config) {
        const auto& f = cfg.conv_filters;
        tb1 = TemporalBlock<T>("temporal.block1", 1, cfg.lstm_hidden, cfg.dropout_rate,
                               splitmix64(seed ^ 0x11));
        tb2 = TemporalBlock<T>("temporal.block2", cfg.lstm_hidden, cfg.lstm_hidden, cfg.dropout_rate,
                               splitmix64(seed ^ 0x22));
        c1 = neural::Conv1d<T>("spatial.conv1", cfg.conv_kernel, 1, f[0]);
        bn1 = neural::BatchNorm<T>("spatial.bn1", f[0]);
        c2 = neural::Conv1d<T>("spatial.conv2", cfg.conv_kernel, f[0], f[1]);
        bn2 = neural::BatchNorm<T>("spatial.bn2", f[1]);
        c3 = neural::Conv1d<T>("spatial.conv3", cfg.conv_kernel, f[1], f[2]);
        bn3 = neural::BatchNorm<T>("spatial.bn3", f[2]);
        fuse = neural::Dense<T>("fuse", f[2] + cfg.lstm_hidden, cfg.dense_width);
        head = neural::Dense<T>("head", cfg.dense_width, 2);
        std::mt19937_64 rng(seed);
        tb1.init(rng);
        tb2.init(rng);
        c1.init(rng);
        c2.init(rng);
        c3.init(rng);
        fuse.init(rng);
        head.init(rng);
    }

    void collect(std::vector<Param<T>*>& out) {
        tb1.collect(out);
        tb2.collect(out);
        c1.collect(out);
        bn1.collect(out);
        c2.collect(out);
        bn2.collect(out);
        c3.collect(out);
        bn3.collect(out);
        fuse.collect(out);
        head.collect(out);
    }

    void collect_buffers(std::vector<std::pair<std::string, Ten<T>*>>& out) {
        out.emplace_back("spatial.bn1.running_mean", &bn1.running_mean);
        out.emplace_back("spatial.bn1.running_var", &bn1.running_var);
        out.emplace_back("spatial.bn2.running_mean", &bn2.running_mean);
        out.emplace_back("spatial.bn2.running_var", &bn2.running_var);
        out.emplace_back("spatial.bn3.running_mean", &bn3.running_mean);
        out.emplace_back("spatial.bn3.running_var", &bn3.running_var);
    }

    Ten<T> forward(const Ten<T>& x, bool train) {
        if (x.rank != 2 || x.ext[1] != steps_)
            throw ShapeMismatch("single-frame input " + x.shape_str());
        Ten<T> seq = reshaped(x, {x.ext[0], steps_, 1});
        Ten<T> temporal = sum_over_steps(tb2.forward(tb1.forward(seq, train), train));

        Ten<T> s = c1.forward(seq, train);
        s = r1.forward(bn1.forward(s, train), train);
        s = c2.forward(s, train);
        s = r2.forward(bn2.forward(s, train), train);
        s = c3.forward(s, train);
        s = r3.forward(bn3.forward(s, train), train);
        Ten<T> spatial = gp.forward(s, train);

        Ten<T> fx = rd.forward(fuse.forward(concat_cols(spatial, temporal), train), train);
        return head.forward(fx, train);
    }

    Ten<T> backward(const Ten<T>& dlogits) {
        Ten<T> dfx = rd.backward(head.backward(dlogits));
        Ten<T> dcat = fuse.backward(dfx);
        int n = dcat.ext[0];
        int fs = cfg.conv_filters[2];
        Ten<T> dspatial({n, fs});
        Ten<T> dtemporal({n, cfg.lstm_hidden});
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < fs; ++j) dspatial.at(i, j) = dcat.at(i, j);
            for (int j = 0; j < cfg.lstm_hidden; ++j) dtemporal.at(i, j) = dcat.at(i, fs + j);
        }
        Ten<T> ds = gp.backward(dspatial);
        ds = c3.backward(bn3.backward(r3.backward(ds)));
        ds = c2.backward(bn2.backward(r2.backward(ds)));
        ds = c1.backward(bn1.backward(r1.backward(ds)));

        // temporal feature was a sum over steps: broadcast back
        Ten<T> dseq({n, steps_, cfg.lstm_hidden});
        for (int i = 0; i < n; ++i)
            for (int t = 0; t < steps_; ++t)
                for (int j = 0; j < cfg.lstm_hidden; ++j) dseq.at(i, t, j) = dtemporal.at(i, j);
        Ten<T> dx_t = tb1.backward(tb2.backward(dseq));

        Ten<T> dx({n, steps_});
        for (int i = 0; i < n; ++i)
            for (int t = 0; t < steps_; ++t) dx.at(i, t) = dx_t.at(i, t, 0) + ds.at(i, t, 0);
        return dx;
    }
};

// Windowed encoder: LSTM over 64 time steps of width 19 in parallel with a
// three-block convolution stack whose second block output passes through the
// attention convolution block.
template <class T>
struct MultiFrameNet {
    ModelConfig cfg;
    TemporalBlock<T> tb1, tb2;
    neural::Conv2d<T> c1, c2, c3;
    neural::BatchNorm<T> bn1, bn2, bn3;
    neural::ReluLayer<T> r1, r2, r3, rs, rd;
    neural::Pool2d<T> p1, p2, p3;
    attention::AConv2d<T> aconv;
    neural::Dense<T> flat_dense, fuse, head;
    int rows_ = 64, cols_ = 19;
    int fh_ = 0, fw_ = 0;  // spatial extents after the third pool

    explicit MultiFrameNet(const ModelConfig& config, uint64_t seed) : cfg(config) {
        const auto& f = cfg.conv_filters;
        tb1 = TemporalBlock<T>("temporal.block1", cols_, cfg.lstm_hidden, cfg.dropout_rate,
                               splitmix64(seed ^ 0x11));
        tb2 = TemporalBlock<T>("temporal.block2", cfg.lstm_hidden, cfg.lstm_hidden, cfg.dropout_rate,
                               splitmix64(seed ^ 0x22));
        c1 = neural::Conv2d<T>("spatial.conv1", cfg.conv_kernel, 1, f[0]);
        bn1 = neural::BatchNorm<T>("spatial.bn1", f[0]);
        c2 = neural::Conv2d<T>("spatial.conv2", cfg.conv_kernel, f[0], f[1]);
        bn2 = neural::BatchNorm<T>("spatial.bn2", f[1]);
        c3 = neural::Conv2d<T>("spatial.conv3", cfg.conv_kernel, f[1], f[2]);
        bn3 = neural::BatchNorm<T>("spatial.bn3", f[2]);
        p1 = neural::Pool2d<T>(neural::PoolKind::Max, 2, 2);
        p2 = neural::Pool2d<T>(neural::PoolKind::Max, 2, 2);
        p3 = neural::Pool2d<T>(neural::PoolKind::Max, 2, 2);
        aconv = attention::AConv2d<T>("spatial.aconv", f[1], cfg.attention_reduction,
                                      cfg.spatial_kernel);

        int h = rows_, w = cols_;
        for (int i = 0; i < 3; ++i) {
            h = (h - 2) / 2 + 1;
            w = (w - 2) / 2 + 1;
        }
        fh_ = h;
        fw_ = w;
        flat_dense = neural::Dense<T>("spatial.dense", fh_ * fw_ * f[2], cfg.dense_width);
        fuse = neural::Dense<T>("fuse", cfg.dense_width + cfg.lstm_hidden, cfg.dense_width);
        head = neural::Dense<T>("head", cfg.dense_width, 2);

        std::mt19937_64 rng(seed);
        tb1.init(rng);
        tb2.init(rng);
        c1.init(rng);
        c2.init(rng);
        c3.init(rng);
        aconv.init(rng);
        flat_dense.init(rng);
        fuse.init(rng);
        head.init(rng);
    }

    void collect(std::vector<Param<T>*>& out) {
        tb1.collect(out);
        tb2.collect(out);
        c1.collect(out);
        bn1.collect(out);
        c2.collect(out);
        bn2.collect(out);
        aconv.collect(out);
        c3.collect(out);
        bn3.collect(out);
        flat_dense.collect(out);
        fuse.collect(out);
        head.collect(out);
    }

    void collect_buffers(std::vector<std::pair<std::string, Ten<T>*>>& out) {
        out.emplace_back("spatial.bn1.running_mean", &bn1.running_mean);
        out.emplace_back("spatial.bn1.running_var", &bn1.running_var);
        out.emplace_back("spatial.bn2.running_mean", &bn2.running_mean);
        out.emplace_back("spatial.bn2.running_var", &bn2.running_var);
        out.emplace_back("spatial.bn3.running_mean", &bn3.running_mean);
        out.emplace_back("spatial.bn3.running_var", &bn3.running_var);
    }

    Ten<T> forward(const Ten<T>& x, bool train) {
        if (x.rank != 3 || x.ext[1] != rows_ || x.ext[2] != cols_)
            throw ShapeMismatch("multi-frame input " + x.shape_str());
        int n = x.ext[0];
        Ten<T> temporal = sum_over_steps(tb2.forward(tb1.forward(x, train), train));

        Ten<T> s = reshaped(x, {n, rows_, cols_, 1});
        s = p1.forward(r1.forward(bn1.forward(c1.forward(s, train), train), train), train);
        s = p2.forward(r2.forward(bn2.forward(c2.forward(s, train), train), train), train);
        s = aconv.forward(s, train);
        s = p3.forward(r3.forward(bn3.forward(c3.forward(s, train), train), train), train);
        Ten<T> flat = reshaped(s, {n, fh_ * fw_ * cfg.conv_filters[2]});
        Ten<T> spatial = rs.forward(flat_dense.forward(flat, train), train);

        Ten<T> fx = rd.forward(fuse.forward(concat_cols(spatial, temporal), train), train);
        return head.forward(fx, train);
    }

    Ten<T> backward(const Ten<T>& dlogits) {
        Ten<T> dfx = rd.backward(head.backward(dlogits));
        Ten<T> dcat = fuse.backward(dfx);
        int n = dcat.ext[0];
        Ten<T> dspatial({n, cfg.dense_width});
        Ten<T> dtemporal({n, cfg.lstm_hidden});
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < cfg.dense_width; ++j) dspatial.at(i, j) = dcat.at(i, j);
            for (int j = 0; j < cfg.lstm_hidden; ++j)
                dtemporal.at(i, j) = dcat.at(i, cfg.dense_width + j);
        }
        Ten<T> dflat = flat_dense.backward(rs.backward(dspatial));
        Ten<T> ds = reshaped(dflat, {n, fh_, fw_, cfg.conv_filters[2]});
        ds = c3.backward(bn3.backward(r3.backward(p3.backward(ds))));
        ds = aconv.backward(ds);
        ds = c2.backward(bn2.backward(r2.backward(p2.backward(ds))));
        ds = c1.backward(bn1.backward(r1.backward(p1.backward(ds))));

        Ten<T> dseq({n, rows_, cfg.lstm_hidden});
        for (int i = 0; i < n; ++i)
            for (int t = 0; t < rows_; ++t)
                for (int j = 0; j < cfg.lstm_hidden; ++j) dseq.at(i, t, j) = dtemporal.at(i, j);
        Ten<T> dx_t = tb1.backward(tb2.backward(dseq));

        Ten<T> dx({n, rows_, cols_});
        for (int i = 0; i < n; ++i)
            for (int t = 0; t < rows_; ++t)
                for (int j = 0; j < cols_; ++j) dx.at(i, t, j) = dx_t.at(i, t, j) + ds.at(i, t, j, 0);
        return dx;
    }
};

template <class T>
struct Model {
    ModelConfig cfg;
    uint64_t init_seed = 0;
    std::unique_ptr<SingleFrameNet<T>> single;
    std::unique_ptr<MultiFrameNet<T>> multi;
    std::vector<Param<T>*> params_;

    Model(const ModelConfig& config, uint64_t seed) : cfg(config), init_seed(seed) {
        cfg.validate();
        if (cfg.kind == ModelKind::SingleFrame)
            single = std::make_unique<SingleFrameNet<T>>(cfg, seed);
        else
            multi = std::make_unique<MultiFrameNet<T>>(cfg, seed);
        if (single)
            single->collect(params_);
        else
            multi->collect(params_);
    }

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    const std::vector<Param<T>*>& params() { return params_; }

    std::vector<std::pair<std::string, Ten<T>*>> buffers() {
        std::vector<std::pair<std::string, Ten<T>*>> out;
        if (single)
            single->collect_buffers(out);
        else
            multi->collect_buffers(out);
        return out;
    }

    Ten<T> forward(const Ten<T>& x, bool train) {
        return single ? single->forward(x, train) : multi->forward(x, train);
    }

    Ten<T> backward(const Ten<T>& dlogits) {
        return single ? single->backward(dlogits) : multi->backward(dlogits);
    }

    void zero_grads() {
        for (auto* p : params_) p->zero_grad();
    }

    // Class probabilities in inference mode.
    Ten<T> predict(const Ten<T>& x) { return neural::softmax_rows(forward(x, false)); }

    // Step counts the temporal attention ranges over: 19 bytes or 64 frames.
    std::array<int, 2> attention_lengths() const {
        if (single) return {single->tb1.weights().ext[1], single->tb2.weights().ext[1]};
        return {multi->tb1.weights().ext[1], multi->tb2.weights().ext[1]};
    }

    // Attention coefficients of the last temporal block for the most recent
    // forward pass, [N,T]; exported by the CLI for offline inspection.
    const Ten<T>& final_attention() const {
        return single ? single->tb2.weights() : multi->tb2.weights();
    }
};

inline Model<float> build_single_frame(const ModelConfig& cfg, uint64_t seed) {
    ModelConfig c = cfg;
    c.kind = ModelKind::SingleFrame;
    return Model<float>(c, seed);
}

inline Model<float> build_multi_frame(const ModelConfig& cfg, uint64_t seed) {
    ModelConfig c = cfg;
    c.kind = ModelKind::MultiFrame;
    return Model<float>(c, seed);
}

// ---- prediction head & loss ---------------------------------------------------

// Mean binary cross-entropy of the intrusion probability against {0,1}
// labels, with probabilities clipped to [1e-7, 1-1e-7].
template <class T>
double data_loss(const Ten<T>& probs, const std::vector<int>& labels) {
    if (probs.rank != 2 || probs.ext[1] != 2) throw ShapeMismatch("probs must be [N,2]");
    size_t n = static_cast<size_t>(probs.ext[0]);
    if (n == 0) throw EmptyBatch("loss needs at least one example");
    if (labels.size() != n) throw LengthMismatch("probs/labels length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double p = std::clamp(static_cast<double>(probs.d[2 * i + 1]), 1e-7, 1.0 - 1e-7);
        acc -= labels[i] != 0 ? std::log(p) : std::log(1.0 - p);
    }
    return acc / static_cast<double>(n);
}

template <class T>
double l2_penalty(const std::vector<Param<T>*>& params, double lambda) {
    if (lambda == 0.0) return 0.0;
    double acc = 0.0;
    for (const auto* p : params)
        if (p->decay)
            for (T v : p->value.d) acc += static_cast<double>(v) * static_cast<double>(v);
    return lambda * acc;
}

// Eq: L = mean BCE + lambda * ||w||^2 over weight matrices and kernels.
template <class T>
double loss(const Ten<T>& probs, const std::vector<int>& labels,
            const std::vector<Param<T>*>& params, double lambda) {
    return data_loss(probs, labels) + l2_penalty(params, lambda);
}

// Gradient of the mean cross-entropy w.r.t. the logits: (p - onehot(y)) / N.
template <class T>
Ten<T> ce_dlogits(const Ten<T>& probs, const std::vector<int>& labels) {
    int n = probs.ext[0];
    Ten<T> d = probs;
    T inv = T{1} / static_cast<T>(n);
    for (int i = 0; i < n; ++i) {
        d.at(i, labels[static_cast<size_t>(i)] != 0 ? 1 : 0) -= T{1};
        d.at(i, 0) *= inv;
        d.at(i, 1) *= inv;
    }
    return d;
}

}  // namespace stcids::models
