#pragma once

#include "stcids/neural.hpp"

namespace stcids::attention {

using neural::matmul_a_bt_acc;
using neural::matmul_acc;
using neural::matmul_at_b_acc;
using neural::Param;
using neural::ShapeMismatch;
using neural::Ten;

// Softmax pooling of hidden states:
//   u_t = tanh(W_w h_t + b_w),  a_t = softmax_t(u_t . u_w),  v = sum_t a_t h_t
// The step index ranges over bytes for the single-frame model and over time
// for the multi-frame model; the math is index-agnostic.
template <class T>
struct TemporalAttention {
    Param<T> W_w, b_w, u_w;  // [dh,da], [da], [da]
    Ten<T> h_, u_, a_;       // caches: [N,T,dh], [N,T,da], [N,T]

    TemporalAttention() = default;
    TemporalAttention(std::string name, int dh, int da) {
        W_w.name = name + ".W_w";
        W_w.decay = true;
        W_w.init_shape({dh, da});
        b_w.name = name + ".b_w";
        b_w.init_shape({da});
        u_w.name = name + ".u_w";
        u_w.decay = true;
        u_w.init_shape({da});
    }

    template <class Rng>
    void init(Rng& rng) {
        neural::init_uniform(W_w.value, rng, 1.0 / std::sqrt(static_cast<double>(W_w.value.ext[0])));
        neural::init_uniform(u_w.value, rng, 0.05);
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&W_w);
        out.push_back(&b_w);
        out.push_back(&u_w);
    }

    // H [N,T,dh] -> fills a_ [N,T]; returns context v [N,dh].
    Ten<T> forward(const Ten<T>& h) {
        int dh = W_w.value.ext[0], da = W_w.value.ext[1];
        if (h.rank != 3 || h.ext[2] != dh) throw ShapeMismatch("attention input " + h.shape_str());
        int n = h.ext[0], steps = h.ext[1];
        h_ = h;
        u_.reshape({n, steps, da});
        for (int nn = 0; nn < n; ++nn)
            for (int t = 0; t < steps; ++t)
                for (int j = 0; j < da; ++j) u_.at(nn, t, j) = b_w.value.at(j);
        matmul_acc(h.data(), W_w.value.data(), u_.data(), n * steps, dh, da);
        for (auto& v : u_.d) v = std::tanh(v);

        Ten<T> scores({n, steps});
        for (int nn = 0; nn < n; ++nn)
            for (int t = 0; t < steps; ++t) {
                T acc{0};
                for (int j = 0; j < da; ++j) acc += u_.at(nn, t, j) * u_w.value.at(j);
                scores.at(nn, t) = acc;
            }
        a_ = neural::softmax_rows(scores);

        Ten<T> v({n, dh});
        for (int nn = 0; nn < n; ++nn)
            for (int t = 0; t < steps; ++t) {
                T w = a_.at(nn, t);
                for (int j = 0; j < dh; ++j) v.at(nn, j) += w * h.at(nn, t, j);
            }
        return v;
    }

    const Ten<T>& weights() const { return a_; }

    // Accepts gradients for both outputs (either may be zero-filled).
    Ten<T> backward(const Ten<T>& dv, const Ten<T>& da_ext) {
        int dh = W_w.value.ext[0], da = W_w.value.ext[1];
        int n = h_.ext[0], steps = h_.ext[1];

        Ten<T> dh_out({n, steps, dh});
        Ten<T> da_total = da_ext;
        if (da_total.size() == 0) da_total.reshape({n, steps});
        // v-path: dv/da_t = h_t, dv/dh_t = a_t
        if (dv.size() != 0) {
            for (int nn = 0; nn < n; ++nn)
                for (int t = 0; t < steps; ++t) {
                    T acc{0};
                    for (int j = 0; j < dh; ++j) {
                        acc += dv.at(nn, j) * h_.at(nn, t, j);
                        dh_out.at(nn, t, j) += dv.at(nn, j) * a_.at(nn, t);
                    }
                    da_total.at(nn, t) += acc;
                }
        }
        Ten<T> dscores = neural::softmax_rows_backward(a_, da_total);

        // scores -> u, u_w
        Ten<T> du({n, steps, da});
        for (int nn = 0; nn < n; ++nn)
            for (int t = 0; t < steps; ++t) {
                T ds = dscores.at(nn, t);
                for (int j = 0; j < da; ++j) {
                    du.at(nn, t, j) = ds * u_w.value.at(j);
                    u_w.grad.at(j) += ds * u_.at(nn, t, j);
                }
            }
        // through tanh
        for (size_t i = 0; i < du.size(); ++i) du.d[i] *= T{1} - u_.d[i] * u_.d[i];
        // pre-activation = h W_w + b_w
        matmul_at_b_acc(h_.data(), du.data(), W_w.grad.data(), dh, n * steps, da);
        for (int nn = 0; nn < n; ++nn)
            for (int t = 0; t < steps; ++t)
                for (int j = 0; j < da; ++j) b_w.grad.at(j) += du.at(nn, t, j);
        matmul_a_bt_acc(du.data(), W_w.value.data(), dh_out.data(), n * steps, da, dh);
        return dh_out;
    }
};

// Per-channel gate from globally pooled descriptors through a shared
// bottleneck MLP:  M_c = sigmoid(W1 relu(W0 avg) + W1 relu(W0 max)).
template <class T>
struct ChannelAttention {
    Param<T> W0, W1;  // [C, C/r], [C/r, C]
    int channels = 0, reduction = 8;
    Ten<T> f_, avg_, mx_, ha_, hm_, m_;  // caches
    std::vector<int64_t> argmax_;

    ChannelAttention() = default;
    ChannelAttention(std::string name, int c, int r) : channels(c), reduction(r) {
        if (c % r != 0) throw ShapeMismatch("channel count must be divisible by the reduction ratio");
        W0.name = name + ".W0";
        W0.decay = true;
        W0.init_shape({c, c / r});
        W1.name = name + ".W1";
        W1.decay = true;
        W1.init_shape({c / r, c});
    }

    template <class Rng>
    void init(Rng& rng) {
        neural::init_he_uniform(W0.value, rng, channels);
        neural::init_he_uniform(W1.value, rng, channels / reduction);
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&W0);
        out.push_back(&W1);
    }

    // F [N,H,W,C] -> M_c [N,C] in (0,1).
    Ten<T> forward(const Ten<T>& f) {
        if (f.rank != 4 || f.ext[3] != channels)
            throw ShapeMismatch("channel attention input " + f.shape_str());
        int n = f.ext[0];
        size_t spatial = static_cast<size_t>(f.ext[1]) * f.ext[2];
        f_ = f;
        avg_.reshape({n, channels});
        mx_.reshape({n, channels});
        argmax_.assign(static_cast<size_t>(n) * channels, 0);
        for (int nn = 0; nn < n; ++nn) {
            const T* base = f.data() + static_cast<size_t>(nn) * spatial * channels;
            for (int c = 0; c < channels; ++c) {
                T acc{0};
                T best = base[c];
                size_t best_at = c;
                for (size_t s = 0; s < spatial; ++s) {
                    T v = base[s * channels + c];
                    acc += v;
                    if (v > best) {
                        best = v;
                        best_at = s * channels + c;
                    }
                }
                avg_.at(nn, c) = acc / static_cast<T>(spatial);
                mx_.at(nn, c) = best;
                argmax_[static_cast<size_t>(nn) * channels + c] =
                    static_cast<int64_t>(static_cast<size_t>(nn) * spatial * channels + best_at);
            }
        }

        auto branch = [&](const Ten<T>& x, Ten<T>& hidden) {
            int mid = channels / reduction;
            hidden.reshape({n, mid});
            matmul_acc(x.data(), W0.value.data(), hidden.data(), n, channels, mid);
            Ten<T> out({n, channels});
            Ten<T> hr = neural::relu(hidden);
            matmul_acc(hr.data(), W1.value.data(), out.data(), n, mid, channels);
            return out;
        };
        Ten<T> za = branch(avg_, ha_);
        Ten<T> zm = branch(mx_, hm_);
        for (size_t i = 0; i < za.size(); ++i) za.d[i] += zm.d[i];
        m_ = neural::sigmoid(za);
        return m_;
    }

    const Ten<T>& gate() const { return m_; }

    Ten<T> backward(const Ten<T>& dm) {
        int n = f_.ext[0];
        int mid = channels / reduction;
        size_t spatial = static_cast<size_t>(f_.ext[1]) * f_.ext[2];
        Ten<T> dz = neural::sigmoid_backward(m_, dm);

        Ten<T> dx_pool[2];
        const Ten<T>* pools[2] = {&avg_, &mx_};
        const Ten<T>* hiddens[2] = {&ha_, &hm_};
        for (int path = 0; path < 2; ++path) {
            Ten<T> hr = neural::relu(*hiddens[path]);
            matmul_at_b_acc(hr.data(), dz.data(), W1.grad.data(), mid, n, channels);
            Ten<T> dhr({n, mid});
            matmul_a_bt_acc(dz.data(), W1.value.data(), dhr.data(), n, channels, mid);
            Ten<T> dhid = neural::relu_backward(hr, dhr);
            matmul_at_b_acc(pools[path]->data(), dhid.data(), W0.grad.data(), channels, n, mid);
            dx_pool[path].reshape({n, channels});
            matmul_a_bt_acc(dhid.data(), W0.value.data(), dx_pool[path].data(), n, mid, channels);
        }

        Ten<T> df;
        df.rank = 4;
        df.ext = f_.ext;
        df.d.assign(f_.size(), T{0});
        T inv = T{1} / static_cast<T>(spatial);
        for (int nn = 0; nn < n; ++nn) {
            T* base = df.data() + static_cast<size_t>(nn) * spatial * channels;
            for (int c = 0; c < channels; ++c) {
                T g = dx_pool[0].at(nn, c) * inv;
                for (size_t s = 0; s < spatial; ++s) base[s * channels + c] += g;
                df.d[static_cast<size_t>(argmax_[static_cast<size_t>(nn) * channels + c])] +=
                    dx_pool[1].at(nn, c);
            }
        }
        return df;
    }
};

// Per-position gate: channel-wise avg and max descriptors stacked on the
// channel axis, a same-padded convolution (pad on bottom/right for the even
// kernel), then sigmoid. No bias, so zero weights give a flat 0.5 map.
template <class T>
struct SpatialAttention {
    neural::Conv2d<T> conv;
    int channels = 0;
    Ten<T> fc_, m_;
    std::vector<int> argmax_c_;  // winning channel per (n,h,w)

    SpatialAttention() = default;
    SpatialAttention(std::string name, int c, int kernel) : conv(name + ".f", kernel, 2, 1), channels(c) {}

    template <class Rng>
    void init(Rng& rng) {
        conv.init(rng);
    }

    void collect(std::vector<Param<T>*>& out) { conv.collect(out); }

    // F_c [N,H,W,C] -> M_s [N,H,W].
    Ten<T> forward(const Ten<T>& fc) {
        if (fc.rank != 4 || fc.ext[3] != channels)
            throw ShapeMismatch("spatial attention input " + fc.shape_str());
        int n = fc.ext[0], h = fc.ext[1], w = fc.ext[2];
        fc_ = fc;
        Ten<T> desc({n, h, w, 2});
        argmax_c_.assign(static_cast<size_t>(n) * h * w, 0);
        for (int nn = 0; nn < n; ++nn)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    T acc{0};
                    T best = fc.at(nn, i, j, 0);
                    int best_c = 0;
                    for (int c = 0; c < channels; ++c) {
                        T v = fc.at(nn, i, j, c);
                        acc += v;
                        if (v > best) {
                            best = v;
                            best_c = c;
                        }
                    }
                    desc.at(nn, i, j, 0) = acc / static_cast<T>(channels);
                    desc.at(nn, i, j, 1) = best;
                    argmax_c_[(static_cast<size_t>(nn) * h + i) * w + j] = best_c;
                }
        Ten<T> pre = conv.forward(desc, false);  // [N,H,W,1]
        m_ = neural::sigmoid(pre);
        m_.rank = 3;
        m_.ext = {n, h, w, 1};
        return m_;
    }

    const Ten<T>& gate() const { return m_; }

    Ten<T> backward(const Ten<T>& dm) {
        int n = fc_.ext[0], h = fc_.ext[1], w = fc_.ext[2];
        Ten<T> dpre = neural::sigmoid_backward(m_, dm);
        dpre.rank = 4;
        dpre.ext = {n, h, w, 1};
        Ten<T> ddesc = conv.backward(dpre);
        Ten<T> dfc;
        dfc.rank = 4;
        dfc.ext = fc_.ext;
        dfc.d.assign(fc_.size(), T{0});
        T inv = T{1} / static_cast<T>(channels);
        for (int nn = 0; nn < n; ++nn)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    T ga = ddesc.at(nn, i, j, 0) * inv;
                    for (int c = 0; c < channels; ++c) dfc.at(nn, i, j, c) += ga;
                    dfc.at(nn, i, j, argmax_c_[(static_cast<size_t>(nn) * h + i) * w + j]) +=
                        ddesc.at(nn, i, j, 1);
                }
        return dfc;
    }
};

// The attention convolution block:
//   F_c = M_c(F) (x) F,  F_merge = M_s(F_c) (x) F_c.
template <class T>
struct AConv2d {
    ChannelAttention<T> channel;
    SpatialAttention<T> spatial;
    Ten<T> f_, fc_;

    AConv2d() = default;
    AConv2d(std::string name, int c, int reduction, int kernel)
        : channel(name + ".channel", c, reduction), spatial(name + ".spatial", c, kernel) {}

    template <class Rng>
    void init(Rng& rng) {
        channel.init(rng);
        spatial.init(rng);
    }

    void collect(std::vector<Param<T>*>& out) {
        channel.collect(out);
        spatial.collect(out);
    }

    Ten<T> forward(const Ten<T>& f, bool) {
        f_ = f;
        Ten<T> mc = channel.forward(f);
        int n = f.ext[0], h = f.ext[1], w = f.ext[2], c = f.ext[3];
        fc_ = f;
        for (int nn = 0; nn < n; ++nn)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    for (int ch = 0; ch < c; ++ch) fc_.at(nn, i, j, ch) *= mc.at(nn, ch);
        Ten<T> ms = spatial.forward(fc_);
        Ten<T> merged = fc_;
        for (int nn = 0; nn < n; ++nn)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    T g = ms.at(nn, i, j);
                    for (int ch = 0; ch < c; ++ch) merged.at(nn, i, j, ch) *= g;
                }
        return merged;
    }

    Ten<T> backward(const Ten<T>& dmerged) {
        int n = f_.ext[0], h = f_.ext[1], w = f_.ext[2], c = f_.ext[3];
        const Ten<T>& ms = spatial.gate();
        const Ten<T>& mc = channel.gate();

        Ten<T> dfc({n, h, w, c});
        dfc.rank = 4;
        dfc.ext = f_.ext;
        Ten<T> dms({n, h, w});
        for (int nn = 0; nn < n; ++nn)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    T g = ms.at(nn, i, j);
                    T acc{0};
                    for (int ch = 0; ch < c; ++ch) {
                        acc += dmerged.at(nn, i, j, ch) * fc_.at(nn, i, j, ch);
                        dfc.at(nn, i, j, ch) = dmerged.at(nn, i, j, ch) * g;
                    }
                    dms.at(nn, i, j) = acc;
                }
        Ten<T> dfc_from_ms = spatial.backward(dms);
        for (size_t i = 0; i < dfc.size(); ++i) dfc.d[i] += dfc_from_ms.d[i];

        Ten<T> df({n, h, w, c});
        df.rank = 4;
        df.ext = f_.ext;
        Ten<T> dmc({n, c});
        for (int nn = 0; nn < n; ++nn)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    for (int ch = 0; ch < c; ++ch) {
                        dmc.at(nn, ch) += dfc.at(nn, i, j, ch) * f_.at(nn, i, j, ch);
                        df.at(nn, i, j, ch) = dfc.at(nn, i, j, ch) * mc.at(nn, ch);
                    }
        Ten<T> df_from_mc = channel.backward(dmc);
        for (size_t i = 0; i < df.size(); ++i) df.d[i] += df_from_mc.d[i];
        return df;
    }
};

}  // namespace stcids::attention
