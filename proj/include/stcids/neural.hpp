#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "stcids/tensor.hpp"

namespace stcids::neural {

struct DegenerateBatch : Error {
    using Error::Error;
};
struct InvalidRate : Error {
    using Error::Error;
};

enum class Padding { Same, Valid };

inline int conv_out_extent(int in, int k, int stride, Padding pad) {
    int out = pad == Padding::Same ? (in + stride - 1) / stride : (in - k) / stride + 1;
    if (out <= 0 || (pad == Padding::Valid && in < k))
        throw ShapeMismatch("convolution output extent is not positive");
    return out;
}

// TensorFlow-style SAME padding: the extra element of an odd total goes to
// the end, so an even kernel pads only bottom/right.
inline int pad_begin(int in, int out, int k, int stride) {
    int total = (out - 1) * stride + k - in;
    if (total < 0) total = 0;
    return total / 2;
}

// ---- weight init -------------------------------------------------------------

template <class T, class Rng>
void init_uniform(Ten<T>& t, Rng& rng, double limit) {
    for (auto& v : t.d) v = static_cast<T>(draw_uniform(rng, -limit, limit));
}

template <class T, class Rng>
void init_he_uniform(Ten<T>& t, Rng& rng, int fan_in) {
    init_uniform(t, rng, std::sqrt(6.0 / fan_in));
}

// ---- activations (elementwise forward/backward pairs) -------------------------

template <class T>
Ten<T> relu(const Ten<T>& x) {
    Ten<T> y = x;
    for (auto& v : y.d) v = v > T{0} ? v : T{0};
    return y;
}

template <class T>
Ten<T> relu_backward(const Ten<T>& y, const Ten<T>& dy) {
    Ten<T> dx = dy;
    for (size_t i = 0; i < dx.size(); ++i)
        if (y.d[i] <= T{0}) dx.d[i] = T{0};
    return dx;
}

template <class T>
T sigmoid_scalar(T v) {
    return v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
}

template <class T>
Ten<T> sigmoid(const Ten<T>& x) {
    Ten<T> y = x;
    for (auto& v : y.d) v = sigmoid_scalar(v);
    return y;
}

template <class T>
Ten<T> sigmoid_backward(const Ten<T>& y, const Ten<T>& dy) {
    Ten<T> dx = dy;
    for (size_t i = 0; i < dx.size(); ++i) dx.d[i] *= y.d[i] * (T{1} - y.d[i]);
    return dx;
}

template <class T>
Ten<T> tanh_act(const Ten<T>& x) {
    Ten<T> y = x;
    for (auto& v : y.d) v = std::tanh(v);
    return y;
}

template <class T>
Ten<T> tanh_backward(const Ten<T>& y, const Ten<T>& dy) {
    Ten<T> dx = dy;
    for (size_t i = 0; i < dx.size(); ++i) dx.d[i] *= T{1} - y.d[i] * y.d[i];
    return dx;
}

// Row-wise softmax with max subtraction; x is [N,D] (or any shape whose last
// axis is the distribution axis).
template <class T>
Ten<T> softmax_rows(const Ten<T>& x) {
    Ten<T> y = x;
    int cols = x.ext[x.rank - 1];
    size_t rows = x.size() / cols;
    for (size_t r = 0; r < rows; ++r) {
        T* row = y.data() + r * cols;
        T mx = row[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        T sum{0};
        for (int j = 0; j < cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < cols; ++j) row[j] /= sum;
    }
    return y;
}

template <class T>
Ten<T> softmax_rows_backward(const Ten<T>& y, const Ten<T>& dy) {
    Ten<T> dx = dy;
    int cols = y.ext[y.rank - 1];
    size_t rows = y.size() / cols;
    for (size_t r = 0; r < rows; ++r) {
        const T* yr = y.data() + r * cols;
        const T* dyr = dy.data() + r * cols;
        T* dxr = dx.data() + r * cols;
        T dot{0};
        for (int j = 0; j < cols; ++j) dot += yr[j] * dyr[j];
        for (int j = 0; j < cols; ++j) dxr[j] = (dyr[j] - dot) * yr[j];
    }
    return dx;
}

// ---- layers -------------------------------------------------------------------

// y = x W + b on [N,din].
template <class T>
struct Dense {
    Param<T> W, b;
    Ten<T> x_;

    Dense() = default;
    Dense(std::string name, int din, int dout) {
        W.name = name + ".W";
        W.decay = true;
        W.init_shape({din, dout});
        b.name = name + ".b";
        b.init_shape({dout});
    }

    template <class Rng>
    void init(Rng& rng) {
        init_he_uniform(W.value, rng, W.value.ext[0]);
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&W);
        out.push_back(&b);
    }

    Ten<T> forward(const Ten<T>& x, bool) {
        int din = W.value.ext[0], dout = W.value.ext[1];
        if (x.rank != 2 || x.ext[1] != din)
            throw ShapeMismatch("dense input " + x.shape_str());
        x_ = x;
        Ten<T> y({x.ext[0], dout});
        for (int n = 0; n < x.ext[0]; ++n)
            for (int j = 0; j < dout; ++j) y.at(n, j) = b.value.at(j);
        matmul_acc(x.data(), W.value.data(), y.data(), x.ext[0], din, dout);
        return y;
    }

    Ten<T> backward(const Ten<T>& dy) {
        int din = W.value.ext[0], dout = W.value.ext[1];
        int n = x_.ext[0];
        Ten<T> dx({n, din});
        matmul_a_bt_acc(dy.data(), W.value.data(), dx.data(), n, dout, din);
        matmul_at_b_acc(x_.data(), dy.data(), W.grad.data(), din, n, dout);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dout; ++j) b.grad.at(j) += dy.at(i, j);
        return dx;
    }
};

// Cross-correlation over [N,L,Cin] with kernels [k,Cin,Cout]; no bias term
// (a batch-norm layer follows every convolution in both models).
template <class T>
struct Conv1d {
    Param<T> K;
    int k = 3, stride = 1;
    Padding padding = Padding::Same;
    Ten<T> x_;

    Conv1d() = default;
    Conv1d(std::string name, int kernel, int cin, int cout, int stride_ = 1,
           Padding pad = Padding::Same)
        : k(kernel), stride(stride_), padding(pad) {
        K.name = name + ".K";
        K.decay = true;
        K.init_shape({kernel, cin, cout});
    }

    template <class Rng>
    void init(Rng& rng) {
        init_he_uniform(K.value, rng, k * K.value.ext[1]);
    }

    void collect(std::vector<Param<T>*>& out) { out.push_back(&K); }
    size_t param_count() const { return K.value.size(); }

    Ten<T> forward(const Ten<T>& x, bool) {
        int cin = K.value.ext[1], cout = K.value.ext[2];
        if (x.rank != 3 || x.ext[2] != cin) throw ShapeMismatch("conv1d input " + x.shape_str());
        int n = x.ext[0], len = x.ext[1];
        int lout = conv_out_extent(len, k, stride, padding);
        int pb = padding == Padding::Same ? pad_begin(len, lout, k, stride) : 0;
        x_ = x;
        Ten<T> y({n, lout, cout});
        parallel_for(static_cast<size_t>(n), [&](size_t n0, size_t n1) {
            for (size_t nn = n0; nn < n1; ++nn)
                for (int ol = 0; ol < lout; ++ol) {
                    T* yrow = &y.at(static_cast<int>(nn), ol, 0);
                    for (int dl = 0; dl < k; ++dl) {
                        int il = ol * stride + dl - pb;
                        if (il < 0 || il >= len) continue;
                        const T* xrow = &x.at(static_cast<int>(nn), il, 0);
                        for (int ci = 0; ci < cin; ++ci) {
                            T a = xrow[ci];
                            if (a == T{0}) continue;
                            const T* krow = &K.value.at(dl, ci, 0);
                            for (int co = 0; co < cout; ++co) yrow[co] += a * krow[co];
                        }
                    }
                }
        });
        return y;
    }

    Ten<T> backward(const Ten<T>& dy) {
        int cin = K.value.ext[1], cout = K.value.ext[2];
        int n = x_.ext[0], len = x_.ext[1], lout = dy.ext[1];
        int pb = padding == Padding::Same ? pad_begin(len, lout, k, stride) : 0;
        Ten<T> dx({n, len, cin});
        parallel_for(static_cast<size_t>(n), [&](size_t n0, size_t n1) {
            for (size_t nn = n0; nn < n1; ++nn)
                for (int ol = 0; ol < lout; ++ol) {
                    const T* dyrow = &dy.at(static_cast<int>(nn), ol, 0);
                    for (int dl = 0; dl < k; ++dl) {
                        int il = ol * stride + dl - pb;
                        if (il < 0 || il >= len) continue;
                        T* dxrow = &dx.at(static_cast<int>(nn), il, 0);
                        for (int ci = 0; ci < cin; ++ci) {
                            const T* krow = &K.value.at(dl, ci, 0);
                            T acc{0};
                            for (int co = 0; co < cout; ++co) acc += dyrow[co] * krow[co];
                            dxrow[ci] += acc;
                        }
                    }
                }
        });
        // dK sharded over the kernel tap axis: disjoint writes, fixed order.
        parallel_for(static_cast<size_t>(k), [&](size_t k0, size_t k1) {
            for (size_t dl = k0; dl < k1; ++dl)
                for (int nn = 0; nn < n; ++nn)
                    for (int ol = 0; ol < lout; ++ol) {
                        int il = ol * stride + static_cast<int>(dl) - pb;
                        if (il < 0 || il >= len) continue;
                        const T* dyrow = &dy.at(nn, ol, 0);
                        const T* xrow = &x_.at(nn, il, 0);
                        for (int ci = 0; ci < cin; ++ci) {
                            T a = xrow[ci];
                            if (a == T{0}) continue;
                            T* krow = &K.grad.at(static_cast<int>(dl), ci, 0);
                            for (int co = 0; co < cout; ++co) krow[co] += a * dyrow[co];
                        }
                    }
        });
        return dx;
    }
};

// Cross-correlation over [N,H,W,Cin] with kernels [k,k,Cin,Cout]; no bias.
template <class T>
struct Conv2d {
    Param<T> K;
    int k = 3, stride = 1;
    Padding padding = Padding::Same;
    Ten<T> x_;

    Conv2d() = default;
    Conv2d(std::string name, int kernel, int cin, int cout, int stride_ = 1,
           Padding pad = Padding::Same)
        : k(kernel), stride(stride_), padding(pad) {
        K.name = name + ".K";
        K.decay = true;
        K.init_shape({kernel, kernel, cin, cout});
    }

    template <class Rng>
    void init(Rng& rng) {
        init_he_uniform(K.value, rng, k * k * K.value.ext[2]);
    }

    void collect(std::vector<Param<T>*>& out) { out.push_back(&K); }
    size_t param_count() const { return K.value.size(); }

    Ten<T> forward(const Ten<T>& x, bool) {
        int cin = K.value.ext[2], cout = K.value.ext[3];
        if (x.rank != 4 || x.ext[3] != cin) throw ShapeMismatch("conv2d input " + x.shape_str());
        int n = x.ext[0], h = x.ext[1], w = x.ext[2];
        int ho = conv_out_extent(h, k, stride, padding);
        int wo = conv_out_extent(w, k, stride, padding);
        int ph = padding == Padding::Same ? pad_begin(h, ho, k, stride) : 0;
        int pw = padding == Padding::Same ? pad_begin(w, wo, k, stride) : 0;
        x_ = x;
        Ten<T> y({n, ho, wo, cout});
        parallel_for(static_cast<size_t>(n), [&](size_t n0, size_t n1) {
            for (size_t nn = n0; nn < n1; ++nn)
                for (int oi = 0; oi < ho; ++oi)
                    for (int oj = 0; oj < wo; ++oj) {
                        T* yrow = &y.at(static_cast<int>(nn), oi, oj, 0);
                        for (int di = 0; di < k; ++di) {
                            int ii = oi * stride + di - ph;
                            if (ii < 0 || ii >= h) continue;
                            for (int dj = 0; dj < k; ++dj) {
                                int jj = oj * stride + dj - pw;
                                if (jj < 0 || jj >= w) continue;
                                const T* xrow = &x.at(static_cast<int>(nn), ii, jj, 0);
                                for (int ci = 0; ci < cin; ++ci) {
                                    T a = xrow[ci];
                                    if (a == T{0}) continue;
                                    const T* krow = &K.value.at(di, dj, ci, 0);
                                    for (int co = 0; co < cout; ++co) yrow[co] += a * krow[co];
                                }
                            }
                        }
                    }
        });
        return y;
    }

    Ten<T> backward(const Ten<T>& dy) {
        int cin = K.value.ext[2], cout = K.value.ext[3];
        int n = x_.ext[0], h = x_.ext[1], w = x_.ext[2];
        int ho = dy.ext[1], wo = dy.ext[2];
        int ph = padding == Padding::Same ? pad_begin(h, ho, k, stride) : 0;
        int pw = padding == Padding::Same ? pad_begin(w, wo, k, stride) : 0;
        Ten<T> dx({n, h, w, cin});
        parallel_for(static_cast<size_t>(n), [&](size_t n0, size_t n1) {
            for (size_t nn = n0; nn < n1; ++nn)
                for (int oi = 0; oi < ho; ++oi)
                    for (int oj = 0; oj < wo; ++oj) {
                        const T* dyrow = &dy.at(static_cast<int>(nn), oi, oj, 0);
                        for (int di = 0; di < k; ++di) {
                            int ii = oi * stride + di - ph;
                            if (ii < 0 || ii >= h) continue;
                            for (int dj = 0; dj < k; ++dj) {
                                int jj = oj * stride + dj - pw;
                                if (jj < 0 || jj >= w) continue;
                                T* dxrow = &dx.at(static_cast<int>(nn), ii, jj, 0);
                                for (int ci = 0; ci < cin; ++ci) {
                                    const T* krow = &K.value.at(di, dj, ci, 0);
                                    T acc{0};
                                    for (int co = 0; co < cout; ++co) acc += dyrow[co] * krow[co];
                                    dxrow[ci] += acc;
                                }
                            }
                        }
                    }
        });
        parallel_for(static_cast<size_t>(k), [&](size_t k0, size_t k1) {
            for (size_t di = k0; di < k1; ++di)
                for (int dj = 0; dj < k; ++dj)
                    for (int nn = 0; nn < n; ++nn)
                        for (int oi = 0; oi < ho; ++oi) {
                            int ii = oi * stride + static_cast<int>(di) - ph;
                            if (ii < 0 || ii >= h) continue;
                            for (int oj = 0; oj < wo; ++oj) {
                                int jj = oj * stride + dj - pw;
                                if (jj < 0 || jj >= w) continue;
                                const T* dyrow = &dy.at(nn, oi, oj, 0);
                                const T* xrow = &x_.at(nn, ii, jj, 0);
                                for (int ci = 0; ci < cin; ++ci) {
                                    T a = xrow[ci];
                                    if (a == T{0}) continue;
                                    T* krow = &K.grad.at(static_cast<int>(di), dj, ci, 0);
                                    for (int co = 0; co < cout; ++co) krow[co] += a * dyrow[co];
                                }
                            }
                        }
        });
        return dx;
    }
};

// Per-channel batch normalization over every non-channel position. The
// channel axis is always the trailing axis. Keeps running statistics for
// inference (momentum 0.9, epsilon 1e-5).
template <class T>
struct BatchNorm {
    Param<T> gamma, beta;
    Ten<T> running_mean, running_var;
    T eps = static_cast<T>(1e-5);
    T momentum = static_cast<T>(0.9);
    Ten<T> xhat_;
    std::vector<T> inv_std_;
    bool train_mode_ = false;

    BatchNorm() = default;
    BatchNorm(std::string name, int channels) {
        gamma.name = name + ".gamma";
        gamma.init_shape({channels});
        gamma.value.fill(T{1});
        beta.name = name + ".beta";
        beta.init_shape({channels});
        running_mean.reshape({channels});
        running_var.reshape({channels});
        running_var.fill(T{1});
    }

    template <class Rng>
    void init(Rng&) {}

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }

    Ten<T> forward(const Ten<T>& x, bool train) {
        int c = gamma.value.ext[0];
        if (x.ext[x.rank - 1] != c) throw ShapeMismatch("batchnorm input " + x.shape_str());
        size_t m = x.size() / c;
        train_mode_ = train;
        Ten<T> y = x;
        if (train) {
            if (x.ext[0] < 2) throw DegenerateBatch("batchnorm needs batch size >= 2 in train mode");
            std::vector<T> mean(c, T{0}), var(c, T{0});
            const T* xd = x.data();
            for (size_t r = 0; r < m; ++r)
                for (int j = 0; j < c; ++j) mean[j] += xd[r * c + j];
            for (int j = 0; j < c; ++j) mean[j] /= static_cast<T>(m);
            for (size_t r = 0; r < m; ++r)
                for (int j = 0; j < c; ++j) {
                    T dvl = xd[r * c + j] - mean[j];
                    var[j] += dvl * dvl;
                }
            for (int j = 0; j < c; ++j) var[j] /= static_cast<T>(m);

            inv_std_.assign(c, T{0});
            for (int j = 0; j < c; ++j) inv_std_[j] = T{1} / std::sqrt(var[j] + eps);
            xhat_ = x;
            T* xh = xhat_.data();
            for (size_t r = 0; r < m; ++r)
                for (int j = 0; j < c; ++j) xh[r * c + j] = (xd[r * c + j] - mean[j]) * inv_std_[j];
            T* yd = y.data();
            for (size_t r = 0; r < m; ++r)
                for (int j = 0; j < c; ++j)
                    yd[r * c + j] = gamma.value.at(j) * xh[r * c + j] + beta.value.at(j);
            for (int j = 0; j < c; ++j) {
                running_mean.at(j) = momentum * running_mean.at(j) + (T{1} - momentum) * mean[j];
                running_var.at(j) = momentum * running_var.at(j) + (T{1} - momentum) * var[j];
            }
        } else {
            std::vector<T> scale(c), shift(c);
            for (int j = 0; j < c; ++j) {
                scale[j] = gamma.value.at(j) / std::sqrt(running_var.at(j) + eps);
                shift[j] = beta.value.at(j) - scale[j] * running_mean.at(j);
            }
            T* yd = y.data();
            const T* xd = x.data();
            for (size_t r = 0; r < m; ++r)
                for (int j = 0; j < c; ++j) yd[r * c + j] = scale[j] * xd[r * c + j] + shift[j];
        }
        return y;
    }

    Ten<T> backward(const Ten<T>& dy) {
        if (!train_mode_) throw Error("batchnorm backward requires a train-mode forward");
        int c = gamma.value.ext[0];
        size_t m = dy.size() / c;
        std::vector<T> dbeta(c, T{0}), dgamma(c, T{0});
        const T* dyd = dy.data();
        const T* xh = xhat_.data();
        for (size_t r = 0; r < m; ++r)
            for (int j = 0; j < c; ++j) {
                dbeta[j] += dyd[r * c + j];
                dgamma[j] += dyd[r * c + j] * xh[r * c + j];
            }
        for (int j = 0; j < c; ++j) {
            beta.grad.at(j) += dbeta[j];
            gamma.grad.at(j) += dgamma[j];
        }
        Ten<T> dx = dy;
        T* dxd = dx.data();
        T inv_m = T{1} / static_cast<T>(m);
        for (size_t r = 0; r < m; ++r)
            for (int j = 0; j < c; ++j)
                dxd[r * c + j] =
                    gamma.value.at(j) * inv_std_[j] *
                    (dyd[r * c + j] - dbeta[j] * inv_m - xh[r * c + j] * dgamma[j] * inv_m);
        return dx;
    }
};

enum class PoolKind { Max, Avg };

// Windowed pooling over the two spatial axes of [N,H,W,C].
template <class T>
struct Pool2d {
    PoolKind kind = PoolKind::Max;
    int window = 2, stride = 2;
    std::vector<int64_t> argmax_;
    std::array<int, 4> in_ext_{};
    int in_rank_ = 0;

    Pool2d() = default;
    Pool2d(PoolKind kind_, int window_, int stride_) : kind(kind_), window(window_), stride(stride_) {}

    template <class Rng>
    void init(Rng&) {}
    void collect(std::vector<Param<T>*>&) {}

    Ten<T> forward(const Ten<T>& x, bool) {
        if (x.rank != 4) throw ShapeMismatch("pool2d input " + x.shape_str());
        int n = x.ext[0], h = x.ext[1], w = x.ext[2], c = x.ext[3];
        if (window > h || window > w) throw ShapeMismatch("pool window larger than input");
        int ho = (h - window) / stride + 1;
        int wo = (w - window) / stride + 1;
        in_ext_ = x.ext;
        in_rank_ = x.rank;
        Ten<T> y({n, ho, wo, c});
        if (kind == PoolKind::Max) argmax_.assign(y.size(), 0);
        for (int nn = 0; nn < n; ++nn)
            for (int oi = 0; oi < ho; ++oi)
                for (int oj = 0; oj < wo; ++oj)
                    for (int ch = 0; ch < c; ++ch) {
                        if (kind == PoolKind::Max) {
                            T best = x.at(nn, oi * stride, oj * stride, ch);
                            int64_t best_at =
                                static_cast<int64_t>(&x.at(nn, oi * stride, oj * stride, ch) - x.data());
                            for (int di = 0; di < window; ++di)
                                for (int dj = 0; dj < window; ++dj) {
                                    const T& v = x.at(nn, oi * stride + di, oj * stride + dj, ch);
                                    if (v > best) {
                                        best = v;
                                        best_at = static_cast<int64_t>(&v - x.data());
                                    }
                                }
                            y.at(nn, oi, oj, ch) = best;
                            argmax_[static_cast<size_t>(&y.at(nn, oi, oj, ch) - y.data())] = best_at;
                        } else {
                            T acc{0};
                            for (int di = 0; di < window; ++di)
                                for (int dj = 0; dj < window; ++dj)
                                    acc += x.at(nn, oi * stride + di, oj * stride + dj, ch);
                            y.at(nn, oi, oj, ch) = acc / static_cast<T>(window * window);
                        }
                    }
        return y;
    }

    Ten<T> backward(const Ten<T>& dy) {
        Ten<T> dx;
        dx.rank = in_rank_;
        dx.ext = in_ext_;
        dx.d.assign(static_cast<size_t>(in_ext_[0]) * in_ext_[1] * in_ext_[2] * in_ext_[3], T{0});
        if (kind == PoolKind::Max) {
            for (size_t i = 0; i < dy.size(); ++i) dx.d[static_cast<size_t>(argmax_[i])] += dy.d[i];
            return dx;
        }
        int n = dy.ext[0], ho = dy.ext[1], wo = dy.ext[2], c = dy.ext[3];
        T inv = T{1} / static_cast<T>(window * window);
        for (int nn = 0; nn < n; ++nn)
            for (int oi = 0; oi < ho; ++oi)
                for (int oj = 0; oj < wo; ++oj)
                    for (int ch = 0; ch < c; ++ch) {
                        T g = dy.at(nn, oi, oj, ch) * inv;
                        for (int di = 0; di < window; ++di)
                            for (int dj = 0; dj < window; ++dj)
                                dx.at(nn, oi * stride + di, oj * stride + dj, ch) += g;
                    }
        return dx;
    }
};

// Reduces all spatial positions per channel: [N,L,C] or [N,H,W,C] -> [N,C].
template <class T>
struct GlobalPool {
    PoolKind kind = PoolKind::Max;
    std::vector<int64_t> argmax_;
    std::array<int, 4> in_ext_{};
    int in_rank_ = 0;

    GlobalPool() = default;
    explicit GlobalPool(PoolKind kind_) : kind(kind_) {}

    template <class Rng>
    void init(Rng&) {}
    void collect(std::vector<Param<T>*>&) {}

    Ten<T> forward(const Ten<T>& x, bool) {
        if (x.rank != 3 && x.rank != 4) throw ShapeMismatch("global pool input " + x.shape_str());
        int n = x.ext[0];
        int c = x.ext[x.rank - 1];
        size_t spatial = x.size() / (static_cast<size_t>(n) * c);
        in_ext_ = x.ext;
        in_rank_ = x.rank;
        Ten<T> y({n, c});
        if (kind == PoolKind::Max) argmax_.assign(y.size(), 0);
        for (int nn = 0; nn < n; ++nn) {
            const T* base = x.data() + static_cast<size_t>(nn) * spatial * c;
            for (int ch = 0; ch < c; ++ch) {
                if (kind == PoolKind::Max) {
                    T best = base[ch];
                    size_t best_at = ch;
                    for (size_t s = 1; s < spatial; ++s)
                        if (base[s * c + ch] > best) {
                            best = base[s * c + ch];
                            best_at = s * c + ch;
                        }
                    y.at(nn, ch) = best;
                    argmax_[static_cast<size_t>(nn) * c + ch] =
                        static_cast<int64_t>(static_cast<size_t>(nn) * spatial * c + best_at);
                } else {
                    T acc{0};
                    for (size_t s = 0; s < spatial; ++s) acc += base[s * c + ch];
                    y.at(nn, ch) = acc / static_cast<T>(spatial);
                }
            }
        }
        return y;
    }

    Ten<T> backward(const Ten<T>& dy) {
        Ten<T> dx;
        dx.rank = in_rank_;
        dx.ext = in_ext_;
        size_t total = 1;
        for (int i = 0; i < in_rank_; ++i) total *= static_cast<size_t>(in_ext_[i]);
        dx.d.assign(total, T{0});
        int n = dy.ext[0], c = dy.ext[1];
        size_t spatial = total / (static_cast<size_t>(n) * c);
        if (kind == PoolKind::Max) {
            for (size_t i = 0; i < dy.size(); ++i) dx.d[static_cast<size_t>(argmax_[i])] += dy.d[i];
        } else {
            T inv = T{1} / static_cast<T>(spatial);
            for (int nn = 0; nn < n; ++nn)
                for (size_t s = 0; s < spatial; ++s)
                    for (int ch = 0; ch < c; ++ch)
                        dx.d[(static_cast<size_t>(nn) * spatial + s) * c + ch] += dy.at(nn, ch) * inv;
        }
        return dx;
    }
};

// Standard LSTM over [N,T,din] returning the full hidden sequence [N,T,dh].
// Gate order in the packed weight columns: input, forget, candidate, output.
// Forget-gate bias starts at 1.
template <class T>
struct Lstm {
    Param<T> W, U, b;  // [din,4dh], [dh,4dh], [4dh]
    int din = 0, dh = 0;
    Ten<T> x_, gates_, cells_, hidden_;  // caches: [N,T,4dh], [N,T,dh], [N,T,dh]

    Lstm() = default;
    Lstm(std::string name, int din_, int dh_) : din(din_), dh(dh_) {
        W.name = name + ".W";
        W.decay = true;
        W.init_shape({din, 4 * dh});
        U.name = name + ".U";
        U.decay = true;
        U.init_shape({dh, 4 * dh});
        b.name = name + ".b";
        b.init_shape({4 * dh});
    }

    template <class Rng>
    void init(Rng& rng) {
        init_uniform(W.value, rng, 1.0 / std::sqrt(static_cast<double>(din)));
        init_uniform(U.value, rng, 1.0 / std::sqrt(static_cast<double>(dh)));
        b.value.fill(T{0});
        for (int j = 0; j < dh; ++j) b.value.at(dh + j) = T{1};
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&W);
        out.push_back(&U);
        out.push_back(&b);
    }

    Ten<T> forward(const Ten<T>& x, bool) {
        if (x.rank != 3 || x.ext[2] != din) throw ShapeMismatch("lstm input " + x.shape_str());
        int n = x.ext[0], steps = x.ext[1];
        x_ = x;
        gates_.reshape({n, steps, 4 * dh});
        cells_.reshape({n, steps, dh});
        hidden_.reshape({n, steps, dh});

        std::vector<T> g(static_cast<size_t>(n) * 4 * dh);
        std::vector<T> h_prev(static_cast<size_t>(n) * dh, T{0});
        std::vector<T> c_prev(static_cast<size_t>(n) * dh, T{0});
        std::vector<T> xt(static_cast<size_t>(n) * din);

        for (int t = 0; t < steps; ++t) {
            for (int nn = 0; nn < n; ++nn)
                for (int d = 0; d < din; ++d) xt[static_cast<size_t>(nn) * din + d] = x.at(nn, t, d);
            for (int nn = 0; nn < n; ++nn)
                for (int j = 0; j < 4 * dh; ++j) g[static_cast<size_t>(nn) * 4 * dh + j] = b.value.at(j);
            matmul_acc(xt.data(), W.value.data(), g.data(), n, din, 4 * dh);
            matmul_acc(h_prev.data(), U.value.data(), g.data(), n, dh, 4 * dh);

            for (int nn = 0; nn < n; ++nn) {
                T* grow = g.data() + static_cast<size_t>(nn) * 4 * dh;
                T* hp = h_prev.data() + static_cast<size_t>(nn) * dh;
                T* cp = c_prev.data() + static_cast<size_t>(nn) * dh;
                for (int j = 0; j < dh; ++j) {
                    T ig = sigmoid_scalar(grow[j]);
                    T fg = sigmoid_scalar(grow[dh + j]);
                    T cg = std::tanh(grow[2 * dh + j]);
                    T og = sigmoid_scalar(grow[3 * dh + j]);
                    T c_new = fg * cp[j] + ig * cg;
                    T h_new = og * std::tanh(c_new);
                    gates_.at(nn, t, j) = ig;
                    gates_.at(nn, t, dh + j) = fg;
                    gates_.at(nn, t, 2 * dh + j) = cg;
                    gates_.at(nn, t, 3 * dh + j) = og;
                    cells_.at(nn, t, j) = c_new;
                    hidden_.at(nn, t, j) = h_new;
                    cp[j] = c_new;
                    hp[j] = h_new;
                }
            }
        }
        return hidden_;
    }

    Ten<T> backward(const Ten<T>& dy) {
        int n = x_.ext[0], steps = x_.ext[1];
        Ten<T> dx({n, steps, din});
        std::vector<T> dh_next(static_cast<size_t>(n) * dh, T{0});
        std::vector<T> dc_next(static_cast<size_t>(n) * dh, T{0});
        std::vector<T> dg(static_cast<size_t>(n) * 4 * dh);
        std::vector<T> xt(static_cast<size_t>(n) * din);
        std::vector<T> hprev(static_cast<size_t>(n) * dh);
        std::vector<T> dxt(static_cast<size_t>(n) * din);
        std::vector<T> dhp(static_cast<size_t>(n) * dh);

        for (int t = steps - 1; t >= 0; --t) {
            for (int nn = 0; nn < n; ++nn) {
                T* dgrow = dg.data() + static_cast<size_t>(nn) * 4 * dh;
                T* dhn = dh_next.data() + static_cast<size_t>(nn) * dh;
                T* dcn = dc_next.data() + static_cast<size_t>(nn) * dh;
                for (int j = 0; j < dh; ++j) {
                    T dht = dy.at(nn, t, j) + dhn[j];
                    T ig = gates_.at(nn, t, j);
                    T fg = gates_.at(nn, t, dh + j);
                    T cg = gates_.at(nn, t, 2 * dh + j);
                    T og = gates_.at(nn, t, 3 * dh + j);
                    T ct = cells_.at(nn, t, j);
                    T tc = std::tanh(ct);
                    T dog = dht * tc;
                    T dct = dcn[j] + dht * og * (T{1} - tc * tc);
                    T cprev = t > 0 ? cells_.at(nn, t - 1, j) : T{0};
                    T dig = dct * cg;
                    T dfg = dct * cprev;
                    T dcg = dct * ig;
                    dcn[j] = dct * fg;
                    dgrow[j] = dig * ig * (T{1} - ig);
                    dgrow[dh + j] = dfg * fg * (T{1} - fg);
                    dgrow[2 * dh + j] = dcg * (T{1} - cg * cg);
                    dgrow[3 * dh + j] = dog * og * (T{1} - og);
                }
            }
            for (int nn = 0; nn < n; ++nn)
                for (int d = 0; d < din; ++d) xt[static_cast<size_t>(nn) * din + d] = x_.at(nn, t, d);
            if (t > 0)
                for (int nn = 0; nn < n; ++nn)
                    for (int j = 0; j < dh; ++j)
                        hprev[static_cast<size_t>(nn) * dh + j] = hidden_.at(nn, t - 1, j);
            else
                std::fill(hprev.begin(), hprev.end(), T{0});

            matmul_at_b_acc(xt.data(), dg.data(), W.grad.data(), din, n, 4 * dh);
            matmul_at_b_acc(hprev.data(), dg.data(), U.grad.data(), dh, n, 4 * dh);
            for (int nn = 0; nn < n; ++nn)
                for (int j = 0; j < 4 * dh; ++j) b.grad.at(j) += dg[static_cast<size_t>(nn) * 4 * dh + j];

            std::fill(dxt.begin(), dxt.end(), T{0});
            std::fill(dhp.begin(), dhp.end(), T{0});
            matmul_a_bt_acc(dg.data(), W.value.data(), dxt.data(), n, 4 * dh, din);
            matmul_a_bt_acc(dg.data(), U.value.data(), dhp.data(), n, 4 * dh, dh);
            for (int nn = 0; nn < n; ++nn)
                for (int d = 0; d < din; ++d) dx.at(nn, t, d) = dxt[static_cast<size_t>(nn) * din + d];
            dh_next = dhp;
        }
        return dx;
    }
};

template <class T>
struct ReluLayer {
    Ten<T> y_;

    template <class Rng>
    void init(Rng&) {}
    void collect(std::vector<Param<T>*>&) {}

    Ten<T> forward(const Ten<T>& x, bool) {
        y_ = relu(x);
        return y_;
    }
    Ten<T> backward(const Ten<T>& dy) { return relu_backward(y_, dy); }
};

// Inverted dropout with a counter-based mask: the kept set is a pure function
// of (seed, call index, element index), so replay and any worker count give
// identical masks.
template <class T>
struct Dropout {
    double rate = 0.0;
    uint64_t seed = 0;
    uint64_t calls = 0;
    uint64_t last_call_ = 0;
    bool active_ = false;

    Dropout() = default;
    Dropout(double rate_, uint64_t seed_) : rate(rate_), seed(seed_) {
        if (rate < 0.0 || rate >= 1.0) throw InvalidRate("dropout rate must be in [0,1)");
    }

    template <class Rng>
    void init(Rng&) {}
    void collect(std::vector<Param<T>*>&) {}

    bool keep(uint64_t call, size_t i) const {
        uint64_t h = splitmix64(seed ^ (call * 0x9E3779B97F4A7C15ull) ^ (i * 0xD1B54A32D192ED03ull));
        return u01_from_bits(h) >= rate;
    }

    Ten<T> forward(const Ten<T>& x, bool train) {
        active_ = train && rate > 0.0;
        if (!active_) return x;
        last_call_ = calls++;
        Ten<T> y = x;
        T scale = static_cast<T>(1.0 / (1.0 - rate));
        for (size_t i = 0; i < y.size(); ++i) y.d[i] = keep(last_call_, i) ? y.d[i] * scale : T{0};
        return y;
    }

    Ten<T> backward(const Ten<T>& dy) {
        if (!active_) return dy;
        Ten<T> dx = dy;
        T scale = static_cast<T>(1.0 / (1.0 - rate));
        for (size_t i = 0; i < dx.size(); ++i) dx.d[i] = keep(last_call_, i) ? dx.d[i] * scale : T{0};
        return dx;
    }
};

}  // namespace stcids::neural
