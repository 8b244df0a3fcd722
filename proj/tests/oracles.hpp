// Independent brute-force oracles used by the unit and acceptance suites.
// These stay naive on purpose: plain nested loops, no shared code with the
// library kernels they check.
#pragma once

#include <random>
#include <vector>

#include "stcids/neural.hpp"

namespace oracles {

using stcids::neural::Padding;
using stcids::neural::Ten;

template <class T, class Rng>
void fill_uniform(Ten<T>& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
    for (auto& v : t.d) v = static_cast<T>(stcids::draw_uniform(rng, lo, hi));
}

inline Ten<double> naive_dense(const Ten<double>& x, const Ten<double>& w, const Ten<double>& b) {
    Ten<double> y({x.ext[0], w.ext[1]});
    for (int n = 0; n < x.ext[0]; ++n)
        for (int j = 0; j < w.ext[1]; ++j) {
            double acc = b.at(j);
            for (int k = 0; k < w.ext[0]; ++k) acc += x.at(n, k) * w.at(k, j);
            y.at(n, j) = acc;
        }
    return y;
}

inline int naive_out_extent(int in, int k, int stride, Padding pad) {
    return pad == Padding::Same ? (in + stride - 1) / stride : (in - k) / stride + 1;
}

inline Ten<double> naive_conv1d(const Ten<double>& x, const Ten<double>& kern, int stride,
                                Padding pad) {
    int n = x.ext[0], len = x.ext[1], cin = x.ext[2];
    int k = kern.ext[0], cout = kern.ext[2];
    int lout = naive_out_extent(len, k, stride, pad);
    int total_pad = pad == Padding::Same ? std::max(0, (lout - 1) * stride + k - len) : 0;
    int pb = total_pad / 2;
    Ten<double> y({n, lout, cout});
    for (int nn = 0; nn < n; ++nn)
        for (int ol = 0; ol < lout; ++ol)
            for (int co = 0; co < cout; ++co) {
                double acc = 0.0;
                for (int dl = 0; dl < k; ++dl)
                    for (int ci = 0; ci < cin; ++ci) {
                        int il = ol * stride + dl - pb;
                        if (il < 0 || il >= len) continue;
                        acc += x.at(nn, il, ci) * kern.at(dl, ci, co);
                    }
                y.at(nn, ol, co) = acc;
            }
    return y;
}

inline Ten<double> naive_conv2d(const Ten<double>& x, const Ten<double>& kern, int stride,
                                Padding pad) {
    int n = x.ext[0], h = x.ext[1], w = x.ext[2], cin = x.ext[3];
    int k = kern.ext[0], cout = kern.ext[3];
    int ho = naive_out_extent(h, k, stride, pad);
    int wo = naive_out_extent(w, k, stride, pad);
    int ph = pad == Padding::Same ? std::max(0, (ho - 1) * stride + k - h) / 2 : 0;
    int pw = pad == Padding::Same ? std::max(0, (wo - 1) * stride + k - w) / 2 : 0;
    Ten<double> y({n, ho, wo, cout});
    for (int nn = 0; nn < n; ++nn)
        for (int oi = 0; oi < ho; ++oi)
            for (int oj = 0; oj < wo; ++oj)
                for (int co = 0; co < cout; ++co) {
                    double acc = 0.0;
                    for (int di = 0; di < k; ++di)
                        for (int dj = 0; dj < k; ++dj)
                            for (int ci = 0; ci < cin; ++ci) {
                                int ii = oi * stride + di - ph;
                                int jj = oj * stride + dj - pw;
                                if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                                acc += x.at(nn, ii, jj, ci) * kern.at(di, dj, ci, co);
                            }
                    y.at(nn, oi, oj, co) = acc;
                }
    return y;
}

inline Ten<double> naive_maxpool2d(const Ten<double>& x, int window, int stride) {
    int n = x.ext[0], h = x.ext[1], w = x.ext[2], c = x.ext[3];
    int ho = (h - window) / stride + 1, wo = (w - window) / stride + 1;
    Ten<double> y({n, ho, wo, c});
    for (int nn = 0; nn < n; ++nn)
        for (int oi = 0; oi < ho; ++oi)
            for (int oj = 0; oj < wo; ++oj)
                for (int ch = 0; ch < c; ++ch) {
                    double best = -1e300;
                    for (int di = 0; di < window; ++di)
                        for (int dj = 0; dj < window; ++dj)
                            best = std::max(best, x.at(nn, oi * stride + di, oj * stride + dj, ch));
                    y.at(nn, oi, oj, ch) = best;
                }
    return y;
}

inline Ten<double> naive_avgpool2d(const Ten<double>& x, int window, int stride) {
    int n = x.ext[0], h = x.ext[1], w = x.ext[2], c = x.ext[3];
    int ho = (h - window) / stride + 1, wo = (w - window) / stride + 1;
    Ten<double> y({n, ho, wo, c});
    for (int nn = 0; nn < n; ++nn)
        for (int oi = 0; oi < ho; ++oi)
            for (int oj = 0; oj < wo; ++oj)
                for (int ch = 0; ch < c; ++ch) {
                    double acc = 0.0;
                    for (int di = 0; di < window; ++di)
                        for (int dj = 0; dj < window; ++dj)
                            acc += x.at(nn, oi * stride + di, oj * stride + dj, ch);
                    y.at(nn, oi, oj, ch) = acc / (window * window);
                }
    return y;
}

// One LSTM cell step computed scalar by scalar from the packed parameters.
struct NaiveLstmState {
    std::vector<double> h, c;
};

inline NaiveLstmState naive_lstm_step(const std::vector<double>& x, const NaiveLstmState& prev,
                                      const Ten<double>& w, const Ten<double>& u,
                                      const Ten<double>& b, int dh) {
    auto sigma = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    int din = static_cast<int>(x.size());
    NaiveLstmState next{std::vector<double>(dh), std::vector<double>(dh)};
    for (int j = 0; j < dh; ++j) {
        double gi = b.at(j), gf = b.at(dh + j), gc = b.at(2 * dh + j), go = b.at(3 * dh + j);
        for (int d = 0; d < din; ++d) {
            gi += x[d] * w.at(d, j);
            gf += x[d] * w.at(d, dh + j);
            gc += x[d] * w.at(d, 2 * dh + j);
            go += x[d] * w.at(d, 3 * dh + j);
        }
        for (int d = 0; d < dh; ++d) {
            gi += prev.h[d] * u.at(d, j);
            gf += prev.h[d] * u.at(d, dh + j);
            gc += prev.h[d] * u.at(d, 2 * dh + j);
            go += prev.h[d] * u.at(d, 3 * dh + j);
        }
        double cc = sigma(gf) * prev.c[j] + sigma(gi) * std::tanh(gc);
        next.c[j] = cc;
        next.h[j] = sigma(go) * std::tanh(cc);
    }
    return next;
}

inline double max_abs_diff(const Ten<double>& a, const Ten<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.d[i] - b.d[i]));
    return m;
}

inline double max_rel_diff(const Ten<double>& a, const Ten<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double denom = std::max({std::abs(a.d[i]), std::abs(b.d[i]), 1e-30});
        m = std::max(m, std::abs(a.d[i] - b.d[i]) / denom);
    }
    return m;
}

}  // namespace oracles
