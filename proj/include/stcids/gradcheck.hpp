#pragma once

#include <random>

#include "stcids/neural.hpp"

namespace stcids::neural {

// Central-difference check of every parameter gradient against the analytic
// backward pass, using the scalar probe L = sum(output * r) for a fixed
// random projection r. Returns the max relative error
// |a - n| / max(|a|, |n|, 1e-8). Run on double instantiations; dropout must
// be inactive so repeated forwards see identical masks.
template <class Net>
double grad_check(Net& net, const Ten<double>& input, double eps = 1e-4, uint64_t seed = 7) {
    std::vector<Param<double>*> params;
    net.collect(params);

    Ten<double> y0 = net.forward(input, true);
    if (!y0.all_finite()) throw NumericalFault("grad_check: forward produced non-finite values");

    Ten<double> r = y0;
    std::mt19937_64 rng(seed);
    for (auto& v : r.d) v = draw_uniform(rng, -1.0, 1.0);

    for (auto* p : params) p->zero_grad();
    net.backward(r);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad.d);

    auto probe = [&]() {
        Ten<double> y = net.forward(input, true);
        double acc = 0.0;
        for (size_t i = 0; i < y.size(); ++i) acc += y.d[i] * r.d[i];
        if (!std::isfinite(acc)) throw NumericalFault("grad_check: non-finite probe value");
        return acc;
    };

    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& val = params[pi]->value.d;
        for (size_t i = 0; i < val.size(); ++i) {
            double keep = val[i];
            val[i] = keep + eps;
            double lp = probe();
            val[i] = keep - eps;
            double lm = probe();
            val[i] = keep;
            double numeric = (lp - lm) / (2.0 * eps);
            double a = analytic[pi][i];
            double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

// Same check for the gradient w.r.t. the input, which is the meaningful
// probe for parameterless layers (pooling, activations).
template <class Net>
double grad_check_input(Net& net, Ten<double> input, double eps = 1e-4, uint64_t seed = 7) {
    Ten<double> y0 = net.forward(input, true);
    if (!y0.all_finite()) throw NumericalFault("grad_check_input: non-finite forward");
    Ten<double> r = y0;
    std::mt19937_64 rng(seed);
    for (auto& v : r.d) v = draw_uniform(rng, -1.0, 1.0);

    std::vector<Param<double>*> params;
    net.collect(params);
    for (auto* p : params) p->zero_grad();
    Ten<double> analytic = net.backward(r);

    auto probe = [&]() {
        Ten<double> y = net.forward(input, true);
        double acc = 0.0;
        for (size_t i = 0; i < y.size(); ++i) acc += y.d[i] * r.d[i];
        if (!std::isfinite(acc)) throw NumericalFault("grad_check_input: non-finite probe");
        return acc;
    };

    double max_rel = 0.0;
    for (size_t i = 0; i < input.size(); ++i) {
        double keep = input.d[i];
        input.d[i] = keep + eps;
        double lp = probe();
        input.d[i] = keep - eps;
        double lm = probe();
        input.d[i] = keep;
        double numeric = (lp - lm) / (2.0 * eps);
        double a = analytic.d[i];
        double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace stcids::neural
