#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "stcids/attention.hpp"
#include "stcids/gradcheck.hpp"

using namespace stcids;
using namespace stcids::attention;
using neural::grad_check;
using neural::grad_check_input;
using neural::Param;
using neural::Ten;
using oracles::fill_uniform;

namespace {

// grad_check adapters: expose the (forward, backward, collect) triple the
// harness expects, probing both outputs where there are two.
struct TemporalNet {
    TemporalAttention<double> att;
    TemporalNet(int dh, int da) : att("a", dh, da) {}
    void collect(std::vector<Param<double>*>& out) { att.collect(out); }
    Ten<double> forward(const Ten<double>& h, bool) {
        Ten<double> v = att.forward(h);
        const Ten<double>& a = att.weights();
        Ten<double> packed({h.ext[0], h.ext[2] + h.ext[1]});
        for (int n = 0; n < h.ext[0]; ++n) {
            for (int j = 0; j < h.ext[2]; ++j) packed.at(n, j) = v.at(n, j);
            for (int t = 0; t < h.ext[1]; ++t) packed.at(n, h.ext[2] + t) = a.at(n, t);
        }
        return packed;
    }
    Ten<double> backward(const Ten<double>& dpacked) {
        int n = att.h_.ext[0], steps = att.h_.ext[1], dh = att.h_.ext[2];
        Ten<double> dv({n, dh});
        Ten<double> da({n, steps});
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < dh; ++j) dv.at(i, j) = dpacked.at(i, j);
            for (int t = 0; t < steps; ++t) da.at(i, t) = dpacked.at(i, dh + t);
        }
        return att.backward(dv, da);
    }
};

struct ChannelNet {
    ChannelAttention<double> att;
    ChannelNet(int c, int r) : att("c", c, r) {}
    void collect(std::vector<Param<double>*>& out) { att.collect(out); }
    Ten<double> forward(const Ten<double>& f, bool) { return att.forward(f); }
    Ten<double> backward(const Ten<double>& dm) { return att.backward(dm); }
};

struct SpatialNet {
    SpatialAttention<double> att;
    explicit SpatialNet(int c) : att("s", c, 2) {}
    void collect(std::vector<Param<double>*>& out) { att.collect(out); }
    Ten<double> forward(const Ten<double>& f, bool) { return att.forward(f); }
    Ten<double> backward(const Ten<double>& dm) { return att.backward(dm); }
};

}  // namespace

TEST_CASE("temporal attention: single step takes all the weight") {
    std::mt19937_64 rng(31);
    TemporalAttention<double> att("a", 4, 4);
    att.init(rng);
    Ten<double> h({2, 1, 4});
    fill_uniform(h, rng);
    auto v = att.forward(h);
    for (int n = 0; n < 2; ++n) {
        CHECK(att.weights().at(n, 0) == doctest::Approx(1.0));
        for (int j = 0; j < 4; ++j) CHECK(v.at(n, j) == doctest::Approx(h.at(n, 0, j)));
    }
}

TEST_CASE("temporal attention: zero context vector gives the mean") {
    std::mt19937_64 rng(32);
    TemporalAttention<double> att("a", 3, 5);
    neural::init_uniform(att.W_w.value, rng, 0.5);
    att.u_w.value.fill(0.0);
    Ten<double> h({1, 6, 3});
    fill_uniform(h, rng);
    auto v = att.forward(h);
    for (int t = 0; t < 6; ++t) CHECK(att.weights().at(0, t) == doctest::Approx(1.0 / 6.0));
    for (int j = 0; j < 3; ++j) {
        double mean = 0;
        for (int t = 0; t < 6; ++t) mean += h.at(0, t, j) / 6.0;
        CHECK(v.at(0, j) == doctest::Approx(mean));
    }
}

TEST_CASE("temporal attention weights form a probability distribution") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 200; ++trial) {
        int steps = 1 + static_cast<int>(draw_index(rng, 12));
        TemporalAttention<double> att("a", 4, 6);
        att.init(rng);
        Ten<double> h({3, steps, 4});
        fill_uniform(h, rng, -3.0, 3.0);
        auto v = att.forward(h);
        const auto& a = att.weights();
        for (int n = 0; n < 3; ++n) {
            double sum = 0;
            for (int t = 0; t < steps; ++t) {
                CHECK(a.at(n, t) >= 0.0);
                sum += a.at(n, t);
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
            // v lies in the componentwise convex hull of the hidden states
            for (int j = 0; j < 4; ++j) {
                double lo = h.at(n, 0, j), hi = h.at(n, 0, j);
                for (int t = 1; t < steps; ++t) {
                    lo = std::min(lo, h.at(n, t, j));
                    hi = std::max(hi, h.at(n, t, j));
                }
                CHECK(v.at(n, j) >= lo - 1e-12);
                CHECK(v.at(n, j) <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("channel attention: zero weights give 0.5, constant input doubles the branch") {
    ChannelAttention<double> att("c", 8, 4);
    Ten<double> f({2, 3, 5, 8});
    std::mt19937_64 rng(34);
    fill_uniform(f, rng);
    auto m = att.forward(f);  // weights start at zero
    for (double v : m.d) CHECK(v == doctest::Approx(0.5));

    ChannelAttention<double> att2("c", 4, 2);
    att2.init(rng);
    Ten<double> g({1, 4, 4, 4});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int c = 0; c < 4; ++c) g.at(0, i, j, c) = 0.3 * (c + 1);  // constant per channel
    auto m2 = att2.forward(g);
    // avg and max branches coincide, so the pre-sigmoid is twice one branch
    auto mlp_once = [&](int c_query) {
        int mid = 2;
        std::vector<double> hidden(mid, 0.0);
        for (int m_i = 0; m_i < mid; ++m_i)
            for (int c = 0; c < 4; ++c)
                hidden[m_i] += 0.3 * (c + 1) * att2.W0.value.at(c, m_i);
        double out = 0.0;
        for (int m_i = 0; m_i < mid; ++m_i)
            out += std::max(0.0, hidden[m_i]) * att2.W1.value.at(m_i, c_query);
        return out;
    };
    for (int c = 0; c < 4; ++c)
        CHECK(m2.at(0, c) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0 * mlp_once(c)))));
}

TEST_CASE("channel and spatial maps lie strictly in (0,1)") {
    std::mt19937_64 rng(35);
    for (int trial = 0; trial < 50; ++trial) {
        ChannelAttention<double> ca("c", 8, 8);
        SpatialAttention<double> sa("s", 8, 2);
        ca.init(rng);
        sa.init(rng);
        Ten<double> f({2, 4, 3, 8});
        fill_uniform(f, rng, -2.0, 2.0);
        auto mc = ca.forward(f);
        for (double v : mc.d) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        auto ms = sa.forward(f);
        for (double v : ms.d) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("apply_channel broadcast against an elementwise oracle") {
    std::mt19937_64 rng(36);
    attention::AConv2d<double> block("a", 4, 2, 2);
    block.init(rng);
    Ten<double> f({2, 3, 4, 4});
    fill_uniform(f, rng);
    auto mc = block.channel.forward(f);

    // identity and halving checks on the broadcast itself
    Ten<double> fc = f;
    for (int n = 0; n < 2; ++n)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j)
                for (int c = 0; c < 4; ++c) fc.at(n, i, j, c) *= mc.at(n, c);
    // a forward through the block recomputes the same product internally
    block.forward(f, false);
    CHECK(oracles::max_abs_diff(block.fc_, fc) < 1e-15);
}

TEST_CASE("spatial attention: zero kernel gives a flat 0.5 map") {
    SpatialAttention<double> sa("s", 4, 2);
    Ten<double> f({1, 5, 3, 4});
    std::mt19937_64 rng(37);
    fill_uniform(f, rng);
    auto m = sa.forward(f);
    CHECK(m.ext[1] == 5);  // same-padded output keeps the extents
    CHECK(m.ext[2] == 3);
    for (double v : m.d) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("spatial attention: single channel makes both descriptors equal") {
    SpatialAttention<double> sa("s", 1, 2);
    std::mt19937_64 rng(38);
    Ten<double> f({1, 4, 4, 1});
    fill_uniform(f, rng);
    sa.forward(f);
    // with one channel, avg == max; force the conv to read the descriptors
    // by summing them: kernel tap (0,0) on both descriptor channels
    SpatialAttention<double> sb("s", 1, 2);
    sb.conv.K.value.at(0, 0, 0, 0) = 1.0;
    sb.conv.K.value.at(0, 0, 1, 0) = -1.0;  // avg - max == 0 per position
    auto m = sb.forward(f);
    for (double v : m.d) CHECK(v == doctest::Approx(0.5));  // sigmoid(0)
}

TEST_CASE("a_conv2d: zero parameters scale by exactly 0.25") {
    AConv2d<double> block("a", 8, 8, 2);
    Ten<double> f({2, 4, 5, 8});
    std::mt19937_64 rng(39);
    fill_uniform(f, rng);
    auto merged = block.forward(f, false);
    for (size_t i = 0; i < f.size(); ++i) CHECK(merged.d[i] == 0.25 * f.d[i]);
}

TEST_CASE("a_conv2d: saturated gates approach the identity") {
    AConv2d<double> block("a", 4, 2, 2);
    // drive both sigmoids to ~1: huge positive MLP/conv outputs
    block.channel.W0.value.fill(1.0);
    block.channel.W1.value.fill(50.0);
    block.spatial.conv.K.value.fill(50.0);
    Ten<double> f({1, 3, 3, 4});
    f.fill(1.0);
    auto merged = block.forward(f, false);
    for (size_t i = 0; i < f.size(); ++i) CHECK(merged.d[i] == doctest::Approx(f.d[i]).epsilon(1e-6));
}

TEST_CASE("a_conv2d output never exceeds the input in magnitude") {
    std::mt19937_64 rng(40);
    for (int trial = 0; trial < 30; ++trial) {
        AConv2d<double> block("a", 8, 4, 2);
        block.init(rng);
        Ten<double> f({2, 4, 4, 8});
        fill_uniform(f, rng, -3.0, 3.0);
        auto merged = block.forward(f, false);
        for (size_t i = 0; i < f.size(); ++i) CHECK(std::abs(merged.d[i]) <= std::abs(f.d[i]));
    }
}

TEST_CASE("gradient checks for all three attention blocks") {
    std::mt19937_64 rng(41);

    TemporalNet tn(4, 5);
    tn.att.init(rng);
    Ten<double> h({2, 6, 4});
    fill_uniform(h, rng);
    CHECK(grad_check(tn, h) < 1e-3);
    CHECK(grad_check_input(tn, h) < 1e-3);

    ChannelNet cn(8, 4);
    cn.att.init(rng);
    Ten<double> f({2, 4, 3, 8});
    fill_uniform(f, rng);
    CHECK(grad_check(cn, f) < 1e-3);
    CHECK(grad_check_input(cn, f) < 1e-3);

    SpatialNet sn(6);
    sn.att.init(rng);
    Ten<double> fs({2, 4, 5, 6});
    fill_uniform(fs, rng);
    CHECK(grad_check(sn, fs) < 1e-3);
    CHECK(grad_check_input(sn, fs) < 1e-3);

    AConv2d<double> whole("a", 8, 4, 2);
    whole.init(rng);
    Ten<double> fw({2, 4, 4, 8});
    fill_uniform(fw, rng);
    CHECK(grad_check(whole, fw) < 1e-3);
    CHECK(grad_check_input(whole, fw) < 1e-3);
}

TEST_CASE("reduction ratio must divide the channel count") {
    CHECK_THROWS_AS(ChannelAttention<double>("c", 6, 4), neural::ShapeMismatch);
}
