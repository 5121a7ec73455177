#include "tlgan/nn/convert.hpp"
#include "tlgan/nn/networks.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace tlgan;
using namespace tlgan::nn;

namespace {

template <class S>
FeatureMap<S> random_map(int ch, int n, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FeatureMap<S> x = FeatureMap<S>::zeros(ch, n, h, w);
    for (auto& v : x.data.reshaped()) v = static_cast<S>(u(rng));
    return x;
}

// Naive direct convolution, the oracle for the im2col/GEMM path.
template <class S>
FeatureMap<S> conv_oracle(const Conv2d<S>& c, const FeatureMap<S>& x) {
    const auto p = c.plan(x);
    FeatureMap<S> y = FeatureMap<S>::zeros(c.out_ch, x.batch, p.oh, p.ow);
    for (int n = 0; n < x.batch; ++n)
        for (int oy = 0; oy < p.oh; ++oy)
            for (int ox = 0; ox < p.ow; ++ox)
                for (int oc = 0; oc < c.out_ch; ++oc) {
                    double acc = static_cast<double>(c.bias(oc));
                    for (int ky = 0; ky < c.kh; ++ky)
                        for (int kx = 0; kx < c.kw; ++kx)
                            for (int ic = 0; ic < c.in_ch; ++ic) {
                                const int iy = oy * c.stride - p.pt + ky;
                                const int ix = ox * c.stride - p.pl + kx;
                                if (iy < 0 || iy >= x.height || ix < 0 || ix >= x.width) continue;
                                acc += static_cast<double>(
                                           c.weight(oc, (ky * c.kw + kx) * c.in_ch + ic)) *
                                       static_cast<double>(x.at(ic, n, iy, ix));
                            }
                    y.at(oc, n, oy, ox) = static_cast<S>(acc);
                }
    return y;
}

template <class S>
struct FlatParam {
    S* value;
    S* grad;
};

template <class S>
std::vector<FlatParam<S>> flatten_trainable(const std::vector<ParamRef<S>>& params) {
    std::vector<FlatParam<S>> out;
    for (const auto& p : params)
        if (p.trainable && p.grad)
            for (Eigen::Index i = 0; i < p.size; ++i) out.push_back({p.value + i, p.grad + i});
    return out;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("conv forward matches the direct oracle") {
    std::mt19937_64 rng(5);
    struct Case {
        int in, out, k, stride, h, w, batch;
        Pad pad;
    };
    const Case cases[] = {
        {3, 8, 3, 1, 9, 11, 2, Pad::Same},   {4, 6, 3, 2, 12, 10, 1, Pad::Same},
        {2, 5, 9, 1, 13, 13, 2, Pad::Same},  {3, 7, 3, 4, 16, 8, 1, Pad::Same},
        {5, 4, 3, 1, 10, 10, 1, Pad::Valid}, {1, 3, 1, 1, 7, 9, 3, Pad::Same},
    };
    Workspace<double> ws;
    for (const Case& cs : cases) {
        Conv2d<double> conv(cs.in, cs.out, cs.k, cs.stride, cs.pad);
        conv.init(rng);
        for (auto& b : conv.bias) b = 0.1 * static_cast<double>(rng() % 7) - 0.3;
        FeatureMap<double> x = random_map<double>(cs.in, cs.batch, cs.h, cs.w, rng());
        FeatureMap<double> got = conv.forward(x, ws);
        FeatureMap<double> want = conv_oracle(conv, x);
        REQUIRE(got.same_shape(want));
        CHECK(((got.data - want.data).cwiseAbs().maxCoeff()) < 1e-12);
    }
}

TEST_CASE("conv forward is identical across workspace chunk sizes") {
    std::mt19937_64 rng(6);
    Conv2d<float> conv(8, 16, 3, 1, Pad::Same);
    conv.init(rng);
    FeatureMap<float> x = random_map<float>(8, 2, 20, 24, 99);
    Workspace<float> big, tiny;
    tiny.max_bytes = 8 * 24 * 3 * 3 * sizeof(float) * 8;  // forces many chunks
    FeatureMap<float> a = conv.forward(x, big);
    FeatureMap<float> b = conv.forward(x, tiny);
    CHECK((a.data.array() == b.data.array()).all());
}

TEST_CASE("conv gradients match finite differences") {
    std::mt19937_64 rng(7);
    Conv2d<double> conv(3, 4, 3, 2, Pad::Same);
    conv.init(rng);
    FeatureMap<double> x = random_map<double>(3, 2, 7, 6, 13);
    FeatureMap<double> t = random_map<double>(4, 2, 4, 3, 14);
    Workspace<double> ws;

    auto loss = [&] {
        FeatureMap<double> y = conv.forward(x, ws);
        return 0.5 * (y.data - t.data).squaredNorm();
    };
    FeatureMap<double> y = conv.forward(x, ws);
    FeatureMap<double> g = y;
    g.data = y.data - t.data;
    conv.grad_weight.setZero();
    conv.grad_bias.setZero();
    FeatureMap<double> dx = conv.backward(x, g, ws, true, true);

    const double h = 1e-6;
    for (int trial = 0; trial < 30; ++trial) {
        double* w = trial % 3 == 2 ? &conv.bias(static_cast<Eigen::Index>(rng() % 4))
                                   : &conv.weight(static_cast<Eigen::Index>(rng() % 4),
                                                  static_cast<Eigen::Index>(rng() % 27));
        double* gw = trial % 3 == 2 ? conv.grad_bias.data() + (w - conv.bias.data())
                                    : conv.grad_weight.data() + (w - conv.weight.data());
        const double keep = *w;
        *w = keep + h;
        const double lp = loss();
        *w = keep - h;
        const double lm = loss();
        *w = keep;
        CHECK(*gw == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
    }
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index i = static_cast<Eigen::Index>(rng() % dx.data.size());
        double* v = x.data.data() + i;
        const double keep = *v;
        *v = keep + h;
        const double lp = loss();
        *v = keep - h;
        const double lm = loss();
        *v = keep;
        CHECK(dx.data.data()[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("batchnorm training normalizes and tracks moving stats") {
    BatchNorm2d<double> bn(3);
    bn.gamma << 2.0, 1.0, 0.5;
    bn.beta << 0.1, -0.2, 0.0;
    FeatureMap<double> x = random_map<double>(3, 2, 5, 4, 21);
    x.data.row(1).array() += 3.0;  // nonzero mean channel
    FeatureMap<double> y = bn.forward(x, true);

    for (int c = 0; c < 3; ++c) {
        const double m = y.data.row(c).mean();
        const double v = (y.data.row(c).array() - m).square().mean();
        CHECK(m == doctest::Approx(bn.beta(c)).epsilon(1e-9));
        // biased variance scaled by gamma^2, shrunk slightly by eps
        CHECK(v < bn.gamma(c) * bn.gamma(c) + 1e-9);
        CHECK(v > bn.gamma(c) * bn.gamma(c) * 0.9);
    }
    // Keras moving-average blend with momentum 0.99 from (0, 1) defaults.
    const double mu1 = x.data.row(1).mean();
    CHECK(bn.moving_mean(1) == doctest::Approx(0.01 * mu1).epsilon(1e-9));

    FeatureMap<double> ye = bn.forward(x, false);
    CHECK(ye.data.row(1).mean() != doctest::Approx(bn.beta(1)).epsilon(1e-6));
}

TEST_CASE("batchnorm backward matches finite differences") {
    BatchNorm2d<double> bn(2);
    bn.gamma << 1.3, 0.7;
    bn.beta << 0.2, -0.1;
    FeatureMap<double> x = random_map<double>(2, 1, 4, 5, 31);
    FeatureMap<double> t = random_map<double>(2, 1, 4, 5, 32);

    auto loss = [&] {
        BatchNorm2d<double> fresh = bn;  // moving stats are irrelevant to train-mode loss
        FeatureMap<double> y = fresh.forward(x, true);
        return 0.5 * (y.data - t.data).squaredNorm();
    };
    FeatureMap<double> y = bn.forward(x, true);
    FeatureMap<double> g = y;
    g.data = y.data - t.data;
    FeatureMap<double> dx = bn.backward(x, g);

    const double h = 1e-6;
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 25; ++trial) {
        double* v = x.data.data() + rng() % x.data.size();
        const double keep = *v;
        *v = keep + h;
        const double lp = loss();
        *v = keep - h;
        const double lm = loss();
        *v = keep;
        const Eigen::Index i = v - x.data.data();
        CHECK(dx.data.data()[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
    }
    for (int c = 0; c < 2; ++c) {
        double keep = bn.gamma(c);
        bn.gamma(c) = keep + h;
        double lp = loss();
        bn.gamma(c) = keep - h;
        double lm = loss();
        bn.gamma(c) = keep;
        CHECK(bn.grad_gamma(c) == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
        keep = bn.beta(c);
        bn.beta(c) = keep + h;
        lp = loss();
        bn.beta(c) = keep - h;
        lm = loss();
        bn.beta(c) = keep;
        CHECK(bn.grad_beta(c) == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("parameter counts match the published architecture exactly") {
    Generator<float> g({}, 1);
    auto gp = g.params();
    CHECK(param_total(gp, true) == 1448387);
    CHECK(param_total(gp, false) == 4224);
    CHECK(param_total(gp, true) + param_total(gp, false) == 1452611);

    // 9x9x3 -> 64 head
    Conv2d<float> head(3, 64, 9);
    CHECK(head.param_count() == 15616);

    Discriminator<float> d({}, 2);
    auto dp = d.params();
    CHECK(param_total(dp, true) + param_total(dp, false) == 5219137);
    Conv2d<float> first(3, 64, 3);
    CHECK(first.param_count() == 1792);

    FeatureNet<float> phi;
    auto pp = phi.params();
    CHECK(param_total(pp, true) == 0);
    CHECK(param_total(pp, false) == 1735488);
}

TEST_CASE("generator output shape and range") {
    Generator<float> g({}, 3);
    Workspace<float> ws;
    FeatureMap<float> x = random_map<float>(3, 1, 128, 128, 41);
    x.data = (x.data.array() + 1.0f) / 2.0f;  // [0,1] input range
    FeatureMap<float> y = g.forward(x, ws, false);
    CHECK(y.channels() == 3);
    CHECK(y.batch == 1);
    CHECK(y.height == 32);
    CHECK(y.width == 32);
    CHECK(y.data.maxCoeff() < 1.0f);
    CHECK(y.data.minCoeff() > -1.0f);

    FeatureMap<float> odd = random_map<float>(3, 1, 30, 32, 42);
    CHECK_THROWS_AS(g.forward(odd, ws, false), std::invalid_argument);
}

TEST_CASE("generator training forward is deterministic") {
    Generator<float> g({3, 8, 2, 9, 3, 4, 16, 3}, 4);
    Workspace<float> ws;
    FeatureMap<float> x = random_map<float>(3, 2, 16, 16, 43);
    FeatureMap<float> a = g.forward(x, ws, true);
    FeatureMap<float> b = g.forward(x, ws, true);
    CHECK(((a.data - b.data).cwiseAbs().maxCoeff()) < 1e-6f);
}

TEST_CASE("discriminator score grid follows input size") {
    Discriminator<float> d({}, 5);
    Workspace<float> ws;
    FeatureMap<float> x64 = random_map<float>(3, 2, 64, 64, 51);
    FeatureMap<float> s64 = d.forward(x64, ws, false);
    CHECK(s64.channels() == 1);
    CHECK(s64.height == 4);
    CHECK(s64.width == 4);
    CHECK(s64.data.minCoeff() > 0.0f);
    CHECK(s64.data.maxCoeff() < 1.0f);

    FeatureMap<float> x32 = random_map<float>(3, 1, 32, 32, 52);
    FeatureMap<float> s32 = d.forward(x32, ws, false);
    CHECK(s32.height == 2);
    CHECK(s32.width == 2);

    FeatureMap<float> tiny = random_map<float>(3, 1, 8, 8, 53);
    CHECK_THROWS_AS(d.forward(tiny, ws, false), std::invalid_argument);
}

TEST_CASE("feature net output shape and determinism") {
    FeatureNet<float> a, b;
    Workspace<float> ws;
    FeatureMap<float> x = random_map<float>(3, 1, 64, 64, 61);
    FeatureMap<float> fa = a.forward(x, ws);
    FeatureMap<float> fb = b.forward(x, ws);
    CHECK(fa.channels() == 256);
    CHECK(fa.height == 16);
    CHECK(fa.width == 16);
    CHECK((fa.data.array() == fb.data.array()).all());

    FeatureNet<float> c(FeatureNetConfig{"", 777});
    FeatureMap<float> fc = c.forward(x, ws);
    CHECK((fa.data.array() != fc.data.array()).any());
}

TEST_CASE("generator is translation covariant modulo stride") {
    Generator<float> g({}, 8);
    Workspace<float> ws;
    const int N = 128, s = 4;
    FeatureMap<float> x = random_map<float>(3, 1, N, N, 71);
    x.data = (x.data.array() + 1.0f) / 2.0f;
    // Shift the input content by s pixels in both directions.
    FeatureMap<float> xs = FeatureMap<float>::zeros(3, 1, N, N);
    for (int y = s; y < N; ++y)
        for (int xx = s; xx < N; ++xx)
            for (int ch = 0; ch < 3; ++ch)
                xs.at(ch, 0, y, xx) = x.at(ch, 0, y - s, xx - s);

    FeatureMap<float> y0 = g.forward(x, ws, false);
    FeatureMap<float> y1 = g.forward(xs, ws, false);
    // Receptive radius is ~54 px = 14 map px; compare the deep interior.
    const int m = 15;
    double worst = 0.0;
    for (int yy = m; yy < 32 - m; ++yy)
        for (int xx = m; xx < 32 - m; ++xx)
            for (int ch = 0; ch < 3; ++ch)
                worst = std::max(worst, std::abs(static_cast<double>(
                                            y1.at(ch, 0, yy, xx) - y0.at(ch, 0, yy - 1, xx - 1))));
    CHECK(worst < 1e-4);
}

TEST_CASE("gradient check on a reduced generator") {
    GeneratorConfig cfg;
    cfg.num_res_blocks = 2;
    cfg.base_channels = 8;
    cfg.expand_channels = 16;
    Generator<double> g(cfg, 9);
    Workspace<double> ws;
    FeatureMap<double> x = random_map<double>(3, 1, 8, 8, 81);
    x.data = (x.data.array() + 1.0) / 2.0;
    FeatureMap<double> t = random_map<double>(3, 1, 2, 2, 82);

    auto loss = [&] {
        FeatureMap<double> y = g.forward(x, ws, true);
        return 0.5 * (y.data - t.data).squaredNorm();
    };

    auto params = g.params();
    zero_grads(params);
    FeatureMap<double> y = g.forward(x, ws, true);
    FeatureMap<double> gy = y;
    gy.data = y.data - t.data;
    g.backward(gy, ws);

    auto flat = flatten_trainable(params);
    std::mt19937_64 rng(83);
    const double h = 1e-5;
    int checked = 0, ok = 0;
    while (checked < 120) {
        auto& p = flat[rng() % flat.size()];
        const double keep = *p.value;
        *p.value = keep + h;
        const double lp = loss();
        *p.value = keep - h;
        const double lm = loss();
        *p.value = keep;
        const double fd = (lp - lm) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(*p.grad), 1e-8});
        const double rel = std::abs(fd - *p.grad) / denom;
        ++checked;
        if (rel <= 1e-3) ++ok;
    }
    CHECK(ok == checked);
}

TEST_CASE("gradient check on a reduced discriminator") {
    DiscriminatorConfig cfg;
    cfg.ladder = {8, 8, 16, 16};
    cfg.dense_hidden = 32;
    Discriminator<double> d(cfg, 10);
    Workspace<double> ws;
    FeatureMap<double> x = random_map<double>(3, 2, 16, 16, 91);

    // BCE against all-real labels, driven through the logits.
    auto loss = [&] {
        Discriminator<double> fresh = d;  // moving stats mutate on forward
        FeatureMap<double> s = fresh.forward(x, ws, true);
        return -(s.data.array().max(1e-12).log()).mean();
    };
    auto params = d.params();
    zero_grads(params);
    FeatureMap<double> s = d.forward(x, ws, true);
    FeatureMap<double> dz = s;
    dz.data = (s.data.array() - 1.0) / static_cast<double>(s.data.size());
    FeatureMap<double> dx = d.backward(dz, ws, true, true);

    auto flat = flatten_trainable(params);
    std::mt19937_64 rng(93);
    const double h = 1e-5;
    for (int trial = 0; trial < 60; ++trial) {
        auto& p = flat[rng() % flat.size()];
        const double keep = *p.value;
        *p.value = keep + h;
        const double lp = loss();
        *p.value = keep - h;
        const double lm = loss();
        *p.value = keep;
        const double fd = (lp - lm) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(*p.grad), 1e-8});
        CHECK(std::abs(fd - *p.grad) / denom <= 1e-3);
    }
    // Input gradient too (the generator step depends on it).
    std::uniform_int_distribution<Eigen::Index> pick(0, x.data.size() - 1);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index i = pick(rng);
        double* v = x.data.data() + i;
        const double keep = *v;
        *v = keep + h;
        const double lp = loss();
        *v = keep - h;
        const double lm = loss();
        *v = keep;
        const double fd = (lp - lm) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(dx.data.data()[i]), 1e-8});
        CHECK(std::abs(fd - dx.data.data()[i]) / denom <= 1e-3);
    }
}

TEST_CASE("feature net input gradient matches finite differences") {
    FeatureNet<double> phi;
    Workspace<double> ws;
    FeatureMap<double> x = random_map<double>(3, 1, 8, 8, 101);
    x.data *= 0.5;
    FeatureMap<double> t = random_map<double>(256, 1, 2, 2, 102);

    auto loss = [&] {
        FeatureMap<double> f = phi.forward(x, ws, true);
        return 0.5 * (f.data - t.data).squaredNorm();
    };
    FeatureMap<double> f = phi.forward(x, ws, true);
    FeatureMap<double> gf = f;
    gf.data = f.data - t.data;
    FeatureMap<double> dx = phi.backward_input(gf, ws);

    std::mt19937_64 rng(103);
    const double h = 1e-6;
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Index i = static_cast<Eigen::Index>(rng() % x.data.size());
        double* v = x.data.data() + i;
        const double keep = *v;
        *v = keep + h;
        const double lp = loss();
        *v = keep - h;
        const double lm = loss();
        *v = keep;
        const double fd = (lp - lm) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(dx.data.data()[i]), 1e-6});
        CHECK(std::abs(fd - dx.data.data()[i]) / denom <= 1e-3);
    }
}

TEST_CASE("image and map conversions") {
    RasterImage img = RasterImage::u8(4, 6, 1, 0);
    img.at8(1, 2) = 255;
    img.at8(2, 3) = 51;
    FeatureMap<float> x = images_to_input<float>({img, img});
    CHECK(x.batch == 2);
    CHECK(x.channels() == 3);
    CHECK(x.at(0, 0, 1, 2) == doctest::Approx(1.0f));
    CHECK(x.at(2, 1, 2, 3) == doctest::Approx(0.2f));
    CHECK(x.at(1, 0, 0, 0) == 0.0f);

    HeatMap m = HeatMap::zeros(4, 6, 0.25f);
    m.values(1, 2) = 1.0f;
    m.values(0, 0) = 0.25f;
    FeatureMap<float> t = maps_to_target<float>({m});
    CHECK(t.at(0, 0, 1, 2) == doctest::Approx(1.0f));
    CHECK(t.at(1, 0, 0, 0) == doctest::Approx(-0.5f));
    CHECK(t.at(2, 0, 3, 5) == doctest::Approx(-1.0f));

    HeatMap back = output_to_heatmap(t, 0, 0.25f);
    CHECK(back.scale == 0.25f);
    CHECK(((back.values - m.values).abs() < 1e-6f).all());
}

}  // TEST_SUITE
