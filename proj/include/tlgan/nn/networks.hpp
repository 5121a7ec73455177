#pragma once

#include "tlgan/nn/layers.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tlgan::nn {

template <class S>
void add_conv_params(std::vector<ParamRef<S>>& out, Conv2d<S>& c, const std::string& prefix) {
    out.push_back({prefix + ".w", c.weight.data(), c.grad_weight.data(), c.weight.size(), true});
    out.push_back({prefix + ".b", c.bias.data(), c.grad_bias.data(), c.bias.size(), true});
}

template <class S>
void add_bn_params(std::vector<ParamRef<S>>& out, BatchNorm2d<S>& b, const std::string& prefix) {
    out.push_back({prefix + ".gamma", b.gamma.data(), b.grad_gamma.data(), b.gamma.size(), true});
    out.push_back({prefix + ".beta", b.beta.data(), b.grad_beta.data(), b.beta.size(), true});
    out.push_back({prefix + ".mmean", b.moving_mean.data(), nullptr, b.moving_mean.size(), false});
    out.push_back({prefix + ".mvar", b.moving_var.data(), nullptr, b.moving_var.size(), false});
}

template <class S>
Eigen::Index param_total(const std::vector<ParamRef<S>>& params, bool trainable) {
    Eigen::Index n = 0;
    for (const auto& p : params)
        if (p.trainable == trainable) n += p.size;
    return n;
}

template <class S>
void zero_grads(const std::vector<ParamRef<S>>& params) {
    for (const auto& p : params)
        if (p.grad) Eigen::Map<VectorX<S>>(p.grad, p.size).setZero();
}

struct GeneratorConfig {
    int in_channels = 3;
    int base_channels = 64;
    int num_res_blocks = 16;
    int head_kernel = 9;
    int block_kernel = 3;
    int stride = 4;
    int expand_channels = 256;
    int out_channels = 3;
};

/// Map-predicting generator: a wide-kernel head whose ReLU output feeds a
/// chain of residual blocks (conv-ReLU-BN-conv-BN-add) and re-enters
/// after the post-trunk conv+BN as a long skip; a strided expansion conv
/// then drops resolution by `stride` and a wide-kernel tanh head emits
/// the map in (-1,1).
template <class S>
class Generator {
public:
    explicit Generator(const GeneratorConfig& cfg = {}, std::uint64_t seed = 0) : cfg_(cfg) {
        std::mt19937_64 rng(seed);
        head_ = Conv2d<S>(cfg.in_channels, cfg.base_channels, cfg.head_kernel);
        head_.init(rng);
        blocks_.resize(cfg.num_res_blocks);
        for (auto& b : blocks_) {
            b.c1 = Conv2d<S>(cfg.base_channels, cfg.base_channels, cfg.block_kernel);
            b.c1.init(rng);
            b.b1 = BatchNorm2d<S>(cfg.base_channels);
            b.c2 = Conv2d<S>(cfg.base_channels, cfg.base_channels, cfg.block_kernel);
            b.c2.init(rng);
            b.b2 = BatchNorm2d<S>(cfg.base_channels);
        }
        post_ = Conv2d<S>(cfg.base_channels, cfg.base_channels, cfg.block_kernel);
        post_.init(rng);
        post_bn_ = BatchNorm2d<S>(cfg.base_channels);
        expand_ = Conv2d<S>(cfg.base_channels, cfg.expand_channels, cfg.block_kernel, cfg.stride);
        expand_.init(rng);
        out_ = Conv2d<S>(cfg.expand_channels, cfg.out_channels, cfg.head_kernel);
        out_.init(rng);
    }

    const GeneratorConfig& config() const { return cfg_; }

    FeatureMap<S> forward(const FeatureMap<S>& x, Workspace<S>& ws, bool train = false) {
        if (x.height % cfg_.stride != 0 || x.width % cfg_.stride != 0)
            throw std::invalid_argument("generator: input dims not divisible by the stride");
        if (!train) return forward_eval(x, ws);

        in_ = x;
        head_out_ = relu(head_.forward(x, ws));
        bcache_.resize(blocks_.size());
        const FeatureMap<S>* cur = &head_out_;
        for (size_t i = 0; i < blocks_.size(); ++i) {
            Block& b = blocks_[i];
            BlockCache& bc = bcache_[i];
            bc.r1 = relu(b.c1.forward(*cur, ws));
            bc.b1out = b.b1.forward(bc.r1, true);
            bc.c2out = b.c2.forward(bc.b1out, ws);
            bc.out = b.b2.forward(bc.c2out, true);
            bc.out.data += cur->data;
            cur = &bc.out;
        }
        post_c_ = post_.forward(*cur, ws);
        sum_ = post_bn_.forward(post_c_, true);
        sum_.data += head_out_.data;
        expand_r_ = relu(expand_.forward(sum_, ws));
        y_ = tanh_act(out_.forward(expand_r_, ws));
        return y_;
    }

    /// Backward through the cached training forward; accumulates all
    /// parameter gradients. The input gradient is not produced (the
    /// generator sits at the front of the graph).
    void backward(const FeatureMap<S>& gy, Workspace<S>& ws) {
        FeatureMap<S> d = tanh_backward(y_, gy);
        d = out_.backward(expand_r_, d, ws, true, true);
        d = relu_backward(expand_r_, std::move(d));
        FeatureMap<S> d_sum = expand_.backward(sum_, d, ws, true, true);
        FeatureMap<S> d_cur = post_bn_.backward(post_c_, d_sum);
        d_cur = post_.backward(trunk_out(), d_cur, ws, true, true);
        for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) {
            Block& b = blocks_[i];
            BlockCache& bc = bcache_[i];
            FeatureMap<S> t = b.b2.backward(bc.c2out, d_cur);
            t = b.c2.backward(bc.b1out, t, ws, true, true);
            t = b.b1.backward(bc.r1, t);
            t = relu_backward(bc.r1, std::move(t));
            t = b.c1.backward(block_input(i), t, ws, true, true);
            t.data += d_cur.data;  // identity branch
            d_cur = std::move(t);
        }
        d_cur.data += d_sum.data;  // long skip into the head activation
        d_cur = relu_backward(head_out_, std::move(d_cur));
        head_.backward(in_, d_cur, ws, true, false);
    }

    std::vector<ParamRef<S>> params() {
        std::vector<ParamRef<S>> out;
        add_conv_params(out, head_, "g.head");
        for (size_t i = 0; i < blocks_.size(); ++i) {
            const std::string p = "g.block" + two_digit(i);
            add_conv_params(out, blocks_[i].c1, p + ".c1");
            add_bn_params(out, blocks_[i].b1, p + ".b1");
            add_conv_params(out, blocks_[i].c2, p + ".c2");
            add_bn_params(out, blocks_[i].b2, p + ".b2");
        }
        add_conv_params(out, post_, "g.post");
        add_bn_params(out, post_bn_, "g.post_bn");
        add_conv_params(out, expand_, "g.expand");
        add_conv_params(out, out_, "g.out");
        return out;
    }

    void release_cache() {
        in_ = {};
        head_out_ = {};
        bcache_.clear();
        post_c_ = {};
        sum_ = {};
        expand_r_ = {};
        y_ = {};
    }

private:
    struct Block {
        Conv2d<S> c1;
        BatchNorm2d<S> b1;
        Conv2d<S> c2;
        BatchNorm2d<S> b2;
    };
    struct BlockCache {
        FeatureMap<S> r1, b1out, c2out, out;
    };

    static std::string two_digit(size_t i) {
        std::string s = std::to_string(i);
        return s.size() < 2 ? "0" + s : s;
    }

    const FeatureMap<S>& block_input(int i) const {
        return i == 0 ? head_out_ : bcache_[i - 1].out;
    }
    const FeatureMap<S>& trunk_out() const {
        return bcache_.empty() ? head_out_ : bcache_.back().out;
    }

    FeatureMap<S> forward_eval(const FeatureMap<S>& x, Workspace<S>& ws) {
        FeatureMap<S> cur = relu(head_.forward(x, ws));
        FeatureMap<S> skip = cur;
        for (Block& b : blocks_) {
            FeatureMap<S> t = relu(b.c1.forward(cur, ws));
            t = b.b1.forward(t, false);
            t = b.c2.forward(t, ws);
            t = b.b2.forward(t, false);
            cur.data += t.data;
        }
        FeatureMap<S> t = post_bn_.forward(post_.forward(cur, ws), false);
        t.data += skip.data;
        skip = {};
        cur = {};
        t = relu(expand_.forward(t, ws));
        return tanh_act(out_.forward(t, ws));
    }

    GeneratorConfig cfg_;
    Conv2d<S> head_;
    std::vector<Block> blocks_;
    Conv2d<S> post_;
    BatchNorm2d<S> post_bn_;
    Conv2d<S> expand_;
    Conv2d<S> out_;

    FeatureMap<S> in_, head_out_, post_c_, sum_, expand_r_, y_;
    std::vector<BlockCache> bcache_;
};

struct DiscriminatorConfig {
    std::vector<int> ladder{64, 64, 128, 128, 256, 256, 512, 512};
    int in_channels = 3;
    int kernel = 3;
    double leaky_slope = 0.2;
    int dense_hidden = 1024;
    int min_input = 16;
};

/// Real/fake map classifier: a conv ladder (stride 2 on every second
/// conv, conv-BN-LeakyReLU after the first conv which skips BN) topped by
/// two per-position dense layers and a sigmoid. Fully convolutional, so
/// the score grid size follows the input size.
template <class S>
class Discriminator {
public:
    explicit Discriminator(const DiscriminatorConfig& cfg = {}, std::uint64_t seed = 0)
        : cfg_(cfg), slope_(static_cast<S>(cfg.leaky_slope)) {
        std::mt19937_64 rng(seed);
        int prev = cfg.in_channels;
        for (size_t i = 0; i < cfg.ladder.size(); ++i) {
            const int stride = (i % 2 == 1) ? 2 : 1;
            convs_.emplace_back(prev, cfg.ladder[i], cfg.kernel, stride);
            convs_.back().init(rng);
            if (i > 0) bns_.emplace_back(cfg.ladder[i]);
            prev = cfg.ladder[i];
        }
        dense0_ = Conv2d<S>(prev, cfg.dense_hidden, 1);
        dense0_.init(rng);
        dense1_ = Conv2d<S>(cfg.dense_hidden, 1, 1);
        dense1_.init(rng);
    }

    const DiscriminatorConfig& config() const { return cfg_; }

    /// Scores in (0,1), one per surviving spatial position. Training mode
    /// caches activations for backward.
    FeatureMap<S> forward(const FeatureMap<S>& x, Workspace<S>& ws, bool train = false) {
        if (x.height < cfg_.min_input || x.width < cfg_.min_input)
            throw std::invalid_argument("discriminator: input below minimum size");
        in_ = x;
        act_.resize(convs_.size());
        conv_out_.resize(convs_.size());
        const FeatureMap<S>* cur = &x;
        for (size_t i = 0; i < convs_.size(); ++i) {
            FeatureMap<S> c = convs_[i].forward(*cur, ws);
            if (i > 0) {
                conv_out_[i] = std::move(c);
                act_[i] = leaky_relu(bns_[i - 1].forward(conv_out_[i], train), slope_);
            } else {
                act_[i] = leaky_relu(std::move(c), slope_);
            }
            cur = &act_[i];
        }
        dense_act_ = leaky_relu(dense0_.forward(*cur, ws), slope_);
        return sigmoid(dense1_.forward(dense_act_, ws));
    }

    /// Backward from the gradient w.r.t. the pre-sigmoid logits (the
    /// trainer folds the sigmoid into the BCE gradient). Set accumulate
    /// to false for the generator step, which only needs the input
    /// gradient.
    FeatureMap<S> backward(const FeatureMap<S>& dz, Workspace<S>& ws, bool accumulate,
                           bool need_dx) {
        FeatureMap<S> d = dense1_.backward(dense_act_, dz, ws, accumulate, true);
        d = leaky_relu_backward(dense_act_, std::move(d), slope_);
        d = dense0_.backward(act_.back(), d, ws, accumulate, true);
        for (int i = static_cast<int>(convs_.size()) - 1; i >= 1; --i) {
            d = leaky_relu_backward(act_[i], std::move(d), slope_);
            d = bns_[i - 1].backward(conv_out_[i], d, accumulate);
            d = convs_[i].backward(act_[i - 1], d, ws, accumulate, true);
        }
        d = leaky_relu_backward(act_[0], std::move(d), slope_);
        return convs_[0].backward(in_, d, ws, accumulate, need_dx);
    }

    std::vector<ParamRef<S>> params() {
        std::vector<ParamRef<S>> out;
        for (size_t i = 0; i < convs_.size(); ++i)
            add_conv_params(out, convs_[i], "d.conv" + std::to_string(i));
        for (size_t i = 0; i < bns_.size(); ++i)
            add_bn_params(out, bns_[i], "d.bn" + std::to_string(i + 1));
        add_conv_params(out, dense0_, "d.dense0");
        add_conv_params(out, dense1_, "d.dense1");
        return out;
    }

    void release_cache() {
        in_ = {};
        act_.clear();
        conv_out_.clear();
        dense_act_ = {};
    }

private:
    DiscriminatorConfig cfg_;
    S slope_;
    std::vector<Conv2d<S>> convs_;
    std::vector<BatchNorm2d<S>> bns_;
    Conv2d<S> dense0_, dense1_;

    FeatureMap<S> in_, dense_act_;
    std::vector<FeatureMap<S>> act_, conv_out_;
};

struct FeatureNetConfig {
    std::string weights_path;           // empty: random frozen fallback
    std::uint64_t fallback_seed = 20123;
};

/// VGG19 prefix through block3_conv3 (two pools, 256-channel output at
/// quarter resolution). Weights are frozen; with no weights file the net
/// keeps its seeded random initialization, which still defines a valid
/// fixed feature projection. Input is a 3-channel map in [-1,1]; the net
/// internally re-expands to [0,255] and subtracts the ImageNet channel
/// means.
template <class S>
class FeatureNet {
public:
    explicit FeatureNet(const FeatureNetConfig& cfg = {}) : cfg_(cfg) {
        std::mt19937_64 rng(cfg.fallback_seed);
        c11_ = Conv2d<S>(3, 64, 3);
        c12_ = Conv2d<S>(64, 64, 3);
        c21_ = Conv2d<S>(64, 128, 3);
        c22_ = Conv2d<S>(128, 128, 3);
        c31_ = Conv2d<S>(128, 256, 3);
        c32_ = Conv2d<S>(256, 256, 3);
        c33_ = Conv2d<S>(256, 256, 3);
        for (Conv2d<S>* c : layers()) c->init(rng);
    }

    const FeatureNetConfig& config() const { return cfg_; }

    FeatureMap<S> forward(const FeatureMap<S>& x, Workspace<S>& ws, bool train = false) {
        if (x.channels() != 3) throw std::invalid_argument("feature net: expects 3 channels");
        pre_ = x;
        for (int c = 0; c < 3; ++c)
            pre_.data.row(c) =
                (x.data.row(c).array() + S(1)) * S(127.5) - static_cast<S>(kChannelMean[c]);
        r11_ = relu(c11_.forward(pre_, ws));
        r12_ = relu(c12_.forward(r11_, ws));
        p1out_ = p1_.forward(r12_, train);
        r21_ = relu(c21_.forward(p1out_, ws));
        r22_ = relu(c22_.forward(r21_, ws));
        p2out_ = p2_.forward(r22_, train);
        r31_ = relu(c31_.forward(p2out_, ws));
        r32_ = relu(c32_.forward(r31_, ws));
        r33_ = relu(c33_.forward(r32_, ws));
        return r33_;
    }

    /// Gradient w.r.t. the [-1,1] map input; never touches the frozen
    /// weights.
    FeatureMap<S> backward_input(const FeatureMap<S>& gout, Workspace<S>& ws) {
        FeatureMap<S> d = relu_backward(r33_, gout);
        d = c33_.backward(r32_, d, ws, false, true);
        d = relu_backward(r32_, std::move(d));
        d = c32_.backward(r31_, d, ws, false, true);
        d = relu_backward(r31_, std::move(d));
        d = c31_.backward(p2out_, d, ws, false, true);
        d = p2_.backward(r22_, d);
        d = relu_backward(r22_, std::move(d));
        d = c22_.backward(r21_, d, ws, false, true);
        d = relu_backward(r21_, std::move(d));
        d = c21_.backward(p1out_, d, ws, false, true);
        d = p1_.backward(r12_, d);
        d = relu_backward(r12_, std::move(d));
        d = c12_.backward(r11_, d, ws, false, true);
        d = relu_backward(r11_, std::move(d));
        d = c11_.backward(pre_, d, ws, false, true);
        d.data *= S(127.5);  // chain through the range re-expansion
        return d;
    }

    std::vector<ParamRef<S>> params() {
        static const char* names[] = {"phi.b1c1", "phi.b1c2", "phi.b2c1", "phi.b2c2",
                                      "phi.b3c1", "phi.b3c2", "phi.b3c3"};
        std::vector<ParamRef<S>> out;
        auto ls = layers();
        for (size_t i = 0; i < ls.size(); ++i) {
            out.push_back({std::string(names[i]) + ".w", ls[i]->weight.data(), nullptr,
                           ls[i]->weight.size(), false});
            out.push_back({std::string(names[i]) + ".b", ls[i]->bias.data(), nullptr,
                           ls[i]->bias.size(), false});
        }
        return out;
    }

    void release_cache() {
        pre_ = r11_ = r12_ = p1out_ = r21_ = r22_ = p2out_ = r31_ = r32_ = r33_ = {};
    }

private:
    static constexpr double kChannelMean[3] = {123.68, 116.779, 103.939};

    std::array<Conv2d<S>*, 7> layers() {
        return {&c11_, &c12_, &c21_, &c22_, &c31_, &c32_, &c33_};
    }

    FeatureNetConfig cfg_;
    Conv2d<S> c11_, c12_, c21_, c22_, c31_, c32_, c33_;
    MaxPool2d<S> p1_, p2_;

    FeatureMap<S> pre_, r11_, r12_, p1out_, r21_, r22_, p2out_, r31_, r32_, r33_;
};

}  // namespace tlgan::nn
