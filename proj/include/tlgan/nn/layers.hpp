#pragma once

#include "tlgan/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace tlgan::nn {

enum class Pad { Same, Valid };

/// 2-D convolution, im2col + GEMM. Weight rows are output channels;
/// weight columns run over (ky, kx) with the input channel fastest, the
/// same order im2col writes. Same-padding follows the TensorFlow rule
/// (output = ceil(in / stride), extra pixel on the bottom/right).
template <class S>
struct Conv2d {
    int in_ch = 0, out_ch = 0, kh = 1, kw = 1, stride = 1;
    Pad pad = Pad::Same;

    MatrixX<S> weight;
    VectorX<S> bias;
    MatrixX<S> grad_weight;
    VectorX<S> grad_bias;

    Conv2d() = default;
    Conv2d(int in, int out, int k, int stride_ = 1, Pad pad_ = Pad::Same)
        : in_ch(in), out_ch(out), kh(k), kw(k), stride(stride_), pad(pad_) {
        weight = MatrixX<S>::Zero(out_ch, static_cast<Eigen::Index>(kh) * kw * in_ch);
        bias = VectorX<S>::Zero(out_ch);
        grad_weight = weight;
        grad_bias = bias;
    }

    Eigen::Index param_count() const { return weight.size() + bias.size(); }

    /// Glorot-uniform kernel, zero bias (the Keras defaults).
    void init(std::mt19937_64& rng) {
        const double fan_in = static_cast<double>(kh) * kw * in_ch;
        const double fan_out = static_cast<double>(kh) * kw * out_ch;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (auto& w : weight.reshaped()) w = static_cast<S>(u(rng));
        bias.setZero();
    }

    struct Plan {
        int oh = 0, ow = 0, pt = 0, pl = 0;
    };

    Plan plan(const FeatureMap<S>& x) const {
        if (x.channels() != in_ch) throw std::invalid_argument("conv: channel mismatch");
        Plan p;
        if (pad == Pad::Same) {
            p.oh = (x.height + stride - 1) / stride;
            p.ow = (x.width + stride - 1) / stride;
            const int pad_h = std::max((p.oh - 1) * stride + kh - x.height, 0);
            const int pad_w = std::max((p.ow - 1) * stride + kw - x.width, 0);
            p.pt = pad_h / 2;
            p.pl = pad_w / 2;
        } else {
            if (x.height < kh || x.width < kw)
                throw std::invalid_argument("conv: input smaller than kernel");
            p.oh = (x.height - kh) / stride + 1;
            p.ow = (x.width - kw) / stride + 1;
        }
        return p;
    }

    FeatureMap<S> forward(const FeatureMap<S>& x, Workspace<S>& ws) const {
        const Plan p = plan(x);
        FeatureMap<S> y;
        y.batch = x.batch;
        y.height = p.oh;
        y.width = p.ow;
        const Eigen::Index total = static_cast<Eigen::Index>(x.batch) * p.oh * p.ow;
        y.data.resize(out_ch, total);

        if (kh == 1 && kw == 1 && stride == 1) {
            y.data.noalias() = weight * x.data;
        } else {
            const Eigen::Index rows = static_cast<Eigen::Index>(kh) * kw * in_ch;
            const Eigen::Index chunk = ws.chunk_cols(rows, p.ow, total);
            for (Eigen::Index j0 = 0; j0 < total; j0 += chunk) {
                const Eigen::Index n = std::min(chunk, total - j0);
                auto cols = Workspace<S>::mapped(ws.a, rows, n);
                im2col(x, p, j0, n, cols);
                y.data.middleCols(j0, n).noalias() = weight * cols;
            }
        }
        y.data.colwise() += bias;
        return y;
    }

    /// Backward pass; re-runs im2col on x rather than caching it. When
    /// accumulate is false the parameter gradients are left untouched
    /// (used when only the input gradient is wanted).
    FeatureMap<S> backward(const FeatureMap<S>& x, const FeatureMap<S>& gout, Workspace<S>& ws,
                           bool accumulate = true, bool need_dx = true) {
        const Plan p = plan(x);
        const Eigen::Index total = static_cast<Eigen::Index>(x.batch) * p.oh * p.ow;
        if (gout.data.rows() != out_ch || gout.positions() != total)
            throw std::invalid_argument("conv backward: gradient shape mismatch");

        if (accumulate) grad_bias += gout.data.rowwise().sum();

        FeatureMap<S> dx;
        if (need_dx) dx = FeatureMap<S>::zeros(in_ch, x.batch, x.height, x.width);

        if (kh == 1 && kw == 1 && stride == 1) {
            if (accumulate) grad_weight.noalias() += gout.data * x.data.transpose();
            if (need_dx) dx.data.noalias() = weight.transpose() * gout.data;
            return dx;
        }

        const Eigen::Index rows = static_cast<Eigen::Index>(kh) * kw * in_ch;
        const Eigen::Index chunk = ws.chunk_cols(rows, p.ow, total);
        for (Eigen::Index j0 = 0; j0 < total; j0 += chunk) {
            const Eigen::Index n = std::min(chunk, total - j0);
            if (accumulate) {
                auto cols = Workspace<S>::mapped(ws.a, rows, n);
                im2col(x, p, j0, n, cols);
                grad_weight.noalias() += gout.data.middleCols(j0, n) * cols.transpose();
            }
            if (need_dx) {
                auto gcols = Workspace<S>::mapped(ws.b, rows, n);
                gcols.noalias() = weight.transpose() * gout.data.middleCols(j0, n);
                col2im(gcols, p, j0, n, dx);
            }
        }
        return dx;
    }

private:
    void im2col(const FeatureMap<S>& x, const Plan& p, Eigen::Index j0, Eigen::Index n,
                Eigen::Map<MatrixX<S>>& cols) const {
        for (Eigen::Index jj = 0; jj < n; ++jj) {
            Eigen::Index t = j0 + jj;
            const int ox = static_cast<int>(t % p.ow);
            t /= p.ow;
            const int oy = static_cast<int>(t % p.oh);
            const int nb = static_cast<int>(t / p.oh);
            S* dst = cols.data() + jj * cols.rows();
            const int iy0 = oy * stride - p.pt;
            const int ix0 = ox * stride - p.pl;
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = iy0 + ky;
                for (int kx = 0; kx < kw; ++kx, dst += in_ch) {
                    const int ix = ix0 + kx;
                    if (iy < 0 || iy >= x.height || ix < 0 || ix >= x.width) {
                        std::fill(dst, dst + in_ch, S(0));
                    } else {
                        const S* src = x.data.data() + x.col(nb, iy, ix) * in_ch;
                        std::copy(src, src + in_ch, dst);
                    }
                }
            }
        }
    }

    void col2im(const Eigen::Map<MatrixX<S>>& gcols, const Plan& p, Eigen::Index j0,
                Eigen::Index n, FeatureMap<S>& dx) const {
        for (Eigen::Index jj = 0; jj < n; ++jj) {
            Eigen::Index t = j0 + jj;
            const int ox = static_cast<int>(t % p.ow);
            t /= p.ow;
            const int oy = static_cast<int>(t % p.oh);
            const int nb = static_cast<int>(t / p.oh);
            const S* src = gcols.data() + jj * gcols.rows();
            const int iy0 = oy * stride - p.pt;
            const int ix0 = ox * stride - p.pl;
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = iy0 + ky;
                for (int kx = 0; kx < kw; ++kx, src += in_ch) {
                    const int ix = ix0 + kx;
                    if (iy < 0 || iy >= dx.height || ix < 0 || ix >= dx.width) continue;
                    Eigen::Map<VectorX<S>>(dx.data.data() + dx.col(nb, iy, ix) * in_ch, in_ch) +=
                        Eigen::Map<const VectorX<S>>(src, in_ch);
                }
            }
        }
    }
};

/// Channel-wise batch normalization with Keras semantics: biased batch
/// variance, epsilon 1e-3, moving statistics blended with momentum 0.99.
/// Training forward caches mu/invstd for the matching backward call,
/// which differentiates through the batch statistics.
template <class S>
struct BatchNorm2d {
    int ch = 0;
    S momentum = S(0.99);
    S eps = S(1e-3);

    VectorX<S> gamma, beta, moving_mean, moving_var;
    VectorX<S> grad_gamma, grad_beta;
    VectorX<S> mu, invstd;  // last training batch

    BatchNorm2d() = default;
    explicit BatchNorm2d(int channels) : ch(channels) {
        gamma = VectorX<S>::Ones(ch);
        beta = VectorX<S>::Zero(ch);
        moving_mean = VectorX<S>::Zero(ch);
        moving_var = VectorX<S>::Ones(ch);
        grad_gamma = VectorX<S>::Zero(ch);
        grad_beta = VectorX<S>::Zero(ch);
    }

    Eigen::Index param_count() const { return 4 * ch; }

    FeatureMap<S> forward(const FeatureMap<S>& x, bool train) {
        if (x.channels() != ch) throw std::invalid_argument("batchnorm: channel mismatch");
        FeatureMap<S> y = x;
        if (train) {
            mu = x.data.rowwise().mean();
            VectorX<S> var =
                (x.data.colwise() - mu).array().square().rowwise().mean().matrix();
            invstd = (var.array() + eps).rsqrt().matrix();
            moving_mean = momentum * moving_mean + (S(1) - momentum) * mu;
            moving_var = momentum * moving_var + (S(1) - momentum) * var;
            const VectorX<S> scale = (gamma.array() * invstd.array()).matrix();
            const VectorX<S> shift = beta - (scale.array() * mu.array()).matrix();
            y.data = (x.data.array().colwise() * scale.array()).colwise() + shift.array();
        } else {
            const VectorX<S> scale =
                (gamma.array() * (moving_var.array() + eps).rsqrt()).matrix();
            const VectorX<S> shift = beta - (scale.array() * moving_mean.array()).matrix();
            y.data = (x.data.array().colwise() * scale.array()).colwise() + shift.array();
        }
        return y;
    }

    FeatureMap<S> backward(const FeatureMap<S>& x, const FeatureMap<S>& gout,
                           bool accumulate = true) {
        if (mu.size() != ch) throw std::logic_error("batchnorm backward before training forward");
        const S n = static_cast<S>(x.data.cols());
        ArrayXX<S> xhat = (x.data.colwise() - mu).array().colwise() * invstd.array();
        VectorX<S> dg = (gout.data.array() * xhat).rowwise().sum().matrix();
        VectorX<S> db = gout.data.rowwise().sum();
        if (accumulate) {
            grad_gamma += dg;
            grad_beta += db;
        }
        FeatureMap<S> dx = gout;
        dx.data = ((gout.data.array().colwise() - (db / n).array()) -
                   (xhat.colwise() * (dg / n).array()))
                      .colwise() *
                  (gamma.array() * invstd.array());
        return dx;
    }
};

/// 2x2/stride-2 max pooling with cached argmax columns for backward.
template <class S>
struct MaxPool2d {
    int k = 2, stride = 2;
    Eigen::ArrayXXi argmax;  // source column per (channel, output position)

    FeatureMap<S> forward(const FeatureMap<S>& x, bool train) {
        const int oh = x.height / stride, ow = x.width / stride;
        FeatureMap<S> y;
        y.batch = x.batch;
        y.height = oh;
        y.width = ow;
        const int ch = x.channels();
        y.data.resize(ch, static_cast<Eigen::Index>(x.batch) * oh * ow);
        if (train) argmax.resize(ch, y.data.cols());
        for (int n = 0; n < x.batch; ++n) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const Eigen::Index jo = y.col(n, oy, ox);
                    for (int c = 0; c < ch; ++c) {
                        S best = std::numeric_limits<S>::lowest();
                        Eigen::Index best_col = -1;
                        for (int dy = 0; dy < k; ++dy) {
                            const int iy = oy * stride + dy;
                            if (iy >= x.height) continue;
                            for (int dx = 0; dx < k; ++dx) {
                                const int ix = ox * stride + dx;
                                if (ix >= x.width) continue;
                                const Eigen::Index ji = x.col(n, iy, ix);
                                if (x.data(c, ji) > best) {
                                    best = x.data(c, ji);
                                    best_col = ji;
                                }
                            }
                        }
                        y.data(c, jo) = best;
                        if (train) argmax(c, jo) = static_cast<int>(best_col);
                    }
                }
            }
        }
        return y;
    }

    FeatureMap<S> backward(const FeatureMap<S>& x, const FeatureMap<S>& gout) const {
        FeatureMap<S> dx = FeatureMap<S>::zeros(x.channels(), x.batch, x.height, x.width);
        for (Eigen::Index j = 0; j < gout.data.cols(); ++j)
            for (int c = 0; c < x.channels(); ++c) dx.data(c, argmax(c, j)) += gout.data(c, j);
        return dx;
    }
};

// Elementwise activations. Backward variants recover the local slope from
// the forward *output*, which every function here permits.

template <class S>
FeatureMap<S> relu(FeatureMap<S> x) {
    x.data = x.data.cwiseMax(S(0));
    return x;
}

template <class S>
FeatureMap<S> relu_backward(const FeatureMap<S>& y, FeatureMap<S> gout) {
    gout.data.array() *= (y.data.array() > S(0)).template cast<S>();
    return gout;
}

template <class S>
FeatureMap<S> leaky_relu(FeatureMap<S> x, S slope) {
    x.data = x.data.cwiseMax(x.data * slope);
    return x;
}

template <class S>
FeatureMap<S> leaky_relu_backward(const FeatureMap<S>& y, FeatureMap<S> gout, S slope) {
    gout.data.array() *=
        (y.data.array() > S(0)).select(ArrayXX<S>::Constant(y.data.rows(), y.data.cols(), S(1)),
                                       ArrayXX<S>::Constant(y.data.rows(), y.data.cols(), slope));
    return gout;
}

template <class S>
FeatureMap<S> tanh_act(FeatureMap<S> x) {
    x.data = x.data.array().tanh().matrix();
    return x;
}

template <class S>
FeatureMap<S> tanh_backward(const FeatureMap<S>& y, FeatureMap<S> gout) {
    gout.data.array() *= (S(1) - y.data.array().square());
    return gout;
}

template <class S>
FeatureMap<S> sigmoid(FeatureMap<S> x) {
    x.data = (S(1) / (S(1) + (-x.data.array()).exp())).matrix();
    return x;
}

}  // namespace tlgan::nn
