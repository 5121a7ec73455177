#pragma once

#include "tlgan/nn/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace tlgan::nn {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-7;  // added outside the square root, Keras-style
};

/// Adam over the trainable entries of a parameter enumeration. Moments
/// are stored as one flat vector per kind, in enumeration order, so they
/// can be checkpointed and restored positionally.
template <class S>
class Adam {
public:
    Adam(const AdamConfig& cfg, const std::vector<ParamRef<S>>& params) : cfg_(cfg) {
        if (!(cfg.lr > 0.0) || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 ||
            cfg.beta2 >= 1.0)
            throw std::invalid_argument("adam: invalid hyperparameters");
        Eigen::Index total = 0;
        for (const auto& p : params)
            if (p.trainable && p.grad) {
                segs_.push_back({p.value, p.grad, p.size});
                total += p.size;
            }
        m_ = VectorX<S>::Zero(total);
        v_ = VectorX<S>::Zero(total);
    }

    const AdamConfig& config() const { return cfg_; }
    std::uint64_t t() const { return t_; }
    VectorX<S>& moment1() { return m_; }
    VectorX<S>& moment2() { return v_; }
    void set_t(std::uint64_t t) { t_ = t; }

    /// One update from the gradients currently stored in the parameter
    /// arrays. Gradients are left untouched; the caller zeroes them.
    void step() {
        ++t_;
        const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
        const S corr1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
        const S corr2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
        const S lr = static_cast<S>(cfg_.lr), eps = static_cast<S>(cfg_.eps);
        Eigen::Index off = 0;
        for (const Seg& s : segs_) {
            auto m = m_.segment(off, s.size).array();
            auto v = v_.segment(off, s.size).array();
            Eigen::Map<VectorX<S>> value(s.value, s.size);
            Eigen::Map<const VectorX<S>> grad(s.grad, s.size);
            m = b1 * m + (S(1) - b1) * grad.array();
            v = b2 * v + (S(1) - b2) * grad.array().square();
            value.array() -= lr * (m / corr1) / ((v / corr2).sqrt() + eps);
            off += s.size;
        }
    }

private:
    struct Seg {
        S* value;
        const S* grad;
        Eigen::Index size;
    };

    AdamConfig cfg_;
    std::vector<Seg> segs_;
    VectorX<S> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace tlgan::nn
