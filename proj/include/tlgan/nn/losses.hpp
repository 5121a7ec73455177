#pragma once

#include "tlgan/nn/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace tlgan::nn {

/// Mixing weights of the generator objective:
/// q * pixel MSE + r * feature MSE + adv * adversarial term.
struct LossWeights {
    double q = 1.0;
    double r = 0.001;
    double adv = 0.001;
};

struct ContentFeatureParts {
    double content = 0.0;  // plain mean-squared pixel error
    double feature = 0.0;  // mean-squared feature-space error
    double total = 0.0;    // q * content + r * feature
};

template <class S>
double mean_squared_error(const FeatureMap<S>& a, const FeatureMap<S>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    return (a.data - b.data).template cast<double>().squaredNorm() /
           static_cast<double>(a.data.size());
}

/// Composite content + feature loss. `phi` may be any callable network
/// with forward(x, ws, train); pass nullptr (or r = 0) to skip the
/// feature term entirely.
template <class S, class Phi>
ContentFeatureParts content_feature_loss(const FeatureMap<S>& pred, const FeatureMap<S>& target,
                                         Phi* phi, Workspace<S>& ws, const LossWeights& w) {
    ContentFeatureParts parts;
    parts.content = mean_squared_error(pred, target);
    if (w.r != 0.0 && phi) {
        FeatureMap<S> ft = phi->forward(target, ws, false);
        FeatureMap<S> fp = phi->forward(pred, ws, false);
        parts.feature = mean_squared_error(fp, ft);
    }
    parts.total = w.q * parts.content + w.r * parts.feature;
    return parts;
}

struct AdversarialParts {
    double d_loss = 0.0;  // -mean log D(real) - mean log(1 - D(fake))
    double g_adv = 0.0;   // -mean log D(fake), the non-saturating form
};

/// Binary cross-entropy GAN losses over score grids in (0,1). Scores at
/// exactly 0 or 1 are clamped before the log so every value is finite.
template <class S>
AdversarialParts adversarial_losses(const FeatureMap<S>& d_real, const FeatureMap<S>& d_fake) {
    constexpr double kEps = 1e-7;
    const ArrayXX<double> real =
        d_real.data.array().template cast<double>().max(kEps).min(1.0 - kEps);
    const ArrayXX<double> fake =
        d_fake.data.array().template cast<double>().max(kEps).min(1.0 - kEps);
    AdversarialParts parts;
    parts.d_loss = -real.log().mean() - (1.0 - fake).log().mean();
    parts.g_adv = -fake.log().mean();
    return parts;
}

}  // namespace tlgan::nn
