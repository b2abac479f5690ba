#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "knowsr/errors.hpp"
#include "knowsr/mlp.hpp"
#include "knowsr/tensor.hpp"

namespace knowsr::nn {

/// Scalar loss as a function of the parameters; evaluated repeatedly at
/// perturbed points, so it must not cache state across calls.
using ScalarLossFn = std::function<double(const MlpParams&)>;

/// Central finite differences over every weight and bias entry:
///   g = (L(theta + eps) - L(theta - eps)) / (2 eps).
inline Gradients fd_gradients(const MlpParams& params, const ScalarLossFn& loss, double eps = 1e-5) {
    if (eps <= 0.0) throw ParameterError("fd_gradients: eps must be > 0");
    MlpParams probe = params;
    Gradients grads;
    grads.layers.resize(params.layers.size());
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const auto diff_entry = [&](Tensor2& field, std::size_t i) {
            const double saved = field.data[i];
            field.data[i] = saved + eps;
            const double up = loss(probe);
            field.data[i] = saved - eps;
            const double down = loss(probe);
            field.data[i] = saved;
            return (up - down) / (2.0 * eps);
        };
        Tensor2& w = probe.layers[k].weight;
        grads.layers[k].d_weight = Tensor2(w.rows, w.cols);
        for (std::size_t i = 0; i < w.data.size(); ++i)
            grads.layers[k].d_weight.data[i] = diff_entry(w, i);
        Tensor2& b = probe.layers[k].bias;
        grads.layers[k].d_bias = Tensor2(b.rows, b.cols);
        for (std::size_t i = 0; i < b.data.size(); ++i)
            grads.layers[k].d_bias.data[i] = diff_entry(b, i);
    }
    return grads;
}

/// Relative disagreement |a - b| / max(|a|, |b|, 1e-6), the yardstick every
/// gradient check is held to.
inline double rel_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Worst per-entry relative error between two gradient sets of equal shape.
inline double max_rel_error(const Gradients& a, const Gradients& b) {
    if (a.layers.size() != b.layers.size())
        throw DimensionError("max_rel_error: layer counts differ");
    double worst = 0.0;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        require_same_shape(a.layers[k].d_weight, b.layers[k].d_weight, "max_rel_error: weight grads");
        require_same_shape(a.layers[k].d_bias, b.layers[k].d_bias, "max_rel_error: bias grads");
        for (std::size_t i = 0; i < a.layers[k].d_weight.data.size(); ++i)
            worst = std::max(worst, rel_error(a.layers[k].d_weight.data[i],
                                              b.layers[k].d_weight.data[i]));
        for (std::size_t i = 0; i < a.layers[k].d_bias.data.size(); ++i)
            worst = std::max(worst, rel_error(a.layers[k].d_bias.data[i], b.layers[k].d_bias.data[i]));
    }
    return worst;
}

} // namespace knowsr::nn
