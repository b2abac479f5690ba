#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "knowsr/errors.hpp"
#include "knowsr/rng.hpp"
#include "knowsr/tensor.hpp"

namespace knowsr::nn {

enum class Activation { Linear, Relu };

inline const char* activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "linear";
}

struct DenseLayer {
    Tensor2 weight; // in x out
    Tensor2 bias;   // 1 x out
    Activation activation = Activation::Linear;

    std::size_t in_dim() const { return weight.rows; }
    std::size_t out_dim() const { return weight.cols; }
};

struct AdamMoments {
    Tensor2 m_weight, v_weight;
    Tensor2 m_bias, v_bias;
};

/// Parameters of one dense network plus its optimizer state. Plain value
/// type: copying gives an independent network (used for target copies).
struct MlpParams {
    std::vector<DenseLayer> layers;
    std::vector<AdamMoments> moments; // parallel to layers
    std::uint64_t step_count = 0;

    std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
};

/// Builds a dense net with the given layer widths (dims = {in, h1, ..., out}),
/// ReLU on hidden layers and a linear output head. Weights and biases start
/// uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
inline MlpParams make_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
    if (dims.size() < 2) throw ParameterError("make_mlp: need at least in and out dims");
    MlpParams p;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        DenseLayer layer;
        layer.weight = Tensor2(dims[k], dims[k + 1]);
        layer.bias = Tensor2(1, dims[k + 1]);
        layer.activation = (k + 2 == dims.size()) ? Activation::Linear : Activation::Relu;
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[k]));
        for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
        for (double& b : layer.bias.data) b = rng.uniform(-bound, bound);
        AdamMoments mom;
        mom.m_weight = Tensor2(dims[k], dims[k + 1]);
        mom.v_weight = Tensor2(dims[k], dims[k + 1]);
        mom.m_bias = Tensor2(1, dims[k + 1]);
        mom.v_bias = Tensor2(1, dims[k + 1]);
        p.layers.push_back(std::move(layer));
        p.moments.push_back(std::move(mom));
    }
    return p;
}

/// Shape check helper: consecutive layers must chain.
inline void validate_chain(const MlpParams& p) {
    for (std::size_t k = 0; k + 1 < p.layers.size(); ++k)
        if (p.layers[k].out_dim() != p.layers[k + 1].in_dim())
            throw DimensionError("layer " + std::to_string(k) + " out dim " +
                                 std::to_string(p.layers[k].out_dim()) + " != layer " +
                                 std::to_string(k + 1) + " in dim " +
                                 std::to_string(p.layers[k + 1].in_dim()));
}

namespace detail {

inline void apply_activation(Tensor2& z, Activation act) {
    if (act == Activation::Relu)
        for (double& v : z.data) v = v > 0.0 ? v : 0.0;
}

struct ForwardCache {
    std::vector<Tensor2> pre;  // z_k per layer
    std::vector<Tensor2> post; // act(z_k) per layer
};

inline Tensor2 forward_impl(const MlpParams& p, const Tensor2& input, ForwardCache* cache) {
    if (p.layers.empty()) throw DimensionError("forward: empty network");
    if (input.cols != p.in_dim())
        throw DimensionError("forward: input cols " + std::to_string(input.cols) +
                             " != first layer in dim " + std::to_string(p.in_dim()));
    Tensor2 x = input;
    for (const DenseLayer& layer : p.layers) {
        Tensor2 z = matmul(x, layer.weight);
        add_row_inplace(z, layer.bias);
        if (cache) cache->pre.push_back(z);
        apply_activation(z, layer.activation);
        if (cache) cache->post.push_back(z);
        x = std::move(z);
    }
    return x;
}

} // namespace detail

/// Runs the network on a batch (rows are samples). With the default linear
/// output head the result is the pre-activation of the last layer, i.e. the
/// logits when the net is a policy head.
inline Tensor2 mlp_forward(const MlpParams& p, const Tensor2& input) {
    return detail::forward_impl(p, input, nullptr);
}

struct LayerGrads {
    Tensor2 d_weight;
    Tensor2 d_bias;
};

/// dL/dtheta for every parameter tensor; shapes mirror the MlpParams that
/// produced them.
struct Gradients {
    std::vector<LayerGrads> layers;
};

/// Reverse-mode accumulation of dL/dtheta given dL/doutput. Re-runs the
/// forward pass internally to recover the layer inputs. When `input_grad` is
/// non-null it also receives dL/dinput, which the centralized-critic actor
/// update needs to push value gradients through action inputs.
inline Gradients mlp_backward(const MlpParams& p, const Tensor2& input,
                              const Tensor2& upstream_grad, Tensor2* input_grad = nullptr) {
    detail::ForwardCache cache;
    const Tensor2 out = detail::forward_impl(p, input, &cache);
    if (!upstream_grad.same_shape(out))
        throw DimensionError("backward: upstream " + shape_str(upstream_grad) +
                             " != output " + shape_str(out));

    Gradients grads;
    grads.layers.resize(p.layers.size());
    Tensor2 g = upstream_grad;
    for (std::size_t k = p.layers.size(); k-- > 0;) {
        const DenseLayer& layer = p.layers[k];
        if (layer.activation == Activation::Relu) {
            const Tensor2& z = cache.pre[k];
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (z.data[i] <= 0.0) g.data[i] = 0.0;
        }
        const Tensor2& layer_input = k == 0 ? input : cache.post[k - 1];
        grads.layers[k].d_weight = matmul_at(layer_input, g);
        grads.layers[k].d_bias = column_sums(g);
        if (k > 0 || input_grad) g = matmul_bt(g, layer.weight);
    }
    if (input_grad) *input_grad = std::move(g);
    return grads;
}

inline double gradient_global_norm(const Gradients& g) {
    double sq = 0.0;
    for (const LayerGrads& lg : g.layers) {
        for (double v : lg.d_weight.data) sq += v * v;
        for (double v : lg.d_bias.data) sq += v * v;
    }
    return std::sqrt(sq);
}

/// Rescales the whole gradient so its global L2 norm is at most `max_norm`.
/// max_norm <= 0 disables clipping.
inline void clip_gradients(Gradients& g, double max_norm) {
    if (max_norm <= 0.0) return;
    const double norm = gradient_global_norm(g);
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    for (LayerGrads& lg : g.layers) {
        for (double& v : lg.d_weight.data) v *= scale;
        for (double& v : lg.d_bias.data) v *= scale;
    }
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

namespace detail {

inline void adam_update_tensor(Tensor2& param, Tensor2& m, Tensor2& v, const Tensor2& grad,
                               double lr, const AdamConfig& cfg, double bc1, double bc2) {
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        const double g = grad.data[i];
        m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
        v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m.data[i] / bc1;
        const double vhat = v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

} // namespace detail

namespace detail {

// An absent or empty moment tensor means fresh optimizer state; a sized but
// mismatched one is corruption and must not be silently reset.
inline void ensure_moment(Tensor2& moment, const Tensor2& param, const char* what) {
    if (moment.data.empty()) {
        moment = Tensor2(param.rows, param.cols);
    } else if (!moment.same_shape(param)) {
        throw DimensionError(std::string("optimizer_step: ") + what + " moment shape mismatch");
    }
}

} // namespace detail

/// One Adam step, in place. Rejects non-finite gradients before touching any
/// state so an aborted step leaves the network untouched.
inline void optimizer_step(MlpParams& p, const Gradients& grads, double lr,
                           const AdamConfig& cfg = {}) {
    if (grads.layers.size() != p.layers.size())
        throw DimensionError("optimizer_step: gradient layer count mismatch");
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        if (!grads.layers[k].d_weight.same_shape(p.layers[k].weight) ||
            !grads.layers[k].d_bias.same_shape(p.layers[k].bias))
            throw DimensionError("optimizer_step: gradient shape mismatch at layer " + std::to_string(k));
        if (!grads.layers[k].d_weight.all_finite() || !grads.layers[k].d_bias.all_finite())
            throw NumericError("optimizer_step: non-finite gradient at layer " + std::to_string(k));
    }
    if (p.moments.size() != p.layers.size()) p.moments.resize(p.layers.size());
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        detail::ensure_moment(p.moments[k].m_weight, p.layers[k].weight, "weight");
        detail::ensure_moment(p.moments[k].v_weight, p.layers[k].weight, "weight");
        detail::ensure_moment(p.moments[k].m_bias, p.layers[k].bias, "bias");
        detail::ensure_moment(p.moments[k].v_bias, p.layers[k].bias, "bias");
    }
    p.step_count += 1;
    const double t = static_cast<double>(p.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        detail::adam_update_tensor(p.layers[k].weight, p.moments[k].m_weight, p.moments[k].v_weight,
                                   grads.layers[k].d_weight, lr, cfg, bc1, bc2);
        detail::adam_update_tensor(p.layers[k].bias, p.moments[k].m_bias, p.moments[k].v_bias,
                                   grads.layers[k].d_bias, lr, cfg, bc1, bc2);
    }
}

} // namespace knowsr::nn
