#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "knowsr/errors.hpp"
#include "knowsr/mlp.hpp"
#include "knowsr/textio.hpp"

namespace knowsr::nn {

namespace detail {

inline void write_values(std::ostream& out, const Tensor2& t) {
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (i) out << ' ';
        out << format_double(t.data[i]);
    }
    out << '\n';
}

inline void read_values(std::istream& in, Tensor2& t) {
    for (double& v : t.data)
        if (!(in >> v)) throw ConfigError("checkpoint: truncated value block");
}

} // namespace detail

/// Textual network record: layer shapes, activations, row-major values and
/// the optimizer step counter. Values round-trip exactly.
inline void save_mlp(std::ostream& out, const MlpParams& p) {
    out << "mlp v1\n";
    out << "layers " << p.layers.size() << '\n';
    out << "step " << p.step_count << '\n';
    for (const DenseLayer& layer : p.layers) {
        out << "layer " << layer.in_dim() << ' ' << layer.out_dim() << ' '
            << activation_name(layer.activation) << '\n';
        detail::write_values(out, layer.weight);
        detail::write_values(out, layer.bias);
    }
}

inline MlpParams load_mlp(std::istream& in) {
    std::string tag, version;
    if (!(in >> tag >> version) || tag != "mlp" || version != "v1")
        throw ConfigError("checkpoint: bad header");
    std::string key;
    std::size_t n_layers = 0;
    std::uint64_t step = 0;
    if (!(in >> key >> n_layers) || key != "layers")
        throw ConfigError("checkpoint: missing layer count");
    if (!(in >> key >> step) || key != "step")
        throw ConfigError("checkpoint: missing step counter");
    MlpParams p;
    p.step_count = step;
    for (std::size_t k = 0; k < n_layers; ++k) {
        std::size_t in_dim = 0, out_dim = 0;
        std::string act;
        if (!(in >> key >> in_dim >> out_dim >> act) || key != "layer")
            throw ConfigError("checkpoint: bad layer header");
        DenseLayer layer;
        layer.weight = Tensor2(in_dim, out_dim);
        layer.bias = Tensor2(1, out_dim);
        if (act == "relu")
            layer.activation = Activation::Relu;
        else if (act == "linear")
            layer.activation = Activation::Linear;
        else
            throw ConfigError("checkpoint: unknown activation '" + act + "'");
        detail::read_values(in, layer.weight);
        detail::read_values(in, layer.bias);
        AdamMoments mom;
        mom.m_weight = Tensor2(in_dim, out_dim);
        mom.v_weight = Tensor2(in_dim, out_dim);
        mom.m_bias = Tensor2(1, out_dim);
        mom.v_bias = Tensor2(1, out_dim);
        p.layers.push_back(std::move(layer));
        p.moments.push_back(std::move(mom));
    }
    validate_chain(p);
    return p;
}

inline void save_mlp_file(const std::string& path, const MlpParams& p) {
    std::ofstream out(path);
    if (!out) throw ConfigError("checkpoint: cannot open " + path + " for writing");
    save_mlp(out, p);
}

inline MlpParams load_mlp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("checkpoint: cannot open " + path);
    return load_mlp(in);
}

} // namespace knowsr::nn
