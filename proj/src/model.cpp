#include "protoflow/model.hpp"

#include <algorithm>
#include <cmath>

#include "protoflow/error.hpp"
#include "protoflow/rng.hpp"

namespace protoflow::model {

using num::Tape;
using num::Tensor;

EncoderConfig EncoderConfig::desk(int input_dim, int hidden, int encoding) {
    EncoderConfig c;
    c.hidden_dim = hidden;
    c.encoding_dim = encoding;
    c.input_dim = input_dim;
    return c;
}

void EncoderConfig::validate() const {
    if (num_layers < 1 || hidden_dim < 1 || encoding_dim < 1 || heads < 1 ||
        num_edge_types < 1 || edge_embed_dim < 1 || input_dim < 1)
        throw Error("encoder config: all dimensions must be positive");
    if (encoding_dim > hidden_dim)
        throw Error("encoder config: encoding_dim must be <= hidden_dim");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
        throw Error("encoder config: leaky slope must be in (0,1)");
}

int EncoderConfig::layer_in(int i) const {
    return i == 0 ? input_dim : hidden_dim;
}

int EncoderConfig::layer_out(int i) const {
    return i == num_layers - 1 ? encoding_dim : hidden_dim;
}

namespace {

// uniform +-sqrt(6 / (fan_in + fan_out))
Tensor glorot(Rng& rng, std::size_t rows, std::size_t cols, const std::string& name) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> data(rows * cols);
    for (double& v : data) v = rng.uniform(-bound, bound);
    Tensor t = Tensor::from(std::move(data), {rows, cols}, true);
    t.set_name(name);
    return t;
}

Tensor zeros_named(std::size_t rows, std::size_t cols, const std::string& name) {
    Tensor t = Tensor::zeros({rows, cols}, true);
    t.set_name(name);
    return t;
}

}  // namespace

ModelParams ModelParams::init(const EncoderConfig& cfg, int num_classes,
                              std::uint64_t seed) {
    cfg.validate();
    if (num_classes < 1) throw Error("model init: num_classes must be >= 1");
    Rng rng(mix_seed(seed, 7));
    ModelParams p;
    p.cfg = cfg;
    p.num_classes = num_classes;
    for (int l = 0; l < cfg.num_layers; ++l) {
        GatLayerParams layer;
        const auto fin = static_cast<std::size_t>(cfg.layer_in(l));
        const auto fout = static_cast<std::size_t>(cfg.layer_out(l));
        const std::string prefix = "gat" + std::to_string(l) + ".";
        for (int h = 0; h < cfg.heads; ++h) {
            const std::string hp = prefix + "h" + std::to_string(h) + ".";
            layer.w_left.push_back(glorot(rng, fin, fout, hp + "w_left"));
            layer.w_right.push_back(glorot(rng, fin, fout, hp + "w_right"));
            layer.attn.push_back(glorot(rng, fout, 1, hp + "attn"));
        }
        layer.edge_embed = glorot(rng, static_cast<std::size_t>(cfg.num_edge_types) + 1,
                                  static_cast<std::size_t>(cfg.edge_embed_dim),
                                  prefix + "edge_embed");
        layer.edge_proj = glorot(rng, static_cast<std::size_t>(cfg.edge_embed_dim), fout,
                                 prefix + "edge_proj");
        layer.bias = zeros_named(1, fout, prefix + "bias");
        p.layers.push_back(std::move(layer));
    }
    const auto dz = static_cast<std::size_t>(cfg.encoding_dim);
    const auto dh = static_cast<std::size_t>(cfg.hidden_dim);
    const auto d = static_cast<std::size_t>(cfg.input_dim);
    p.dec_w1 = glorot(rng, dz, dh, "dec.w1");
    p.dec_b1 = zeros_named(1, dh, "dec.b1");
    p.dec_w2 = glorot(rng, dh, dh, "dec.w2");
    p.dec_b2 = zeros_named(1, dh, "dec.b2");
    p.dec_w3 = glorot(rng, dh, d, "dec.w3");
    p.dec_b3 = zeros_named(1, d, "dec.b3");
    p.head_w = glorot(rng, dz, static_cast<std::size_t>(num_classes), "head.w");
    p.head_b = zeros_named(1, static_cast<std::size_t>(num_classes), "head.b");
    return p;
}

std::vector<NamedTensor> ModelParams::named() const {
    std::vector<NamedTensor> out;
    for (const GatLayerParams& l : layers) {
        for (std::size_t h = 0; h < l.w_left.size(); ++h) {
            out.push_back({l.w_left[h].name(), l.w_left[h]});
            out.push_back({l.w_right[h].name(), l.w_right[h]});
            out.push_back({l.attn[h].name(), l.attn[h]});
        }
        out.push_back({l.edge_embed.name(), l.edge_embed});
        out.push_back({l.edge_proj.name(), l.edge_proj});
        out.push_back({l.bias.name(), l.bias});
    }
    for (const Tensor& t : {dec_w1, dec_b1, dec_w2, dec_b2, dec_w3, dec_b3, head_w, head_b})
        out.push_back({t.name(), t});
    return out;
}

std::vector<Tensor> ModelParams::encoder_tensors() const {
    std::vector<Tensor> out;
    for (const GatLayerParams& l : layers) {
        for (std::size_t h = 0; h < l.w_left.size(); ++h) {
            out.push_back(l.w_left[h]);
            out.push_back(l.w_right[h]);
            out.push_back(l.attn[h]);
        }
        out.push_back(l.edge_embed);
        out.push_back(l.edge_proj);
        out.push_back(l.bias);
    }
    return out;
}

std::vector<Tensor> ModelParams::decoder_tensors() const {
    return {dec_w1, dec_b1, dec_w2, dec_b2, dec_w3, dec_b3};
}

std::vector<Tensor> ModelParams::head_tensors() const { return {head_w, head_b}; }

std::vector<Tensor> ModelParams::all_tensors() const {
    std::vector<Tensor> out = encoder_tensors();
    for (const Tensor& t : decoder_tensors()) out.push_back(t);
    for (const Tensor& t : head_tensors()) out.push_back(t);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : all_tensors()) n += t.numel();
    return n;
}

ModelParams ModelParams::clone() const {
    ModelParams p;
    p.cfg = cfg;
    p.num_classes = num_classes;
    for (const GatLayerParams& l : layers) {
        GatLayerParams c;
        for (const Tensor& t : l.w_left) c.w_left.push_back(t.clone());
        for (const Tensor& t : l.w_right) c.w_right.push_back(t.clone());
        for (const Tensor& t : l.attn) c.attn.push_back(t.clone());
        c.edge_embed = l.edge_embed.clone();
        c.edge_proj = l.edge_proj.clone();
        c.bias = l.bias.clone();
        p.layers.push_back(std::move(c));
    }
    p.dec_w1 = dec_w1.clone();
    p.dec_b1 = dec_b1.clone();
    p.dec_w2 = dec_w2.clone();
    p.dec_b2 = dec_b2.clone();
    p.dec_w3 = dec_w3.clone();
    p.dec_b3 = dec_b3.clone();
    p.head_w = head_w.clone();
    p.head_b = head_b.clone();
    return p;
}

void ModelParams::set_requires_grad(bool encoder, bool decoder, bool head) {
    for (Tensor t : encoder_tensors()) t.set_requires_grad(encoder);
    for (Tensor t : decoder_tensors()) t.set_requires_grad(decoder);
    for (Tensor t : head_tensors()) t.set_requires_grad(head);
}

GatOutput gat_layer(Tape& tape, const Tensor& h, const std::vector<sg::TypedEdge>& edges,
                    std::size_t num_nodes, const GatLayerParams& params,
                    const EncoderConfig& cfg, int layer_idx) {
    if (edges.empty()) throw Error("gat_layer: empty edge list");
    std::vector<std::int64_t> src, dst;
    src.reserve(edges.size());
    dst.reserve(edges.size());
    std::vector<std::int64_t> etype;
    etype.reserve(edges.size());
    for (const sg::TypedEdge& e : edges) {
        src.push_back(e.src);
        dst.push_back(e.dst);
        etype.push_back(e.type);
    }

    // per-edge type embedding rows, projected up to the layer width
    Tensor etab = num::matmul(tape, params.edge_embed, params.edge_proj);
    Tensor e_r = num::gather_rows(tape, etab, etype);

    Tensor agg;  // mean over heads of the aggregated messages
    Tensor alpha_last;
    for (std::size_t head = 0; head < params.w_left.size(); ++head) {
        Tensor hl = num::matmul(tape, h, params.w_left[head]);
        Tensor hr = num::matmul(tape, h, params.w_right[head]);
        Tensor msg = num::add(tape, num::gather_rows(tape, hr, src), e_r);
        Tensor pre = num::add(tape, num::gather_rows(tape, hl, dst), msg);
        Tensor act = num::leaky_relu(tape, pre, cfg.leaky_slope);
        Tensor scores = num::matmul(tape, act, params.attn[head]);
        Tensor alpha = num::segment_softmax_sorted(tape, scores, dst, num_nodes);
        Tensor weighted = num::scale_rows(tape, msg, alpha);
        Tensor head_agg = num::segment_sum_sorted(tape, weighted, dst, num_nodes);
        agg = agg.valid() ? num::add(tape, agg, head_agg) : head_agg;
        alpha_last = alpha;
    }
    if (params.w_left.size() > 1)
        agg = num::scale(tape, agg, 1.0 / static_cast<double>(params.w_left.size()));
    Tensor out = num::elu(tape, num::add(tape, agg, params.bias));
    (void)layer_idx;
    return {out, alpha_last};
}

namespace {

// self-loops for every node, then stable sort by destination so the segment
// ops see contiguous groups
std::vector<sg::TypedEdge> prepare_edges(const sg::GraphBatch& batch,
                                         int num_edge_types) {
    std::vector<sg::TypedEdge> edges = batch.edges;
    for (const sg::TypedEdge& e : edges) {
        if (e.src < 0 || e.dst < 0 ||
            static_cast<std::size_t>(e.src) >= batch.segments.size() ||
            static_cast<std::size_t>(e.dst) >= batch.segments.size())
            throw DataError("encode: edge endpoint out of range");
        if (e.type < 0 || e.type >= num_edge_types)
            throw DataError("encode: edge type " + std::to_string(e.type) +
                            " out of range");
    }
    for (std::size_t n = 0; n < batch.segments.size(); ++n)
        edges.push_back({static_cast<std::int64_t>(n), static_cast<std::int64_t>(n),
                         num_edge_types});
    std::stable_sort(edges.begin(), edges.end(),
                     [](const sg::TypedEdge& a, const sg::TypedEdge& b) {
                         return a.dst < b.dst;
                     });
    return edges;
}

}  // namespace

EncodeOutput encode(Tape& tape, const sg::GraphBatch& batch, const ModelParams& params) {
    if (batch.segments.empty()) throw DataError("encode: empty batch");
    const auto edges = prepare_edges(batch, params.cfg.num_edge_types);
    Tensor h = batch.x;
    for (int l = 0; l < params.cfg.num_layers; ++l)
        h = gat_layer(tape, h, edges, batch.segments.size(),
                      params.layers[static_cast<std::size_t>(l)], params.cfg, l)
                .h;
    Tensor z = num::segment_mean(tape, h, batch.segments, batch.num_graphs);
    return {h, z};
}

Tensor decode(Tape& tape, const Tensor& h, const ModelParams& params) {
    Tensor h1 = num::elu(tape, num::add(tape, num::matmul(tape, h, params.dec_w1),
                                        params.dec_b1));
    Tensor h2 = num::elu(tape, num::add(tape, num::matmul(tape, h1, params.dec_w2),
                                        params.dec_b2));
    return num::add(tape, num::matmul(tape, h2, params.dec_w3), params.dec_b3);
}

Tensor head_logits(Tape& tape, const Tensor& z, const ModelParams& params) {
    return num::add(tape, num::matmul(tape, z, params.head_w), params.head_b);
}

}  // namespace protoflow::model
