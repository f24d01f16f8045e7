#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protoflow/adam.hpp"
#include "protoflow/ops.hpp"
#include "protoflow/scene_graph.hpp"

namespace protoflow::model {

struct EncoderConfig {
    int num_layers = 3;
    int hidden_dim = 1024;
    int encoding_dim = 512;
    int heads = 1;
    double leaky_slope = 0.2;
    int num_edge_types = 3;  // spatial, semantic, temporal; self adds a 4th row
    int edge_embed_dim = 16;
    int input_dim = 0;

    // small dims for tests and the synthetic benchmark
    static EncoderConfig desk(int input_dim, int hidden = 128, int encoding = 64);
    void validate() const;
    // output width of layer i (hidden for all but the last, encoding last)
    int layer_out(int i) const;
    int layer_in(int i) const;
};

struct GatLayerParams {
    // one entry per attention head
    std::vector<num::Tensor> w_left, w_right, attn;
    num::Tensor edge_embed;  // [(num_edge_types + 1) x edge_embed_dim]
    num::Tensor edge_proj;   // [edge_embed_dim x f_out]
    num::Tensor bias;        // [1 x f_out]
};

struct NamedTensor {
    std::string name;
    num::Tensor tensor;
};

struct ModelParams {
    EncoderConfig cfg;
    int num_classes = 0;
    std::vector<GatLayerParams> layers;
    num::Tensor dec_w1, dec_b1, dec_w2, dec_b2, dec_w3, dec_b3;
    num::Tensor head_w, head_b;  // [d_z x C], [1 x C]

    static ModelParams init(const EncoderConfig& cfg, int num_classes, std::uint64_t seed);

    std::vector<NamedTensor> named() const;  // fixed order, checkpoint layout
    std::vector<num::Tensor> encoder_tensors() const;
    std::vector<num::Tensor> decoder_tensors() const;
    std::vector<num::Tensor> head_tensors() const;
    std::vector<num::Tensor> all_tensors() const;
    std::size_t parameter_count() const;
    ModelParams clone() const;
    void set_requires_grad(bool encoder, bool decoder, bool head);
};

struct GatOutput {
    num::Tensor h;      // [N x f_out]
    num::Tensor alpha;  // attention per edge of the last head, [E x 1]
};

// One GATv2 layer over a typed edge list (self-loops must be present):
// e_ij = a . leaky_relu(W_l h_i + W_r h_j + E_r), alpha = softmax over
// incoming edges, h'_i = elu(mean over heads of sum_j alpha_ij (W_r h_j + E_r) + b).
// Edges must be sorted by destination.
GatOutput gat_layer(num::Tape& tape, const num::Tensor& h,
                    const std::vector<sg::TypedEdge>& edges, std::size_t num_nodes,
                    const GatLayerParams& params, const EncoderConfig& cfg, int layer_idx);

struct EncodeOutput {
    num::Tensor h;  // final node embeddings [N x d_z]
    num::Tensor z;  // pooled graph embeddings [B x d_z]
};

EncodeOutput encode(num::Tape& tape, const sg::GraphBatch& batch, const ModelParams& params);

num::Tensor decode(num::Tape& tape, const num::Tensor& h, const ModelParams& params);

num::Tensor head_logits(num::Tape& tape, const num::Tensor& z, const ModelParams& params);

// --- prototypes --------------------------------------------------------------

struct MedoidRef {
    std::string video_id;
    int frame_idx = 0;
};

struct Calibration {
    std::vector<double> mu, sigma;  // per class, train-split nearest-own-prototype
    double lambda = 3.0;            // threshold stiffness: tau = mu + lambda*sigma
};

struct PrototypeSet {
    num::Tensor p;   // [C*K x d_z]
    num::Tensor p0;  // frozen initial copy
    int num_classes = 0;
    int k = 0;
    std::vector<MedoidRef> medoids;  // one per slot
    std::optional<Calibration> calib;

    int class_of(std::size_t slot) const { return static_cast<int>(slot) / k; }
    std::size_t slots() const { return static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(k); }
};

// --- checkpoint --------------------------------------------------------------
// binary, little-endian: "PFLW" magic, u32 version, u64 json length, config
// json, u64 tensor count, then (u32 name len, name, u32 rank, u64 dims, f64
// payload) per tensor

struct CheckpointExtras {
    sg::FeatureSpec features;
    int window = 1;
    std::uint64_t seed = 0;
};

void save_checkpoint(const ModelParams& params, const PrototypeSet* protos,
                     const CheckpointExtras& extras, const std::filesystem::path& path);

struct LoadedCheckpoint {
    ModelParams params;
    std::optional<PrototypeSet> protos;
    CheckpointExtras extras;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace protoflow::model
