#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protoflow/model.hpp"
#include "protoflow/scene_graph.hpp"

// The four-stage pipeline: autoencoder + head pretraining, per-class latent
// clustering into prototypes, distance-softmax fine-tuning, and prototype
// inference.

namespace protoflow::flow {

struct TrainConfig {
    int pretrain_epochs = 50;
    int finetune_epochs = 50;
    double base_lr = 3e-4;
    int lr_step_epochs = 20;
    int batch_size = 64;
    int k = 3;             // prototypes per class
    int patience = 10;     // early stopping on val accuracy
    double lambda_rec = 1.0, lambda_cls = 1.0, lambda_reg = 1.0;
    int window = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LossReport {
    int epoch = 0;
    std::string split;  // "train" or "val"
    double l_rec = 0.0, l_cls = 0.0, l_reg = 0.0, total = 0.0;
    double accuracy = 0.0;
};

std::string history_csv(const std::vector<LossReport>& history);

struct Embedded {
    std::vector<double> z;
    int label = 0;
    std::string video_id;
    int frame_idx = 0;
};

struct PretrainResult {
    model::ModelParams params;
    std::vector<LossReport> history;
};

// encode -> (decode vs X) + (head softmax vs y), Adam on all parameters,
// early stopping on val accuracy; returns the best-val parameters
PretrainResult pretrain(const std::vector<sg::DynamicSceneGraph>& train,
                        const std::vector<sg::DynamicSceneGraph>& val,
                        model::ModelParams params, const TrainConfig& cfg);

std::vector<Embedded> embed_all(const std::vector<sg::DynamicSceneGraph>& windows,
                                const model::ModelParams& params);

// per-class k-means (k-means++ seeding, Lloyd until shift < 1e-9 or 100
// iterations); a class with fewer than K embeddings keeps its points and
// fills the remaining slots with the class mean
model::PrototypeSet init_prototypes(const std::vector<Embedded>& embeddings,
                                    int num_classes, int k, std::uint64_t seed);

// k-means internals exposed for the oracle tests
struct KmeansResult {
    std::vector<std::vector<double>> centroids;
    std::vector<int> assignment;
    std::vector<double> inertia_per_iter;
};
KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int max_iters = 100, double tol = 1e-9);

struct PrototypePrediction {
    num::Tensor y_hat;  // [B x C], the per-class averaged softmax mass (sums to 1/K)
    num::Tensor q;      // [B x C], class mass K*y_hat (a proper distribution)
    num::Tensor d;      // [B x C*K] Euclidean distances
};

PrototypePrediction prototype_predict(num::Tape& tape, const num::Tensor& z,
                                      const model::PrototypeSet& protos);

// distance -> class mass for one row of distances (no tape); used for
// property tests and the header-free inference path
std::vector<double> class_mass_from_distances(const std::vector<double>& d_row,
                                              int num_classes, int k);

int argmax_row(std::span<const double> row);

struct FinetuneResult {
    std::vector<LossReport> history;
};

// Adam updates the encoder and the prototypes; decoder and head are frozen.
// P0 never moves. Ends by recomputing medoids and distance calibration from
// the final train-split embeddings.
FinetuneResult finetune(const std::vector<sg::DynamicSceneGraph>& train,
                        const std::vector<sg::DynamicSceneGraph>& val,
                        model::ModelParams& params, model::PrototypeSet& protos,
                        const TrainConfig& cfg);

struct InferRow {
    std::string video_id;
    int frame_idx = 0;
    int label = 0;
    int pred = 0;
    std::vector<double> distances;  // C*K
    std::vector<double> y_hat;      // C
};

// sliding truncated window over one video's frames
std::vector<InferRow> infer(const sg::VideoFrames& video, const model::ModelParams& params,
                            const model::PrototypeSet& protos, const sg::FeatureSpec& spec,
                            int window);

// head-only prediction with the pretrained classifier (the GATv2 baseline)
std::vector<InferRow> infer_head(const sg::VideoFrames& video,
                                 const model::ModelParams& params,
                                 const sg::FeatureSpec& spec, int window);

// train-split distance statistics backing the deviation thresholds
model::Calibration calibrate(const std::vector<Embedded>& train_embeddings,
                             const model::PrototypeSet& protos, double lambda = 3.0);

}  // namespace protoflow::flow
