#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protoflow/flow.hpp"
#include "protoflow/synthetic.hpp"

namespace protoflow::evalx {

struct ClassScore {
    int class_id = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct VideoMetrics {
    std::string video_id;
    double accuracy = 0.0;
    double macro_f1 = 0.0;  // over classes present in this video's ground truth
    std::vector<ClassScore> per_class;
};

struct MetricsSummary {
    std::vector<VideoMetrics> videos;
    double mean_accuracy = 0.0;  // unweighted mean over videos
    double mean_macro_f1 = 0.0;
};

// preds/labels aligned per frame within each video
MetricsSummary per_video_metrics(
    const std::vector<std::vector<flow::InferRow>>& per_video);

std::string metrics_csv(const MetricsSummary& m);

// mean and (population) std over externally supplied runs
struct RunStats {
    double mean = 0.0, stddev = 0.0;
};
RunStats run_stats(const std::vector<double>& values);

// --- deviation flagging -------------------------------------------------------

struct DeviationReport {
    std::vector<double> min_dist;  // per frame, over the predicted class's slots
    std::vector<double> tau;       // per frame, threshold of the predicted class
    std::vector<bool> flag;
    std::vector<std::pair<int, int>> intervals;  // maximal [start, end] frame runs
};

// flag_t = (min over predicted-class slots of D_t) > tau_pred, with
// tau_c = mu_c + lambda * sigma_c from train calibration
DeviationReport distance_trace(const std::vector<flow::InferRow>& rows,
                               const model::PrototypeSet& protos);

std::string deviation_jsonl(const std::vector<flow::InferRow>& rows,
                            const DeviationReport& report);

// --- node-level outliers --------------------------------------------------------

struct NodeOutlier {
    std::size_t node_index = 0;  // index into the input DSG's node list
    int class_id = 0;
    double score = 0.0;
    int matched_medoid_node = -1;  // -1 when the class is absent in the medoid
};

struct NodeOutlierReport {
    std::size_t slot = 0;
    std::vector<NodeOutlier> nodes;
};

// encodes the input window and the slot's medoid window, then scores each
// input node by its nearest same-class medoid node in embedding space
NodeOutlierReport node_outlier_scores(const sg::DynamicSceneGraph& dsg,
                                      const sg::DynamicSceneGraph& medoid,
                                      const model::ModelParams& params,
                                      std::size_t slot);

// --- prototype structure --------------------------------------------------------

// fraction of one class's embeddings whose nearest same-class prototype
// agrees with the majority sub-technique of that prototype's cluster
double subtechnique_purity(const model::PrototypeSet& protos,
                           const std::vector<flow::Embedded>& class_embeddings,
                           const std::vector<int>& subtech_ids, int class_id);

// --- embedding export -------------------------------------------------------------

std::string embeddings_csv(const std::vector<flow::Embedded>& windows,
                           const model::PrototypeSet& protos);
void export_embeddings(const std::vector<flow::Embedded>& windows,
                       const model::PrototypeSet& protos,
                       const std::filesystem::path& path);

// --- few-shot benchmark --------------------------------------------------------------

struct FewshotRow {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string method;  // "protoflow" or "head"
    double accuracy = 0.0;
    double f1 = 0.0;
};

struct FewshotTable {
    std::vector<FewshotRow> rows;
};

std::string fewshot_csv(const FewshotTable& table);

// For each n and seed: subsample n train videos, pretrain once, evaluate the
// head-only baseline, then run prototype init + fine-tuning and evaluate
// ProtoFlow, always on the full test split.
FewshotTable fewshot_benchmark(const sg::Dataset& dataset,
                               const sg::DatasetManifest& manifest,
                               const model::EncoderConfig& enc_cfg,
                               const flow::TrainConfig& train_cfg,
                               const sg::FeatureSpec& spec,
                               const std::vector<std::size_t>& n_list,
                               const std::vector<std::uint64_t>& seeds);

}  // namespace protoflow::evalx
