#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protoflow/tensor.hpp"

namespace protoflow::sg {

// relation types; Self is only ever inserted by the encoder
enum RelType : int { kSpatial = 0, kSemantic = 1, kTemporal = 2, kSelf = 3 };

struct SgNode {
    int id = 0;
    int class_id = 0;
    std::vector<double> attrs;
};

struct SgEdge {
    int src = 0;
    int dst = 0;
    RelType rel = kSpatial;
};

// one frame's scene graph
struct SceneGraph {
    std::string video_id;
    int frame_idx = 0;
    double timestamp_s = 0.0;
    int phase_label = 0;
    std::vector<SgNode> nodes;
    std::vector<SgEdge> edges;
};

struct VideoFrames {
    std::string video_id;
    std::vector<SceneGraph> frames;  // sorted by frame_idx
};

// videos sorted by video_id
using Dataset = std::vector<VideoFrames>;

struct DatasetManifest {
    std::vector<std::string> train, val, test;
    int num_classes = 0;
    int node_classes = 0;
    int d_attr = 0;
};

// How a DSG's node feature matrix is laid out: one-hot node class, raw
// attributes, then a one-hot frame offset within the window (0 = the target
// frame, counting backwards, capped at w_max buckets).
struct FeatureSpec {
    int node_classes = 0;
    int d_attr = 0;
    int w_max = 8;
    int dim() const { return node_classes + d_attr + w_max; }
};

struct TypedEdge {
    std::int64_t src = 0;
    std::int64_t dst = 0;
    int type = kSpatial;
};

struct DsgNode {
    int frame_offset = 0;  // frames back from the target frame
    int class_id = 0;
    int source_node_id = 0;  // id within its source frame
};

// Temporal stack of up to w consecutive frames: per-frame graphs plus
// temporal edges linking same-class nodes of adjacent frames.
struct DynamicSceneGraph {
    std::string video_id;
    int target_frame_idx = 0;
    int label = 0;
    int num_frames = 0;
    std::vector<DsgNode> nodes;
    std::vector<TypedEdge> edges;
    num::Tensor x;  // node features, [N x FeatureSpec::dim()]
};

struct GraphBatch {
    num::Tensor x;  // concatenated node features
    std::vector<TypedEdge> edges;  // node indices offset per graph
    std::vector<std::int64_t> segments;  // node -> graph index, non-decreasing
    std::vector<int> labels;
    std::size_t num_graphs = 0;
};

// --- dataset files ---------------------------------------------------------

// Parses the JSONL graph file, validating node/edge invariants; frames are
// grouped by video and sorted by frame_idx, videos sorted by id.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string serialize_frame(const SceneGraph& g);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

const VideoFrames* find_video(const Dataset& ds, const std::string& video_id);
std::vector<const VideoFrames*> select_videos(const Dataset& ds,
                                              const std::vector<std::string>& ids);

// --- window construction ----------------------------------------------------

// Window over frames [max(0, t-w+1), t]; the label is frame t's phase.
DynamicSceneGraph build_dsg(const std::vector<SceneGraph>& frames, int w, int t,
                            const FeatureSpec& spec);

// every frame of every listed video becomes one window
std::vector<DynamicSceneGraph> build_all_windows(
    const std::vector<const VideoFrames*>& videos, int w, const FeatureSpec& spec);

// seeded shuffle, then contiguous chunks (final batch may be smaller)
std::vector<GraphBatch> make_batches(const std::vector<DynamicSceneGraph>& dsgs,
                                     std::size_t batch_size, std::uint64_t seed);

GraphBatch single_batch(const std::vector<const DynamicSceneGraph*>& dsgs);

// train reduced to n seeded-random videos; val/test untouched
DatasetManifest few_shot_subsample(const DatasetManifest& split, std::size_t n,
                                   std::uint64_t seed);

}  // namespace protoflow::sg
