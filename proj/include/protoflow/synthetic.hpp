#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "protoflow/scene_graph.hpp"

namespace protoflow::sg {

struct TemplateNode {
    int class_id = 0;
    double x = 0.0, y = 0.0;  // normalized planar centroid
};

struct TemplateEdge {
    int src = 0, dst = 0;
    RelType rel = kSpatial;
};

// one sub-technique motif: the nodes/edges a phase emits per frame
struct SubTemplate {
    std::vector<TemplateNode> nodes;
    std::vector<TemplateEdge> edges;
};

struct GeneratorConfig {
    std::uint64_t seed = 42;
    int num_train = 20, num_val = 5, num_test = 10;
    int frames_min = 180, frames_max = 220;
    int num_phases = 6;
    int node_classes = 10;
    int d_attr = 2;
    // Markov chain over phases; near-band-diagonal by default
    std::vector<std::vector<double>> transition;
    std::vector<std::vector<SubTemplate>> templates;  // [phase][subtech]
    int multi_technique_phase = 2;
    // rare phase: reached only by injected segments, never by the chain
    int rare_phase = 5;
    double rare_prob = 0.05;
    int rare_len_min = 12, rare_len_max = 25;
    double jitter = 0.02;         // per-frame attr noise sigma
    double node_dropout = 0.03;   // per-node drop probability
    double edge_flip = 0.02;      // spatial<->semantic flip probability
    double video_style = 0.03;    // per-video attr offset sigma
    double sampling_period_s = 3.0;

    // the six-phase cataract-style workflow used throughout the tests
    static GeneratorConfig defaults();
    // five phases, shorter videos, heavier noise and per-video style shift:
    // the regime where single-video training has to generalize
    static GeneratorConfig fewshot_variant();

    void validate() const;
};

struct FrameMeta {
    std::string video_id;
    int frame_idx = 0;
    int subtech_id = 0;
    bool deviation = false;
};

struct SyntheticData {
    Dataset dataset;
    std::vector<FrameMeta> metadata;
    DatasetManifest manifest;
};

// Fully seeded synthesis: per video, a Markov phase sequence quantized to
// frames, one held sub-technique per phase run, template emission with
// jitter/dropout/edge flips, and rare-phase segments injected per probability
// (with at least one injected video per split whenever rare_prob > 0).
SyntheticData generate_synthetic(const GeneratorConfig& cfg);

void save_metadata(const std::vector<FrameMeta>& meta, const std::filesystem::path& path);
std::vector<FrameMeta> load_metadata(const std::filesystem::path& path);

}  // namespace protoflow::sg
