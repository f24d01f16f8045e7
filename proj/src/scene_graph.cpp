#include "protoflow/scene_graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "protoflow/error.hpp"
#include "protoflow/rng.hpp"

namespace protoflow::sg {

using nlohmann::json;

namespace {

RelType rel_from_string(const std::string& s, std::size_t line_no) {
    if (s == "spatial") return kSpatial;
    if (s == "semantic") return kSemantic;
    throw DataError("line " + std::to_string(line_no) + ": unknown edge rel '" + s + "'");
}

const char* rel_to_string(RelType r) {
    return r == kSpatial ? "spatial" : "semantic";
}

SceneGraph parse_frame(const json& j, std::size_t line_no) {
    SceneGraph g;
    g.video_id = j.at("video_id").get<std::string>();
    g.frame_idx = j.at("frame_idx").get<int>();
    g.timestamp_s = j.at("timestamp_s").get<double>();
    g.phase_label = j.at("phase_label").get<int>();
    std::unordered_set<int> ids;
    for (const json& jn : j.at("nodes")) {
        SgNode n;
        n.id = jn.at("id").get<int>();
        n.class_id = jn.at("class_id").get<int>();
        n.attrs = jn.at("attrs").get<std::vector<double>>();
        if (!ids.insert(n.id).second)
            throw DataError("line " + std::to_string(line_no) + ": duplicate node id " +
                            std::to_string(n.id));
        g.nodes.push_back(std::move(n));
    }
    if (g.nodes.empty())
        throw DataError("line " + std::to_string(line_no) + ": frame has no nodes");
    for (const json& je : j.at("edges")) {
        SgEdge e;
        e.src = je.at("src").get<int>();
        e.dst = je.at("dst").get<int>();
        e.rel = rel_from_string(je.at("rel").get<std::string>(), line_no);
        for (int endpoint : {e.src, e.dst})
            if (!ids.contains(endpoint))
                throw DataError("line " + std::to_string(line_no) +
                                ": dangling edge endpoint, node id " +
                                std::to_string(endpoint) + " does not exist");
        g.edges.push_back(e);
    }
    return g;
}

}  // namespace

std::string serialize_frame(const SceneGraph& g) {
    json j;
    j["video_id"] = g.video_id;
    j["frame_idx"] = g.frame_idx;
    j["timestamp_s"] = g.timestamp_s;
    j["phase_label"] = g.phase_label;
    j["nodes"] = json::array();
    for (const SgNode& n : g.nodes) {
        json jn;
        jn["id"] = n.id;
        jn["class_id"] = n.class_id;
        jn["attrs"] = n.attrs;
        j["nodes"].push_back(std::move(jn));
    }
    j["edges"] = json::array();
    for (const SgEdge& e : g.edges) {
        json je;
        je["src"] = e.src;
        je["dst"] = e.dst;
        je["rel"] = rel_to_string(e.rel);
        j["edges"].push_back(std::move(je));
    }
    return j.dump();
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file " + path.string());
    std::map<std::string, std::vector<SceneGraph>> by_video;
    std::set<std::pair<std::string, int>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " +
                            e.what());
        }
        SceneGraph g;
        try {
            g = parse_frame(j, line_no);
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": bad frame record: " +
                            e.what());
        }
        if (!seen.insert({g.video_id, g.frame_idx}).second)
            throw DataError("line " + std::to_string(line_no) + ": duplicate frame (" +
                            g.video_id + ", " + std::to_string(g.frame_idx) + ")");
        by_video[g.video_id].push_back(std::move(g));
    }

    Dataset ds;
    std::optional<std::size_t> d_attr;
    for (auto& [vid, frames] : by_video) {
        std::sort(frames.begin(), frames.end(),
                  [](const SceneGraph& a, const SceneGraph& b) {
                      return a.frame_idx < b.frame_idx;
                  });
        for (const SceneGraph& g : frames)
            for (const SgNode& n : g.nodes) {
                if (!d_attr) d_attr = n.attrs.size();
                if (n.attrs.size() != *d_attr)
                    throw DataError("video " + vid + " frame " +
                                    std::to_string(g.frame_idx) +
                                    ": attr length mismatch (" +
                                    std::to_string(n.attrs.size()) + " vs " +
                                    std::to_string(*d_attr) + ")");
            }
        ds.push_back({vid, std::move(frames)});
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset file " + path.string());
    for (const VideoFrames& v : ds)
        for (const SceneGraph& g : v.frames) out << serialize_frame(g) << "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("manifest " + path.string() + ": malformed JSON: " + e.what());
    }
    DatasetManifest m;
    try {
        m.train = j.at("train").get<std::vector<std::string>>();
        m.val = j.at("val").get<std::vector<std::string>>();
        m.test = j.at("test").get<std::vector<std::string>>();
        m.num_classes = j.at("num_classes").get<int>();
        m.node_classes = j.at("node_classes").get<int>();
        m.d_attr = j.at("d_attr").get<int>();
    } catch (const json::exception& e) {
        throw DataError("manifest " + path.string() + ": missing field: " + e.what());
    }
    std::set<std::string> all;
    for (const auto* split : {&m.train, &m.val, &m.test})
        for (const std::string& v : *split)
            if (!all.insert(v).second)
                throw DataError("manifest: video '" + v + "' appears in two splits");
    return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    json j;
    j["train"] = m.train;
    j["val"] = m.val;
    j["test"] = m.test;
    j["num_classes"] = m.num_classes;
    j["node_classes"] = m.node_classes;
    j["d_attr"] = m.d_attr;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest file " + path.string());
    out << j.dump(2) << "\n";
}

const VideoFrames* find_video(const Dataset& ds, const std::string& video_id) {
    for (const VideoFrames& v : ds)
        if (v.video_id == video_id) return &v;
    return nullptr;
}

std::vector<const VideoFrames*> select_videos(const Dataset& ds,
                                              const std::vector<std::string>& ids) {
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    std::vector<const VideoFrames*> out;
    for (const std::string& id : sorted) {
        const VideoFrames* v = find_video(ds, id);
        if (!v) throw DataError("dataset has no video '" + id + "'");
        out.push_back(v);
    }
    return out;
}

DynamicSceneGraph build_dsg(const std::vector<SceneGraph>& frames, int w, int t,
                            const FeatureSpec& spec) {
    if (w < 1) throw DataError("build_dsg: window must be >= 1");
    if (t < 0 || static_cast<std::size_t>(t) >= frames.size())
        throw DataError("build_dsg: target frame " + std::to_string(t) + " out of range");
    const int first = std::max(0, t - w + 1);

    DynamicSceneGraph dsg;
    dsg.video_id = frames[static_cast<std::size_t>(t)].video_id;
    dsg.target_frame_idx = frames[static_cast<std::size_t>(t)].frame_idx;
    dsg.label = frames[static_cast<std::size_t>(t)].phase_label;
    dsg.num_frames = t - first + 1;

    // node index layout: frames in increasing order, nodes in file order
    std::vector<std::int64_t> frame_node_base;
    std::vector<std::unordered_map<int, std::int64_t>> id_to_index;
    std::int64_t next = 0;
    for (int f = first; f <= t; ++f) {
        const SceneGraph& g = frames[static_cast<std::size_t>(f)];
        frame_node_base.push_back(next);
        auto& ids = id_to_index.emplace_back();
        for (const SgNode& n : g.nodes) {
            ids[n.id] = next;
            dsg.nodes.push_back({t - f, n.class_id, n.id});
            ++next;
        }
    }

    for (int f = first; f <= t; ++f) {
        const SceneGraph& g = frames[static_cast<std::size_t>(f)];
        const auto& ids = id_to_index[static_cast<std::size_t>(f - first)];
        for (const SgEdge& e : g.edges)
            dsg.edges.push_back({ids.at(e.src), ids.at(e.dst), e.rel});
    }
    // temporal edges: all same-class pairs across consecutive frames, directed
    // forward in time
    for (int f = first; f < t; ++f) {
        const SceneGraph& ga = frames[static_cast<std::size_t>(f)];
        const SceneGraph& gb = frames[static_cast<std::size_t>(f + 1)];
        const auto& ia = id_to_index[static_cast<std::size_t>(f - first)];
        const auto& ib = id_to_index[static_cast<std::size_t>(f + 1 - first)];
        for (const SgNode& na : ga.nodes)
            for (const SgNode& nb : gb.nodes)
                if (na.class_id == nb.class_id)
                    dsg.edges.push_back({ia.at(na.id), ib.at(nb.id), kTemporal});
    }

    // features: one-hot class | attrs | one-hot capped frame offset
    const std::size_t d = static_cast<std::size_t>(spec.dim());
    dsg.x = num::Tensor::zeros({dsg.nodes.size(), d});
    auto xd = dsg.x.mut_data();
    std::size_t row = 0;
    for (int f = first; f <= t; ++f) {
        const SceneGraph& g = frames[static_cast<std::size_t>(f)];
        for (const SgNode& n : g.nodes) {
            double* xr = xd.data() + row * d;
            if (n.class_id < 0 || n.class_id >= spec.node_classes)
                throw DataError("build_dsg: node class " + std::to_string(n.class_id) +
                                " out of range [0," + std::to_string(spec.node_classes) +
                                ")");
            if (static_cast<int>(n.attrs.size()) != spec.d_attr)
                throw DataError("build_dsg: attr length " +
                                std::to_string(n.attrs.size()) + " != d_attr " +
                                std::to_string(spec.d_attr));
            xr[static_cast<std::size_t>(n.class_id)] = 1.0;
            for (int a = 0; a < spec.d_attr; ++a)
                xr[static_cast<std::size_t>(spec.node_classes + a)] =
                    n.attrs[static_cast<std::size_t>(a)];
            const int offset = std::min(t - f, spec.w_max - 1);
            xr[static_cast<std::size_t>(spec.node_classes + spec.d_attr + offset)] = 1.0;
            ++row;
        }
    }
    return dsg;
}

std::vector<DynamicSceneGraph> build_all_windows(
    const std::vector<const VideoFrames*>& videos, int w, const FeatureSpec& spec) {
    std::vector<DynamicSceneGraph> out;
    for (const VideoFrames* v : videos)
        for (std::size_t t = 0; t < v->frames.size(); ++t)
            out.push_back(build_dsg(v->frames, w, static_cast<int>(t), spec));
    return out;
}

GraphBatch single_batch(const std::vector<const DynamicSceneGraph*>& dsgs) {
    GraphBatch b;
    b.num_graphs = dsgs.size();
    std::size_t total_nodes = 0;
    for (const DynamicSceneGraph* g : dsgs) total_nodes += g->nodes.size();
    const std::size_t d = dsgs.empty() ? 0 : dsgs[0]->x.cols();
    b.x = num::Tensor::zeros({total_nodes, d});
    auto xd = b.x.mut_data();
    std::int64_t offset = 0;
    for (std::size_t gi = 0; gi < dsgs.size(); ++gi) {
        const DynamicSceneGraph* g = dsgs[gi];
        auto src = g->x.data();
        std::copy(src.begin(), src.end(),
                  xd.begin() + static_cast<std::ptrdiff_t>(offset * static_cast<std::int64_t>(d)));
        for (const TypedEdge& e : g->edges)
            b.edges.push_back({e.src + offset, e.dst + offset, e.type});
        for (std::size_t n = 0; n < g->nodes.size(); ++n)
            b.segments.push_back(static_cast<std::int64_t>(gi));
        b.labels.push_back(g->label);
        offset += static_cast<std::int64_t>(g->nodes.size());
    }
    return b;
}

std::vector<GraphBatch> make_batches(const std::vector<DynamicSceneGraph>& dsgs,
                                     std::size_t batch_size, std::uint64_t seed) {
    if (batch_size < 1) throw DataError("make_batches: batch_size must be >= 1");
    std::vector<std::size_t> order(dsgs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<GraphBatch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        std::vector<const DynamicSceneGraph*> chunk;
        for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i)
            chunk.push_back(&dsgs[order[i]]);
        out.push_back(single_batch(chunk));
    }
    return out;
}

DatasetManifest few_shot_subsample(const DatasetManifest& split, std::size_t n,
                                   std::uint64_t seed) {
    if (n > split.train.size())
        throw DataError("few_shot_subsample: n=" + std::to_string(n) +
                        " exceeds train size " + std::to_string(split.train.size()));
    DatasetManifest out = split;
    if (n == split.train.size()) return out;
    std::vector<std::string> pool = split.train;
    Rng rng(seed);
    rng.shuffle(pool);
    out.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(out.train.begin(), out.train.end());
    return out;
}

}  // namespace protoflow::sg
