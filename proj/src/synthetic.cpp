#include "protoflow/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "protoflow/error.hpp"
#include "protoflow/rng.hpp"

namespace protoflow::sg {

using nlohmann::json;

namespace {

// node classes of the synthetic world
enum : int {
    kCornea = 0,
    kIris = 1,
    kLens = 2,
    kCapsule = 3,
    kKnife = 4,
    kCystotome = 5,
    kForceps = 6,
    kPhaco = 7,
    kSpatula = 8,
    kVitrector = 9,
};

std::string video_name(int i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "video_%03d", i);
    return buf;
}

// phases reachable from phase 0 through positive-probability transitions
std::vector<bool> reachable_phases(const std::vector<std::vector<double>>& transition) {
    std::vector<bool> seen(transition.size(), false);
    std::vector<std::size_t> stack = {0};
    seen[0] = true;
    while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        for (std::size_t q = 0; q < transition[p].size(); ++q)
            if (transition[p][q] > 0.0 && !seen[q]) {
                seen[q] = true;
                stack.push_back(q);
            }
    }
    return seen;
}

}  // namespace

GeneratorConfig GeneratorConfig::defaults() {
    GeneratorConfig c;
    c.transition = {
        {0.93, 0.07, 0.00, 0.00, 0.00, 0.00},
        {0.00, 0.70, 0.30, 0.00, 0.00, 0.00},
        {0.00, 0.00, 0.93, 0.07, 0.00, 0.00},
        {0.00, 0.00, 0.00, 0.70, 0.30, 0.00},
        {0.00, 0.00, 0.00, 0.07, 0.93, 0.00},
        {0.00, 0.00, 0.00, 0.00, 0.00, 1.00},
    };

    // incision: knife at the cornea
    SubTemplate incision;
    incision.nodes = {{kCornea, 0.50, 0.50}, {kIris, 0.42, 0.56}, {kLens, 0.50, 0.46},
                      {kKnife, 0.25, 0.70}};
    incision.edges = {{0, 1, kSpatial}, {1, 2, kSpatial}, {3, 0, kSemantic}};

    // polishing: spatula at the lens; phases 1 and 3 share this template on
    // purpose, only temporal context can tell them apart
    SubTemplate polish;
    polish.nodes = {{kCornea, 0.50, 0.50}, {kIris, 0.42, 0.56}, {kLens, 0.50, 0.46},
                    {kSpatula, 0.60, 0.30}};
    polish.edges = {{0, 1, kSpatial}, {1, 2, kSpatial}, {3, 2, kSemantic}};

    // capsulorhexis: cystotome or forceps working the capsule
    SubTemplate rhexis_cysto;
    rhexis_cysto.nodes = {{kCornea, 0.50, 0.50},
                          {kIris, 0.42, 0.56},
                          {kCapsule, 0.52, 0.44},
                          {kCystotome, 0.66, 0.62}};
    rhexis_cysto.edges = {{0, 1, kSpatial}, {1, 2, kSpatial}, {3, 2, kSemantic}};
    SubTemplate rhexis_forceps = rhexis_cysto;
    rhexis_forceps.nodes[3] = {kForceps, 0.36, 0.64};

    // phacoemulsification: handpiece plus supporting spatula
    SubTemplate phaco;
    phaco.nodes = {{kCornea, 0.50, 0.50}, {kIris, 0.42, 0.56}, {kLens, 0.50, 0.46},
                   {kPhaco, 0.55, 0.65}, {kSpatula, 0.35, 0.35}};
    phaco.edges = {{0, 1, kSpatial}, {1, 2, kSpatial}, {3, 2, kSemantic},
                   {4, 2, kSpatial}};

    // vitrectomy with a prolapsed iris: the iris sits far from its normal spot
    SubTemplate vitrectomy;
    vitrectomy.nodes = {{kCornea, 0.50, 0.50}, {kIris, 0.20, 0.80}, {kVitrector, 0.58, 0.38}};
    vitrectomy.edges = {{0, 1, kSpatial}, {2, 1, kSemantic}};

    c.templates = {{incision}, {polish}, {rhexis_cysto, rhexis_forceps},
                   {polish}, {phaco}, {vitrectomy}};
    return c;
}

GeneratorConfig GeneratorConfig::fewshot_variant() {
    GeneratorConfig c = defaults();
    c.num_phases = 5;
    c.rare_phase = -1;
    c.rare_prob = 0.0;
    c.templates.resize(5);
    c.transition = {
        {0.90, 0.10, 0.00, 0.00, 0.00},
        {0.00, 0.70, 0.30, 0.00, 0.00},
        {0.00, 0.00, 0.90, 0.10, 0.00},
        {0.00, 0.00, 0.00, 0.70, 0.30},
        {0.00, 0.00, 0.00, 0.10, 0.90},
    };
    c.frames_min = 60;
    c.frames_max = 80;
    c.jitter = 0.05;
    c.node_dropout = 0.08;
    c.edge_flip = 0.05;
    c.video_style = 0.12;
    return c;
}

void GeneratorConfig::validate() const {
    if (num_phases < 1) throw DataError("generator: num_phases must be >= 1");
    if (static_cast<int>(transition.size()) != num_phases)
        throw DataError("generator: transition matrix must be " +
                        std::to_string(num_phases) + " rows");
    for (std::size_t r = 0; r < transition.size(); ++r) {
        if (static_cast<int>(transition[r].size()) != num_phases)
            throw DataError("generator: transition row " + std::to_string(r) +
                            " has wrong length");
        double s = 0.0;
        for (double v : transition[r]) s += v;
        if (std::abs(s - 1.0) > 1e-12)
            throw DataError("generator: transition row " + std::to_string(r) +
                            " sums to " + std::to_string(s) + ", expected 1");
    }
    if (static_cast<int>(templates.size()) != num_phases)
        throw DataError("generator: one template list per phase required");
    for (std::size_t p = 0; p < templates.size(); ++p)
        if (templates[p].empty())
            throw DataError("generator: phase " + std::to_string(p) + " has no template");
    if (multi_technique_phase >= 0 && multi_technique_phase < num_phases &&
        templates[static_cast<std::size_t>(multi_technique_phase)].size() < 2)
        throw DataError("generator: multi-technique phase needs >= 2 templates");
    for (const auto& phase : templates)
        for (const SubTemplate& t : phase)
            for (const TemplateNode& n : t.nodes)
                if (n.class_id < 0 || n.class_id >= node_classes)
                    throw DataError("generator: template node class out of range");
}

SyntheticData generate_synthetic(const GeneratorConfig& cfg) {
    cfg.validate();
    const int num_videos = cfg.num_train + cfg.num_val + cfg.num_test;

    // injection plan: per-video bernoulli, then one forced video per split
    // that has none (prototype initialization needs every class in train)
    std::vector<bool> injected(static_cast<std::size_t>(num_videos), false);
    if (cfg.rare_phase >= 0 && cfg.rare_prob > 0.0) {
        Rng inj(mix_seed(cfg.seed, 101));
        for (int v = 0; v < num_videos; ++v) injected[static_cast<std::size_t>(v)] = inj.bernoulli(cfg.rare_prob);
        const int split_begin[3] = {0, cfg.num_train, cfg.num_train + cfg.num_val};
        const int split_size[3] = {cfg.num_train, cfg.num_val, cfg.num_test};
        for (int s = 0; s < 3; ++s) {
            bool any = false;
            for (int v = 0; v < split_size[s]; ++v)
                any = any || injected[static_cast<std::size_t>(split_begin[s] + v)];
            if (!any && split_size[s] > 0)
                injected[static_cast<std::size_t>(
                    split_begin[s] + static_cast<int>(inj.index(static_cast<std::size_t>(split_size[s]))))] = true;
        }
    }

    SyntheticData out;
    for (int v = 0; v < num_videos; ++v) {
        const std::string vid = video_name(v);
        Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(v)));
        const int frames = rng.range(cfg.frames_min, cfg.frames_max);

        // phase path: frame-by-frame Markov walk from phase 0, resampled until
        // it covers every chain-reachable phase (so any single video can seed
        // prototypes for every class the chain produces)
        std::vector<bool> required = reachable_phases(cfg.transition);
        if (cfg.rare_phase >= 0) required[static_cast<std::size_t>(cfg.rare_phase)] = false;
        std::vector<int> phase(static_cast<std::size_t>(frames), 0);
        for (int attempt = 0; attempt < 50; ++attempt) {
            std::vector<bool> visited(static_cast<std::size_t>(cfg.num_phases), false);
            visited[0] = true;
            for (int t = 1; t < frames; ++t) {
                const auto& row = cfg.transition[static_cast<std::size_t>(phase[static_cast<std::size_t>(t - 1)])];
                const double u = rng.uniform();
                double acc = 0.0;
                int next = phase[static_cast<std::size_t>(t - 1)];
                for (int p = 0; p < cfg.num_phases; ++p) {
                    acc += row[static_cast<std::size_t>(p)];
                    if (u < acc) {
                        next = p;
                        break;
                    }
                }
                phase[static_cast<std::size_t>(t)] = next;
                visited[static_cast<std::size_t>(next)] = true;
            }
            bool covered = true;
            for (int p = 0; p < cfg.num_phases; ++p)
                covered = covered && (!required[static_cast<std::size_t>(p)] ||
                                      visited[static_cast<std::size_t>(p)]);
            if (covered) break;
        }

        std::vector<bool> deviated(static_cast<std::size_t>(frames), false);
        if (injected[static_cast<std::size_t>(v)]) {
            Rng inj(mix_seed(cfg.seed, 2000 + static_cast<std::uint64_t>(v)));
            const int len = inj.range(cfg.rare_len_min, std::min(cfg.rare_len_max, frames));
            const int lo = static_cast<int>(0.40 * frames);
            const int hi = std::max(lo, static_cast<int>(0.65 * frames) - len);
            const int start = inj.range(lo, hi);
            for (int t = start; t < std::min(frames, start + len); ++t) {
                phase[static_cast<std::size_t>(t)] = cfg.rare_phase;
                deviated[static_cast<std::size_t>(t)] = true;
            }
        }

        // per-video style offset
        Rng style_rng(mix_seed(cfg.seed, 3000 + static_cast<std::uint64_t>(v)));
        std::vector<double> style(static_cast<std::size_t>(cfg.d_attr), 0.0);
        for (double& s : style) s = cfg.video_style * style_rng.normal();

        VideoFrames video;
        video.video_id = vid;
        int run_subtech = 0;
        for (int t = 0; t < frames; ++t) {
            const int ph = phase[static_cast<std::size_t>(t)];
            const auto& subs = cfg.templates[static_cast<std::size_t>(ph)];
            if (t == 0 || ph != phase[static_cast<std::size_t>(t - 1)])
                run_subtech = static_cast<int>(rng.index(subs.size()));
            const SubTemplate& tpl = subs[static_cast<std::size_t>(run_subtech)];

            SceneGraph g;
            g.video_id = vid;
            g.frame_idx = t;
            g.timestamp_s = cfg.sampling_period_s * t;
            g.phase_label = ph;

            std::vector<int> remap(tpl.nodes.size(), -1);
            bool any_kept = false;
            for (std::size_t n = 0; n < tpl.nodes.size(); ++n)
                if (!rng.bernoulli(cfg.node_dropout)) {
                    remap[n] = 0;
                    any_kept = true;
                }
            if (!any_kept) remap[0] = 0;
            int next_id = 0;
            for (std::size_t n = 0; n < tpl.nodes.size(); ++n) {
                if (remap[n] < 0) continue;
                remap[n] = next_id;
                SgNode node;
                node.id = next_id++;
                node.class_id = tpl.nodes[n].class_id;
                node.attrs = {tpl.nodes[n].x + style[0] + cfg.jitter * rng.normal(),
                              tpl.nodes[n].y + style[std::min<std::size_t>(1, style.size() - 1)] +
                                  cfg.jitter * rng.normal()};
                node.attrs.resize(static_cast<std::size_t>(cfg.d_attr), 0.0);
                g.nodes.push_back(std::move(node));
            }
            for (const TemplateEdge& e : tpl.edges) {
                if (remap[static_cast<std::size_t>(e.src)] < 0 ||
                    remap[static_cast<std::size_t>(e.dst)] < 0)
                    continue;
                SgEdge edge;
                edge.src = remap[static_cast<std::size_t>(e.src)];
                edge.dst = remap[static_cast<std::size_t>(e.dst)];
                edge.rel = e.rel;
                if (rng.bernoulli(cfg.edge_flip))
                    edge.rel = edge.rel == kSpatial ? kSemantic : kSpatial;
                g.edges.push_back(edge);
            }

            out.metadata.push_back({vid, t, run_subtech, deviated[static_cast<std::size_t>(t)]});
            video.frames.push_back(std::move(g));
        }
        out.dataset.push_back(std::move(video));
    }

    std::sort(out.dataset.begin(), out.dataset.end(),
              [](const VideoFrames& a, const VideoFrames& b) { return a.video_id < b.video_id; });

    for (int v = 0; v < num_videos; ++v) {
        const std::string vid = video_name(v);
        if (v < cfg.num_train)
            out.manifest.train.push_back(vid);
        else if (v < cfg.num_train + cfg.num_val)
            out.manifest.val.push_back(vid);
        else
            out.manifest.test.push_back(vid);
    }
    out.manifest.num_classes = cfg.num_phases;
    out.manifest.node_classes = cfg.node_classes;
    out.manifest.d_attr = cfg.d_attr;
    return out;
}

void save_metadata(const std::vector<FrameMeta>& meta, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write metadata file " + path.string());
    for (const FrameMeta& m : meta) {
        json j;
        j["video_id"] = m.video_id;
        j["frame_idx"] = m.frame_idx;
        j["subtech_id"] = m.subtech_id;
        j["deviation"] = m.deviation;
        out << j.dump() << "\n";
    }
}

std::vector<FrameMeta> load_metadata(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metadata file " + path.string());
    std::vector<FrameMeta> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("metadata line " + std::to_string(line_no) +
                            ": malformed JSON: " + e.what());
        }
        FrameMeta m;
        m.video_id = j.at("video_id").get<std::string>();
        m.frame_idx = j.at("frame_idx").get<int>();
        m.subtech_id = j.at("subtech_id").get<int>();
        m.deviation = j.at("deviation").get<bool>();
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace protoflow::sg
