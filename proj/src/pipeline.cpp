#include "protoflow/pipeline.hpp"

#include <algorithm>
#include <iostream>
#include <limits>
#include <sstream>

#include "protoflow/error.hpp"
#include "protoflow/threading.hpp"
#include "protoflow/util.hpp"

namespace protoflow::pipeline {

using nlohmann::json;

namespace {

sg::GeneratorConfig preset_generator(const std::string& name) {
    if (name == "default") return sg::GeneratorConfig::defaults();
    if (name == "fewshot") return sg::GeneratorConfig::fewshot_variant();
    throw DataError("unknown generator preset '" + name + "'");
}

void log(const std::string& msg) { std::cerr << "[protoflow] " << msg << "\n"; }

}  // namespace

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["window"] = window;
    j["threads"] = threads;
    j["paths"] = {{"data", data}, {"manifest", manifest}, {"checkpoint", checkpoint},
                  {"out", out}};
    j["generator"] = {{"preset", gen_preset},
                      {"num_train", gen.num_train},
                      {"num_val", gen.num_val},
                      {"num_test", gen.num_test},
                      {"frames_min", gen.frames_min},
                      {"frames_max", gen.frames_max},
                      {"rare_prob", gen.rare_prob},
                      {"rare_len_min", gen.rare_len_min},
                      {"rare_len_max", gen.rare_len_max},
                      {"jitter", gen.jitter},
                      {"node_dropout", gen.node_dropout},
                      {"edge_flip", gen.edge_flip},
                      {"video_style", gen.video_style}};
    j["train"] = {{"pretrain_epochs", train.pretrain_epochs},
                  {"finetune_epochs", train.finetune_epochs},
                  {"base_lr", train.base_lr},
                  {"lr_step_epochs", train.lr_step_epochs},
                  {"batch_size", train.batch_size},
                  {"k", train.k},
                  {"patience", train.patience},
                  {"lambda_rec", train.lambda_rec},
                  {"lambda_cls", train.lambda_cls},
                  {"lambda_reg", train.lambda_reg}};
    j["encoder"] = {{"num_layers", num_layers},
                    {"hidden_dim", hidden_dim},
                    {"encoding_dim", encoding_dim},
                    {"heads", heads},
                    {"leaky_slope", leaky_slope},
                    {"edge_embed_dim", edge_embed_dim},
                    {"w_max", w_max}};
    j["explain"] = {{"video", explain_video}, {"frame", explain_frame}};
    j["fewshot_n"] = fewshot_n;
    j["run_seeds"] = run_seeds;
    j["sweep_windows"] = sweep_windows;
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.window = j.value("window", c.window);
    c.threads = j.value("threads", c.threads);
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        c.data = p.value("data", "");
        c.manifest = p.value("manifest", "");
        c.checkpoint = p.value("checkpoint", "");
        c.out = p.value("out", "");
    }
    if (j.contains("generator")) {
        const json& g = j.at("generator");
        c.gen_preset = g.value("preset", c.gen_preset);
        c.gen = preset_generator(c.gen_preset);
        c.gen.num_train = g.value("num_train", c.gen.num_train);
        c.gen.num_val = g.value("num_val", c.gen.num_val);
        c.gen.num_test = g.value("num_test", c.gen.num_test);
        c.gen.frames_min = g.value("frames_min", c.gen.frames_min);
        c.gen.frames_max = g.value("frames_max", c.gen.frames_max);
        c.gen.rare_prob = g.value("rare_prob", c.gen.rare_prob);
        c.gen.rare_len_min = g.value("rare_len_min", c.gen.rare_len_min);
        c.gen.rare_len_max = g.value("rare_len_max", c.gen.rare_len_max);
        c.gen.jitter = g.value("jitter", c.gen.jitter);
        c.gen.node_dropout = g.value("node_dropout", c.gen.node_dropout);
        c.gen.edge_flip = g.value("edge_flip", c.gen.edge_flip);
        c.gen.video_style = g.value("video_style", c.gen.video_style);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        c.train.pretrain_epochs = t.value("pretrain_epochs", c.train.pretrain_epochs);
        c.train.finetune_epochs = t.value("finetune_epochs", c.train.finetune_epochs);
        c.train.base_lr = t.value("base_lr", c.train.base_lr);
        c.train.lr_step_epochs = t.value("lr_step_epochs", c.train.lr_step_epochs);
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.k = t.value("k", c.train.k);
        c.train.patience = t.value("patience", c.train.patience);
        c.train.lambda_rec = t.value("lambda_rec", c.train.lambda_rec);
        c.train.lambda_cls = t.value("lambda_cls", c.train.lambda_cls);
        c.train.lambda_reg = t.value("lambda_reg", c.train.lambda_reg);
    }
    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        c.num_layers = e.value("num_layers", c.num_layers);
        c.hidden_dim = e.value("hidden_dim", c.hidden_dim);
        c.encoding_dim = e.value("encoding_dim", c.encoding_dim);
        c.heads = e.value("heads", c.heads);
        c.leaky_slope = e.value("leaky_slope", c.leaky_slope);
        c.edge_embed_dim = e.value("edge_embed_dim", c.edge_embed_dim);
        c.w_max = e.value("w_max", c.w_max);
    }
    if (j.contains("explain")) {
        c.explain_video = j.at("explain").value("video", "");
        c.explain_frame = j.at("explain").value("frame", -1);
    }
    if (j.contains("fewshot_n")) c.fewshot_n = j.at("fewshot_n").get<std::vector<std::size_t>>();
    if (j.contains("run_seeds")) c.run_seeds = j.at("run_seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("sweep_windows")) c.sweep_windows = j.at("sweep_windows").get<std::vector<int>>();
    return c;
}

model::EncoderConfig RunConfig::encoder_config(int input_dim) const {
    model::EncoderConfig e;
    e.num_layers = num_layers;
    e.hidden_dim = hidden_dim;
    e.encoding_dim = encoding_dim;
    e.heads = heads;
    e.leaky_slope = leaky_slope;
    e.edge_embed_dim = edge_embed_dim;
    e.input_dim = input_dim;
    return e;
}

sg::FeatureSpec RunConfig::feature_spec(const sg::DatasetManifest& m) const {
    return {m.node_classes, m.d_attr, w_max};
}

void write_run_config(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "run_config.json", cfg.to_json().dump(2) + "\n");
}

LoadedData load_data(const RunConfig& cfg) {
    if (cfg.data.empty()) throw DataError("missing --data path");
    if (cfg.manifest.empty()) throw DataError("missing --manifest path");
    LoadedData d;
    d.dataset = sg::load_dataset(cfg.data);
    d.manifest = sg::load_manifest(cfg.manifest);
    return d;
}

void run_gen_data(const RunConfig& cfg) {
    write_run_config(cfg, cfg.out);
    sg::GeneratorConfig gen = cfg.gen;
    gen.seed = cfg.seed;
    sg::SyntheticData data = sg::generate_synthetic(gen);
    const std::filesystem::path out(cfg.out);
    sg::save_dataset(data.dataset, out / "data.jsonl");
    sg::save_manifest(data.manifest, out / "manifest.json");
    sg::save_metadata(data.metadata, out / "metadata.jsonl");
    log("gen-data: " + std::to_string(data.dataset.size()) + " videos -> " + cfg.out);
}

namespace {

struct Windows {
    std::vector<sg::DynamicSceneGraph> train, val;
};

Windows build_split_windows(const LoadedData& d, const sg::FeatureSpec& spec, int window) {
    Windows w;
    w.train = sg::build_all_windows(sg::select_videos(d.dataset, d.manifest.train),
                                    window, spec);
    w.val = sg::build_all_windows(sg::select_videos(d.dataset, d.manifest.val), window,
                                  spec);
    return w;
}

}  // namespace

void run_pretrain(const RunConfig& cfg) {
    write_run_config(cfg, cfg.out);
    set_threads(cfg.threads);
    LoadedData d = load_data(cfg);
    const sg::FeatureSpec spec = cfg.feature_spec(d.manifest);
    Windows w = build_split_windows(d, spec, cfg.window);

    flow::TrainConfig tc = cfg.train;
    tc.window = cfg.window;
    tc.seed = cfg.seed;
    model::ModelParams params =
        model::ModelParams::init(cfg.encoder_config(spec.dim()), d.manifest.num_classes,
                                 cfg.seed);
    auto result = flow::pretrain(w.train, w.val, std::move(params), tc);

    const std::filesystem::path out(cfg.out);
    write_file(out / "history_pretrain.csv", flow::history_csv(result.history));
    model::save_checkpoint(result.params, nullptr,
                           {spec, cfg.window, cfg.seed}, out / "checkpoint.pflw");
    log("pretrain: " + std::to_string(result.history.size()) + " history rows -> " +
        cfg.out);
}

void run_init_prototypes(const RunConfig& cfg) {
    write_run_config(cfg, cfg.out);
    set_threads(cfg.threads);
    if (cfg.checkpoint.empty()) throw DataError("missing --checkpoint path");
    LoadedData d = load_data(cfg);
    model::LoadedCheckpoint lc = model::load_checkpoint(cfg.checkpoint);
    const sg::FeatureSpec spec = lc.extras.features;
    auto train_windows = sg::build_all_windows(
        sg::select_videos(d.dataset, d.manifest.train), lc.extras.window, spec);
    auto emb = flow::embed_all(train_windows, lc.params);
    model::PrototypeSet protos =
        flow::init_prototypes(emb, d.manifest.num_classes, cfg.train.k, cfg.seed);
    const std::filesystem::path out(cfg.out);
    model::save_checkpoint(lc.params, &protos, lc.extras, out / "checkpoint.pflw");
    log("init-prototypes: " + std::to_string(protos.slots()) + " slots -> " + cfg.out);
}

void run_finetune(const RunConfig& cfg) {
    write_run_config(cfg, cfg.out);
    set_threads(cfg.threads);
    if (cfg.checkpoint.empty()) throw DataError("missing --checkpoint path");
    LoadedData d = load_data(cfg);
    model::LoadedCheckpoint lc = model::load_checkpoint(cfg.checkpoint);
    if (!lc.protos)
        throw DataError("finetune: checkpoint has no prototypes; run init-prototypes");
    const sg::FeatureSpec spec = lc.extras.features;
    Windows w = build_split_windows(d, spec, lc.extras.window);

    flow::TrainConfig tc = cfg.train;
    tc.window = lc.extras.window;
    tc.seed = cfg.seed;
    auto result = flow::finetune(w.train, w.val, lc.params, *lc.protos, tc);

    const std::filesystem::path out(cfg.out);
    write_file(out / "history_finetune.csv", flow::history_csv(result.history));
    model::save_checkpoint(lc.params, &*lc.protos, lc.extras, out / "checkpoint.pflw");
    log("finetune: " + std::to_string(result.history.size()) + " history rows -> " +
        cfg.out);
}

void run_evaluate(const RunConfig& cfg) {
    write_run_config(cfg, cfg.out);
    set_threads(cfg.threads);
    if (cfg.checkpoint.empty()) throw DataError("missing --checkpoint path");
    LoadedData d = load_data(cfg);
    model::LoadedCheckpoint lc = model::load_checkpoint(cfg.checkpoint);
    const sg::FeatureSpec spec = lc.extras.features;
    const auto test_videos = sg::select_videos(d.dataset, d.manifest.test);

    std::vector<std::vector<flow::InferRow>> per_video;
    for (const sg::VideoFrames* v : test_videos)
        per_video.push_back(lc.protos
                                ? flow::infer(*v, lc.params, *lc.protos, spec,
                                              lc.extras.window)
                                : flow::infer_head(*v, lc.params, spec, lc.extras.window));
    evalx::MetricsSummary m = evalx::per_video_metrics(per_video);
    const std::filesystem::path out(cfg.out);
    write_file(out / "metrics.csv", evalx::metrics_csv(m));
    if (lc.protos) {
        auto test_windows = sg::build_all_windows(test_videos, lc.extras.window, spec);
        auto emb = flow::embed_all(test_windows, lc.params);
        evalx::export_embeddings(emb, *lc.protos, out / "embeddings.csv");
    }
    log("evaluate: mean accuracy " + fmt_double(m.mean_accuracy) + ", mean macro-F1 " +
        fmt_double(m.mean_macro_f1) + " -> " + cfg.out);
}

FullRunResult run_full(const sg::Dataset& dataset, const sg::DatasetManifest& manifest,
                       const model::EncoderConfig& enc_cfg, const flow::TrainConfig& cfg,
                       const sg::FeatureSpec& spec) {
    auto train_w = sg::build_all_windows(sg::select_videos(dataset, manifest.train),
                                         cfg.window, spec);
    auto val_w = sg::build_all_windows(sg::select_videos(dataset, manifest.val),
                                       cfg.window, spec);

    FullRunResult r;
    model::ModelParams init =
        model::ModelParams::init(enc_cfg, manifest.num_classes, cfg.seed);
    auto pre = flow::pretrain(train_w, val_w, std::move(init), cfg);
    r.params = std::move(pre.params);
    r.pretrain_history = std::move(pre.history);

    auto emb = flow::embed_all(train_w, r.params);
    r.protos = flow::init_prototypes(emb, manifest.num_classes, cfg.k, cfg.seed);
    auto fin = flow::finetune(train_w, val_w, r.params, r.protos, cfg);
    r.finetune_history = std::move(fin.history);

    std::vector<std::vector<flow::InferRow>> per_video;
    for (const sg::VideoFrames* v : sg::select_videos(dataset, manifest.test))
        per_video.push_back(flow::infer(*v, r.params, r.protos, spec, cfg.window));
    r.test_metrics = evalx::per_video_metrics(per_video);
    return r;
}

void run_fewshot(const RunConfig& cfg) {
    write_run_config(cfg, cfg.out);
    set_threads(cfg.threads);
    LoadedData d = load_data(cfg);
    const sg::FeatureSpec spec = cfg.feature_spec(d.manifest);
    flow::TrainConfig tc = cfg.train;
    tc.window = cfg.window;
    evalx::FewshotTable table = evalx::fewshot_benchmark(
        d.dataset, d.manifest, cfg.encoder_config(spec.dim()), tc, spec, cfg.fewshot_n,
        cfg.run_seeds);
    const std::filesystem::path out(cfg.out);
    write_file(out / "fewshot.csv", evalx::fewshot_csv(table));

    // per-cell mean +- std summary
    std::ostringstream summary;
    summary << "n,method,accuracy_mean,accuracy_std,f1_mean,f1_std\n";
    for (std::size_t n : cfg.fewshot_n)
        for (const std::string& method : {std::string("head"), std::string("protoflow")}) {
            std::vector<double> acc, f1;
            for (const evalx::FewshotRow& r : table.rows)
                if (r.n == n && r.method == method) {
                    acc.push_back(r.accuracy);
                    f1.push_back(r.f1);
                }
            const auto a = evalx::run_stats(acc);
            const auto f = evalx::run_stats(f1);
            summary << n << "," << method << "," << fmt_double(a.mean) << ","
                    << fmt_double(a.stddev) << "," << fmt_double(f.mean) << ","
                    << fmt_double(f.stddev) << "\n";
        }
    write_file(out / "fewshot_summary.csv", summary.str());
    log("fewshot: " + std::to_string(table.rows.size()) + " rows -> " + cfg.out);
}

void run_sweep(const RunConfig& cfg) {
    write_run_config(cfg, cfg.out);
    set_threads(cfg.threads);
    LoadedData d = load_data(cfg);
    const sg::FeatureSpec spec = cfg.feature_spec(d.manifest);

    std::ostringstream out_csv;
    out_csv << "window,accuracy_mean,accuracy_std,f1_mean,f1_std\n";
    for (int w : cfg.sweep_windows) {
        std::vector<double> acc, f1;
        for (std::uint64_t seed : cfg.run_seeds) {
            flow::TrainConfig tc = cfg.train;
            tc.window = w;
            tc.seed = seed;
            auto r = run_full(d.dataset, d.manifest, cfg.encoder_config(spec.dim()), tc,
                              spec);
            acc.push_back(r.test_metrics.mean_accuracy);
            f1.push_back(r.test_metrics.mean_macro_f1);
            log("sweep: w=" + std::to_string(w) + " seed=" + std::to_string(seed) +
                " accuracy=" + fmt_double(acc.back()));
        }
        const auto a = evalx::run_stats(acc);
        const auto f = evalx::run_stats(f1);
        out_csv << w << "," << fmt_double(a.mean) << "," << fmt_double(a.stddev) << ","
                << fmt_double(f.mean) << "," << fmt_double(f.stddev) << "\n";
    }
    write_file(std::filesystem::path(cfg.out) / "sweep.csv", out_csv.str());
    log("sweep: done -> " + cfg.out);
}

void run_explain(const RunConfig& cfg) {
    write_run_config(cfg, cfg.out);
    set_threads(cfg.threads);
    if (cfg.checkpoint.empty()) throw DataError("missing --checkpoint path");
    if (cfg.explain_video.empty()) throw DataError("explain: missing --video id");
    LoadedData d = load_data(cfg);
    model::LoadedCheckpoint lc = model::load_checkpoint(cfg.checkpoint);
    if (!lc.protos) throw DataError("explain: checkpoint has no prototypes");
    const sg::FeatureSpec spec = lc.extras.features;
    const sg::VideoFrames* video = sg::find_video(d.dataset, cfg.explain_video);
    if (!video) throw DataError("explain: dataset has no video '" + cfg.explain_video + "'");

    auto rows = flow::infer(*video, lc.params, *lc.protos, spec, lc.extras.window);
    evalx::DeviationReport rep = evalx::distance_trace(rows, *lc.protos);
    const std::filesystem::path out(cfg.out);
    write_file(out / "deviation.jsonl", evalx::deviation_jsonl(rows, rep));

    // node outliers for the requested frame, or the most deviant one
    std::size_t pick = 0;
    if (cfg.explain_frame >= 0) {
        bool found = false;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].frame_idx == cfg.explain_frame) {
                pick = i;
                found = true;
                break;
            }
        if (!found)
            throw DataError("explain: video has no frame " +
                            std::to_string(cfg.explain_frame));
    } else {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double margin = rep.min_dist[i] - rep.tau[i];
            if (margin > worst) {
                worst = margin;
                pick = i;
            }
        }
    }

    const flow::InferRow& row = rows[pick];
    const std::size_t slot = static_cast<std::size_t>(
        flow::argmax_row(std::span<const double>(row.y_hat)) * lc.protos->k);
    std::size_t best_slot = slot;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < lc.protos->slots(); ++s)
        if (row.distances[s] < best_d) {
            best_d = row.distances[s];
            best_slot = s;
        }

    const model::MedoidRef& med = lc.protos->medoids[best_slot];
    const sg::VideoFrames* med_video = sg::find_video(d.dataset, med.video_id);
    if (!med_video) throw DataError("explain: medoid video '" + med.video_id + "' missing");
    int med_t = -1;
    for (std::size_t i = 0; i < med_video->frames.size(); ++i)
        if (med_video->frames[i].frame_idx == med.frame_idx) med_t = static_cast<int>(i);
    if (med_t < 0) throw DataError("explain: medoid frame missing from dataset");

    sg::DynamicSceneGraph dsg = sg::build_dsg(video->frames, lc.extras.window,
                                              static_cast<int>(pick), spec);
    sg::DynamicSceneGraph med_dsg =
        sg::build_dsg(med_video->frames, lc.extras.window, med_t, spec);
    evalx::NodeOutlierReport outliers =
        evalx::node_outlier_scores(dsg, med_dsg, lc.params, best_slot);

    nlohmann::json j;
    j["video_id"] = row.video_id;
    j["frame_idx"] = row.frame_idx;
    j["pred"] = row.pred;
    j["slot"] = best_slot;
    j["slot_class"] = lc.protos->class_of(best_slot);
    j["medoid_video"] = med.video_id;
    j["medoid_frame"] = med.frame_idx;
    j["nodes"] = nlohmann::json::array();
    for (const evalx::NodeOutlier& n : outliers.nodes) {
        j["nodes"].push_back({{"node_index", n.node_index},
                              {"class_id", n.class_id},
                              {"frame_offset", dsg.nodes[n.node_index].frame_offset},
                              {"score", n.score},
                              {"matched_medoid_node", n.matched_medoid_node}});
    }
    write_file(out / "node_outliers.json", j.dump(2) + "\n");
    log("explain: frame " + std::to_string(row.frame_idx) + " vs slot " +
        std::to_string(best_slot) + " -> " + cfg.out);
}

}  // namespace protoflow::pipeline
