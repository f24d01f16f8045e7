#include "protoflow/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "protoflow/error.hpp"
#include "protoflow/util.hpp"

namespace protoflow::evalx {

using nlohmann::json;

MetricsSummary per_video_metrics(
    const std::vector<std::vector<flow::InferRow>>& per_video) {
    MetricsSummary out;
    for (const auto& rows : per_video) {
        if (rows.empty()) throw DataError("per_video_metrics: empty video");
        VideoMetrics vm;
        vm.video_id = rows[0].video_id;

        std::set<int> present;
        std::map<int, std::size_t> tp, fp, fn;
        std::size_t correct = 0;
        for (const flow::InferRow& r : rows) {
            present.insert(r.label);
            if (r.pred == r.label) {
                ++correct;
                ++tp[r.label];
            } else {
                ++fn[r.label];
                ++fp[r.pred];
            }
        }
        vm.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());

        double f1_sum = 0.0;
        for (int c : present) {
            const double tpc = static_cast<double>(tp[c]);
            const double fpc = static_cast<double>(fp[c]);
            const double fnc = static_cast<double>(fn[c]);
            const double prec = tpc + fpc > 0.0 ? tpc / (tpc + fpc) : 0.0;
            const double rec = tpc + fnc > 0.0 ? tpc / (tpc + fnc) : 0.0;
            const double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
            vm.per_class.push_back({c, prec, rec, f1});
            f1_sum += f1;
        }
        vm.macro_f1 = f1_sum / static_cast<double>(present.size());
        out.videos.push_back(std::move(vm));
    }

    std::sort(out.videos.begin(), out.videos.end(),
              [](const VideoMetrics& a, const VideoMetrics& b) {
                  return a.video_id < b.video_id;
              });
    if (!out.videos.empty()) {
        for (const VideoMetrics& vm : out.videos) {
            out.mean_accuracy += vm.accuracy;
            out.mean_macro_f1 += vm.macro_f1;
        }
        out.mean_accuracy /= static_cast<double>(out.videos.size());
        out.mean_macro_f1 /= static_cast<double>(out.videos.size());
    }
    return out;
}

std::string metrics_csv(const MetricsSummary& m) {
    std::ostringstream out;
    out << "video_id,accuracy,macro_f1\n";
    for (const VideoMetrics& vm : m.videos)
        out << vm.video_id << "," << fmt_double(vm.accuracy) << ","
            << fmt_double(vm.macro_f1) << "\n";
    out << "aggregate," << fmt_double(m.mean_accuracy) << ","
        << fmt_double(m.mean_macro_f1) << "\n";
    return out.str();
}

RunStats run_stats(const std::vector<double>& values) {
    RunStats s;
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(values.size()));
    return s;
}

DeviationReport distance_trace(const std::vector<flow::InferRow>& rows,
                               const model::PrototypeSet& protos) {
    if (!protos.calib)
        throw DataError(
            "distance_trace: prototypes carry no calibration; run fine-tuning "
            "(or flow::calibrate) first");
    const model::Calibration& cal = *protos.calib;
    DeviationReport rep;
    for (const flow::InferRow& r : rows) {
        const int c = r.pred;
        double best = std::numeric_limits<double>::infinity();
        for (int slot = c * protos.k; slot < (c + 1) * protos.k; ++slot)
            best = std::min(best, r.distances[static_cast<std::size_t>(slot)]);
        const double tau = cal.mu[static_cast<std::size_t>(c)] +
                           cal.lambda * cal.sigma[static_cast<std::size_t>(c)];
        rep.min_dist.push_back(best);
        rep.tau.push_back(tau);
        rep.flag.push_back(best > tau);
    }
    // maximal runs of flagged frames
    for (std::size_t i = 0; i < rep.flag.size();) {
        if (!rep.flag[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < rep.flag.size() && rep.flag[j + 1]) ++j;
        rep.intervals.push_back({rows[i].frame_idx, rows[j].frame_idx});
        i = j + 1;
    }
    return rep;
}

std::string deviation_jsonl(const std::vector<flow::InferRow>& rows,
                            const DeviationReport& report) {
    std::ostringstream out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        json j;
        j["video_id"] = rows[i].video_id;
        j["frame_idx"] = rows[i].frame_idx;
        j["pred"] = rows[i].pred;
        j["min_dist"] = report.min_dist[i];
        j["tau"] = report.tau[i];
        j["flag"] = static_cast<bool>(report.flag[i]);
        out << j.dump() << "\n";
    }
    return out.str();
}

NodeOutlierReport node_outlier_scores(const sg::DynamicSceneGraph& dsg,
                                      const sg::DynamicSceneGraph& medoid,
                                      const model::ModelParams& params,
                                      std::size_t slot) {
    auto encode_nodes = [&](const sg::DynamicSceneGraph& g) {
        sg::GraphBatch batch = sg::single_batch({&g});
        num::Tape tape(false);
        return model::encode(tape, batch, params).h;
    };
    num::Tensor h_in = encode_nodes(dsg);
    num::Tensor h_med = encode_nodes(medoid);
    const std::size_t dz = h_in.cols();

    NodeOutlierReport rep;
    rep.slot = slot;
    double max_matched = 0.0;
    std::vector<std::size_t> unmatched;
    for (std::size_t i = 0; i < dsg.nodes.size(); ++i) {
        NodeOutlier n;
        n.node_index = i;
        n.class_id = dsg.nodes[i].class_id;
        double best = std::numeric_limits<double>::infinity();
        int best_j = -1;
        for (std::size_t j = 0; j < medoid.nodes.size(); ++j) {
            if (medoid.nodes[j].class_id != n.class_id) continue;
            double acc = 0.0;
            for (std::size_t d = 0; d < dz; ++d) {
                const double diff = h_in.at(i, d) - h_med.at(j, d);
                acc += diff * diff;
            }
            if (acc < best) {
                best = acc;
                best_j = static_cast<int>(j);
            }
        }
        if (best_j >= 0) {
            n.score = std::sqrt(best);
            n.matched_medoid_node = best_j;
            max_matched = std::max(max_matched, n.score);
        }
        rep.nodes.push_back(n);
        if (best_j < 0) unmatched.push_back(i);
    }
    // classes absent from the medoid score as the worst matched node
    for (std::size_t i : unmatched) rep.nodes[i].score = max_matched;
    return rep;
}

double subtechnique_purity(const model::PrototypeSet& protos,
                           const std::vector<flow::Embedded>& class_embeddings,
                           const std::vector<int>& subtech_ids, int class_id) {
    if (class_embeddings.size() != subtech_ids.size())
        throw DataError("subtechnique_purity: embeddings and subtech ids differ in length");
    if (class_embeddings.empty()) return 0.0;
    const std::size_t dz = protos.p.cols();
    // cluster id -> (subtech -> count)
    std::map<int, std::map<int, std::size_t>> counts;
    for (std::size_t i = 0; i < class_embeddings.size(); ++i) {
        int best_slot = class_id * protos.k;
        double best = std::numeric_limits<double>::infinity();
        for (int slot = class_id * protos.k; slot < (class_id + 1) * protos.k; ++slot) {
            double acc = 0.0;
            for (std::size_t d = 0; d < dz; ++d) {
                const double diff =
                    class_embeddings[i].z[d] - protos.p.at(static_cast<std::size_t>(slot), d);
                acc += diff * diff;
            }
            if (acc < best) {
                best = acc;
                best_slot = slot;
            }
        }
        ++counts[best_slot][subtech_ids[i]];
    }
    std::size_t majority = 0;
    for (const auto& [slot, by_tech] : counts) {
        std::size_t mx = 0;
        for (const auto& [tech, n] : by_tech) mx = std::max(mx, n);
        majority += mx;
    }
    return static_cast<double>(majority) / static_cast<double>(class_embeddings.size());
}

std::string embeddings_csv(const std::vector<flow::Embedded>& windows,
                           const model::PrototypeSet& protos) {
    const std::size_t dz = protos.p.cols();
    std::ostringstream out;
    out << "video_id,frame_idx,label,is_prototype,class,slot";
    for (std::size_t d = 0; d < dz; ++d) out << ",z" << d;
    out << "\n";
    for (const flow::Embedded& e : windows) {
        // slot: nearest prototype within the window's own class
        int best_slot = e.label * protos.k;
        double best = std::numeric_limits<double>::infinity();
        for (int slot = e.label * protos.k; slot < (e.label + 1) * protos.k; ++slot) {
            double acc = 0.0;
            for (std::size_t d = 0; d < dz; ++d) {
                const double diff = e.z[d] - protos.p.at(static_cast<std::size_t>(slot), d);
                acc += diff * diff;
            }
            if (acc < best) {
                best = acc;
                best_slot = slot;
            }
        }
        out << e.video_id << "," << e.frame_idx << "," << e.label << ",0," << e.label
            << "," << best_slot % protos.k;
        for (std::size_t d = 0; d < dz; ++d) out << "," << fmt_double(e.z[d]);
        out << "\n";
    }
    for (std::size_t slot = 0; slot < protos.slots(); ++slot) {
        out << ",-1," << protos.class_of(slot) << ",1," << protos.class_of(slot) << ","
            << slot % static_cast<std::size_t>(protos.k);
        for (std::size_t d = 0; d < dz; ++d) out << "," << fmt_double(protos.p.at(slot, d));
        out << "\n";
    }
    return out.str();
}

void export_embeddings(const std::vector<flow::Embedded>& windows,
                       const model::PrototypeSet& protos,
                       const std::filesystem::path& path) {
    write_file(path, embeddings_csv(windows, protos));
}

std::string fewshot_csv(const FewshotTable& table) {
    std::ostringstream out;
    out << "n,seed,method,accuracy,f1\n";
    for (const FewshotRow& r : table.rows)
        out << r.n << "," << r.seed << "," << r.method << "," << fmt_double(r.accuracy)
            << "," << fmt_double(r.f1) << "\n";
    return out.str();
}

FewshotTable fewshot_benchmark(const sg::Dataset& dataset,
                               const sg::DatasetManifest& manifest,
                               const model::EncoderConfig& enc_cfg,
                               const flow::TrainConfig& train_cfg,
                               const sg::FeatureSpec& spec,
                               const std::vector<std::size_t>& n_list,
                               const std::vector<std::uint64_t>& seeds) {
    FewshotTable table;
    const auto val_videos = sg::select_videos(dataset, manifest.val);
    const auto test_videos = sg::select_videos(dataset, manifest.test);
    const auto val_windows = sg::build_all_windows(val_videos, train_cfg.window, spec);

    for (std::size_t n : n_list) {
        for (std::uint64_t seed : seeds) {
            sg::DatasetManifest sub = sg::few_shot_subsample(manifest, n, seed);
            const auto train_videos = sg::select_videos(dataset, sub.train);
            const auto train_windows =
                sg::build_all_windows(train_videos, train_cfg.window, spec);

            flow::TrainConfig cfg = train_cfg;
            cfg.seed = seed;
            model::ModelParams init =
                model::ModelParams::init(enc_cfg, manifest.num_classes, seed);
            auto pre = flow::pretrain(train_windows, val_windows, std::move(init), cfg);

            auto eval_test = [&](bool use_protos,
                                 const model::PrototypeSet* protos) -> MetricsSummary {
                std::vector<std::vector<flow::InferRow>> per_video;
                for (const sg::VideoFrames* v : test_videos)
                    per_video.push_back(use_protos
                                            ? flow::infer(*v, pre.params, *protos, spec,
                                                          cfg.window)
                                            : flow::infer_head(*v, pre.params, spec,
                                                               cfg.window));
                return per_video_metrics(per_video);
            };

            MetricsSummary head = eval_test(false, nullptr);
            table.rows.push_back({n, seed, "head", head.mean_accuracy, head.mean_macro_f1});

            auto emb = flow::embed_all(train_windows, pre.params);
            model::PrototypeSet protos =
                flow::init_prototypes(emb, manifest.num_classes, cfg.k, seed);
            flow::finetune(train_windows, val_windows, pre.params, protos, cfg);
            MetricsSummary proto = eval_test(true, &protos);
            table.rows.push_back(
                {n, seed, "protoflow", proto.mean_accuracy, proto.mean_macro_f1});
        }
    }
    return table;
}

}  // namespace protoflow::evalx
