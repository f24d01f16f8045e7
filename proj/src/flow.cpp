#include "protoflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "protoflow/error.hpp"
#include "protoflow/rng.hpp"
#include "protoflow/util.hpp"

namespace protoflow::flow {

using model::ModelParams;
using model::PrototypeSet;
using num::Tape;
using num::Tensor;

void TrainConfig::validate() const {
    if (pretrain_epochs < 1 || finetune_epochs < 1 || batch_size < 1 || k < 1 ||
        patience < 1 || window < 1 || base_lr <= 0.0 || lr_step_epochs < 1)
        throw Error("train config: all knobs must be positive");
}

std::string history_csv(const std::vector<LossReport>& history) {
    std::ostringstream out;
    out << "epoch,split,l_rec,l_cls,l_reg,total,accuracy\n";
    for (const LossReport& r : history)
        out << r.epoch << "," << r.split << "," << fmt_double(r.l_rec) << ","
            << fmt_double(r.l_cls) << "," << fmt_double(r.l_reg) << ","
            << fmt_double(r.total) << "," << fmt_double(r.accuracy) << "\n";
    return out.str();
}

int argmax_row(std::span<const double> row) {
    int best = 0;
    for (std::size_t i = 1; i < row.size(); ++i)
        if (row[i] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

namespace {

double frame_accuracy(const Tensor& scores, const std::vector<int>& labels) {
    std::size_t correct = 0;
    const std::size_t c = scores.cols();
    for (std::size_t b = 0; b < labels.size(); ++b) {
        auto row = scores.data().subspan(b * c, c);
        if (argmax_row(row) == labels[b]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

struct EvalStats {
    double l_rec = 0.0, l_cls = 0.0, l_reg = 0.0, total = 0.0, accuracy = 0.0;
};

// forward pass over a window list without recording; prototype mode when
// protos != nullptr, head mode otherwise
EvalStats evaluate_split(const std::vector<sg::DynamicSceneGraph>& windows,
                         const ModelParams& params, const PrototypeSet* protos,
                         const TrainConfig& cfg) {
    EvalStats s;
    if (windows.empty()) return s;
    std::size_t correct = 0, total_windows = 0;
    double rec_sum = 0.0, cls_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < windows.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
        std::vector<const sg::DynamicSceneGraph*> chunk;
        for (std::size_t i = start;
             i < std::min(windows.size(), start + static_cast<std::size_t>(cfg.batch_size));
             ++i)
            chunk.push_back(&windows[i]);
        sg::GraphBatch batch = sg::single_batch(chunk);
        Tape tape(false);
        auto enc = model::encode(tape, batch, params);
        Tensor xhat = model::decode(tape, enc.h, params);
        rec_sum += num::mse_loss(tape, xhat, batch.x).value();
        Tensor scores;
        if (protos) {
            auto pp = prototype_predict(tape, enc.z, *protos);
            cls_sum += num::nll_from_probs(tape, pp.q, batch.labels).value();
            scores = pp.y_hat;
        } else {
            Tensor probs = num::softmax_rows(tape, model::head_logits(tape, enc.z, params));
            cls_sum += num::nll_from_probs(tape, probs, batch.labels).value();
            scores = probs;
        }
        const std::size_t c = scores.cols();
        for (std::size_t b = 0; b < batch.labels.size(); ++b)
            if (argmax_row(scores.data().subspan(b * c, c)) == batch.labels[b]) ++correct;
        total_windows += batch.labels.size();
        ++batches;
    }
    s.l_rec = rec_sum / static_cast<double>(batches);
    s.l_cls = cls_sum / static_cast<double>(batches);
    if (protos) {
        Tape tape(false);
        Tensor diff = num::sub(tape, protos->p, protos->p0);
        s.l_reg = num::sum(tape, num::mul(tape, diff, diff)).value();
    }
    s.total = cfg.lambda_rec * s.l_rec + cfg.lambda_cls * s.l_cls + cfg.lambda_reg * s.l_reg;
    s.accuracy = static_cast<double>(correct) / static_cast<double>(total_windows);
    return s;
}

}  // namespace

PretrainResult pretrain(const std::vector<sg::DynamicSceneGraph>& train,
                        const std::vector<sg::DynamicSceneGraph>& val,
                        ModelParams params, const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw DataError("pretrain: empty train split");
    params.set_requires_grad(true, true, true);
    num::AdamState adam(params.all_tensors(), cfg.base_lr, 0.9, 0.999, 1e-8,
                        cfg.lr_step_epochs);

    PretrainResult result;
    double best_val = -1.0;
    ModelParams best = params.clone();
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        adam.set_epoch(epoch);
        auto batches = sg::make_batches(train, static_cast<std::size_t>(cfg.batch_size),
                                        mix_seed(cfg.seed, 0xB47C4 + static_cast<std::uint64_t>(epoch)));
        double rec_sum = 0.0, cls_sum = 0.0, total_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (sg::GraphBatch& batch : batches) {
            Tape tape;
            auto enc = model::encode(tape, batch, params);
            Tensor xhat = model::decode(tape, enc.h, params);
            Tensor l_rec = num::mse_loss(tape, xhat, batch.x);
            Tensor probs = num::softmax_rows(tape, model::head_logits(tape, enc.z, params));
            Tensor l_cls = num::nll_from_probs(tape, probs, batch.labels);
            Tensor total = num::add(tape, num::scale(tape, l_rec, cfg.lambda_rec),
                                    num::scale(tape, l_cls, cfg.lambda_cls));
            tape.backward(total);
            adam.step();
            rec_sum += l_rec.value();
            cls_sum += l_cls.value();
            total_sum += total.value();
            const std::size_t c = probs.cols();
            for (std::size_t b = 0; b < batch.labels.size(); ++b)
                if (argmax_row(probs.data().subspan(b * c, c)) == batch.labels[b])
                    ++correct;
            seen += batch.labels.size();
        }
        const auto nb = static_cast<double>(batches.size());
        result.history.push_back({epoch, "train", rec_sum / nb, cls_sum / nb, 0.0,
                                  total_sum / nb,
                                  static_cast<double>(correct) / static_cast<double>(seen)});

        if (!val.empty()) {
            EvalStats vs = evaluate_split(val, params, nullptr, cfg);
            result.history.push_back(
                {epoch, "val", vs.l_rec, vs.l_cls, 0.0, vs.total, vs.accuracy});
            if (vs.accuracy > best_val) {
                best_val = vs.accuracy;
                best = params.clone();
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    result.params = val.empty() ? std::move(params) : std::move(best);
    return result;
}

std::vector<Embedded> embed_all(const std::vector<sg::DynamicSceneGraph>& windows,
                                const ModelParams& params) {
    std::vector<Embedded> out;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < windows.size(); start += kChunk) {
        std::vector<const sg::DynamicSceneGraph*> chunk;
        for (std::size_t i = start; i < std::min(windows.size(), start + kChunk); ++i)
            chunk.push_back(&windows[i]);
        sg::GraphBatch batch = sg::single_batch(chunk);
        Tape tape(false);
        auto enc = model::encode(tape, batch, params);
        const std::size_t dz = enc.z.cols();
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            Embedded e;
            auto row = enc.z.data().subspan(b * dz, dz);
            e.z.assign(row.begin(), row.end());
            e.label = chunk[b]->label;
            e.video_id = chunk[b]->video_id;
            e.frame_idx = chunk[b]->target_frame_idx;
            out.push_back(std::move(e));
        }
    }
    return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    std::uint64_t seed, int max_iters, double tol) {
    if (points.empty()) throw DataError("kmeans: no points");
    if (k < 1) throw DataError("kmeans: k must be >= 1");
    const std::size_t n = points.size();
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
    Rng rng(seed);

    // k-means++ seeding
    KmeansResult res;
    res.centroids.push_back(points[rng.index(n)]);
    std::vector<double> min_d2(n, 0.0);
    while (res.centroids.size() < kk) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : res.centroids) best = std::min(best, sq_dist(points[i], c));
            min_d2[i] = best;
            sum += best;
        }
        std::size_t pick = 0;
        if (sum > 0.0) {
            const double u = rng.uniform() * sum;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += min_d2[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.index(n);
        }
        res.centroids.push_back(points[pick]);
    }

    res.assignment.assign(n, 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        // assignment step (ties to the lowest centroid index)
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(points[i], res.centroids[0]);
            for (std::size_t c = 1; c < res.centroids.size(); ++c) {
                const double d = sq_dist(points[i], res.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            res.assignment[i] = best;
            inertia += best_d;
        }
        res.inertia_per_iter.push_back(inertia);

        // update step
        const std::size_t dim = points[0].size();
        std::vector<std::vector<double>> next(res.centroids.size(),
                                              std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(res.centroids.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(res.assignment[i]);
            ++counts[c];
            for (std::size_t d = 0; d < dim; ++d) next[c][d] += points[i][d];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < next.size(); ++c) {
            if (counts[c] == 0) {
                // empty cluster: restart it at the point farthest from its
                // nearest centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d =
                        sq_dist(points[i], res.centroids[static_cast<std::size_t>(res.assignment[i])]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                next[c] = points[far];
            } else {
                for (std::size_t d = 0; d < dim; ++d)
                    next[c][d] /= static_cast<double>(counts[c]);
            }
            shift = std::max(shift, std::sqrt(sq_dist(next[c], res.centroids[c])));
        }
        res.centroids = std::move(next);
        if (shift < tol) break;
    }

    // final assignment consistent with the returned centroids
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = sq_dist(points[i], res.centroids[0]);
        for (std::size_t c = 1; c < res.centroids.size(); ++c) {
            const double d = sq_dist(points[i], res.centroids[c]);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        res.assignment[i] = best;
    }
    return res;
}

PrototypeSet init_prototypes(const std::vector<Embedded>& embeddings, int num_classes,
                             int k, std::uint64_t seed) {
    if (num_classes < 1 || k < 1)
        throw DataError("init_prototypes: num_classes and k must be >= 1");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        const int c = embeddings[i].label;
        if (c < 0 || c >= num_classes)
            throw DataError("init_prototypes: label " + std::to_string(c) +
                            " out of range");
        by_class[static_cast<std::size_t>(c)].push_back(i);
    }
    for (int c = 0; c < num_classes; ++c)
        if (by_class[static_cast<std::size_t>(c)].empty())
            throw DataError("init_prototypes: class " + std::to_string(c) +
                            " has no embeddings");

    const std::size_t dz = embeddings[0].z.size();
    PrototypeSet ps;
    ps.num_classes = num_classes;
    ps.k = k;
    std::vector<double> pdata;
    pdata.reserve(static_cast<std::size_t>(num_classes * k) * dz);
    ps.medoids.resize(static_cast<std::size_t>(num_classes * k));

    for (int c = 0; c < num_classes; ++c) {
        const auto& idx = by_class[static_cast<std::size_t>(c)];
        std::vector<std::vector<double>> pts;
        pts.reserve(idx.size());
        for (std::size_t i : idx) pts.push_back(embeddings[i].z);

        std::vector<std::vector<double>> centroids;
        if (static_cast<int>(pts.size()) >= k) {
            centroids = kmeans(pts, k, mix_seed(seed, 40 + static_cast<std::uint64_t>(c)))
                            .centroids;
        } else {
            // too few samples: keep the points, then duplicate the class mean
            centroids = pts;
            std::vector<double> mean(dz, 0.0);
            for (const auto& p : pts)
                for (std::size_t d = 0; d < dz; ++d) mean[d] += p[d];
            for (double& v : mean) v /= static_cast<double>(pts.size());
            while (static_cast<int>(centroids.size()) < k) centroids.push_back(mean);
        }

        for (int slot = 0; slot < k; ++slot) {
            const auto& cen = centroids[static_cast<std::size_t>(slot)];
            pdata.insert(pdata.end(), cen.begin(), cen.end());
            // medoid: nearest embedding of this class
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const double d = sq_dist(pts[i], cen);
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            const Embedded& med = embeddings[idx[best]];
            ps.medoids[static_cast<std::size_t>(c * k + slot)] = {med.video_id,
                                                                  med.frame_idx};
        }
    }

    ps.p = Tensor::from(pdata, {static_cast<std::size_t>(num_classes * k), dz}, true);
    ps.p.set_name("proto.p");
    ps.p0 = ps.p.clone();
    ps.p0.set_requires_grad(false);
    ps.p0.set_name("proto.p0");
    return ps;
}

PrototypePrediction prototype_predict(Tape& tape, const Tensor& z,
                                      const PrototypeSet& protos) {
    PrototypePrediction out;
    out.d = num::pairwise_distance(tape, z, protos.p);
    Tensor s = num::softmax_rows(tape, num::neg(tape, out.d));
    out.y_hat = num::avg_col_groups(tape, s, static_cast<std::size_t>(protos.k));
    out.q = num::scale(tape, out.y_hat, static_cast<double>(protos.k));
    return out;
}

std::vector<double> class_mass_from_distances(const std::vector<double>& d_row,
                                              int num_classes, int k) {
    Tape tape(false);
    Tensor d = Tensor::from(d_row, {1, d_row.size()});
    Tensor s = num::softmax_rows(tape, num::neg(tape, d));
    Tensor y = num::avg_col_groups(tape, s, static_cast<std::size_t>(k));
    (void)num_classes;
    std::vector<double> q(y.data().begin(), y.data().end());
    for (double& v : q) v *= static_cast<double>(k);
    return q;
}

FinetuneResult finetune(const std::vector<sg::DynamicSceneGraph>& train,
                        const std::vector<sg::DynamicSceneGraph>& val,
                        ModelParams& params, PrototypeSet& protos,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw DataError("finetune: empty train split");
    if (!protos.p.valid() || protos.slots() == 0)
        throw DataError("finetune: prototypes not initialized");

    // only the encoder and the prototypes move; decoder and head are frozen
    params.set_requires_grad(true, false, false);
    protos.p.set_requires_grad(true);
    std::vector<Tensor> trainable = params.encoder_tensors();
    trainable.push_back(protos.p);
    num::AdamState adam(trainable, cfg.base_lr, 0.9, 0.999, 1e-8, cfg.lr_step_epochs);

    FinetuneResult result;
    double best_val = -1.0;
    ModelParams best_params = params.clone();
    Tensor best_p = protos.p.clone();
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
        adam.set_epoch(epoch);
        auto batches = sg::make_batches(train, static_cast<std::size_t>(cfg.batch_size),
                                        mix_seed(cfg.seed, 0xF17E + static_cast<std::uint64_t>(epoch)));
        double rec_sum = 0.0, cls_sum = 0.0, reg_sum = 0.0, total_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (sg::GraphBatch& batch : batches) {
            Tape tape;
            auto enc = model::encode(tape, batch, params);
            Tensor xhat = model::decode(tape, enc.h, params);
            Tensor l_rec = num::mse_loss(tape, xhat, batch.x);
            auto pp = prototype_predict(tape, enc.z, protos);
            Tensor l_cls = num::nll_from_probs(tape, pp.q, batch.labels);
            Tensor diff = num::sub(tape, protos.p, protos.p0);
            Tensor l_reg = num::sum(tape, num::mul(tape, diff, diff));
            Tensor total = num::add(
                tape,
                num::add(tape, num::scale(tape, l_cls, cfg.lambda_cls),
                         num::scale(tape, l_reg, cfg.lambda_reg)),
                num::scale(tape, l_rec, cfg.lambda_rec));
            tape.backward(total);
            adam.step();
            rec_sum += l_rec.value();
            cls_sum += l_cls.value();
            reg_sum += l_reg.value();
            total_sum += total.value();
            const std::size_t c = pp.y_hat.cols();
            for (std::size_t b = 0; b < batch.labels.size(); ++b)
                if (argmax_row(pp.y_hat.data().subspan(b * c, c)) == batch.labels[b])
                    ++correct;
            seen += batch.labels.size();
        }
        const auto nb = static_cast<double>(batches.size());
        result.history.push_back({epoch, "train", rec_sum / nb, cls_sum / nb,
                                  reg_sum / nb, total_sum / nb,
                                  static_cast<double>(correct) / static_cast<double>(seen)});

        if (!val.empty()) {
            EvalStats vs = evaluate_split(val, params, &protos, cfg);
            result.history.push_back(
                {epoch, "val", vs.l_rec, vs.l_cls, vs.l_reg, vs.total, vs.accuracy});
            if (vs.accuracy > best_val) {
                best_val = vs.accuracy;
                best_params = params.clone();
                best_p = protos.p.clone();
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    if (!val.empty()) {
        params = std::move(best_params);
        protos.p = best_p;
        protos.p.set_name("proto.p");
    }

    // refresh medoids and calibration from the final embeddings
    auto final_emb = embed_all(train, params);
    const std::size_t dz = protos.p.cols();
    for (std::size_t slot = 0; slot < protos.slots(); ++slot) {
        const int c = protos.class_of(slot);
        double best_d = std::numeric_limits<double>::infinity();
        const Embedded* best_e = nullptr;
        for (const Embedded& e : final_emb) {
            if (e.label != c) continue;
            double acc = 0.0;
            for (std::size_t d = 0; d < dz; ++d) {
                const double diff = e.z[d] - protos.p.at(slot, d);
                acc += diff * diff;
            }
            if (acc < best_d) {
                best_d = acc;
                best_e = &e;
            }
        }
        if (best_e) protos.medoids[slot] = {best_e->video_id, best_e->frame_idx};
    }
    protos.calib = calibrate(final_emb, protos);
    return result;
}

model::Calibration calibrate(const std::vector<Embedded>& train_embeddings,
                             const PrototypeSet& protos, double lambda) {
    model::Calibration cal;
    cal.lambda = lambda;
    cal.mu.assign(static_cast<std::size_t>(protos.num_classes), 0.0);
    cal.sigma.assign(static_cast<std::size_t>(protos.num_classes), 0.0);
    std::vector<std::vector<double>> dists(static_cast<std::size_t>(protos.num_classes));
    const std::size_t dz = protos.p.cols();
    for (const Embedded& e : train_embeddings) {
        const auto c = static_cast<std::size_t>(e.label);
        double best = std::numeric_limits<double>::infinity();
        for (int slot = e.label * protos.k; slot < (e.label + 1) * protos.k; ++slot) {
            double acc = 0.0;
            for (std::size_t d = 0; d < dz; ++d) {
                const double diff = e.z[d] - protos.p.at(static_cast<std::size_t>(slot), d);
                acc += diff * diff;
            }
            best = std::min(best, acc);
        }
        dists[c].push_back(std::sqrt(best));
    }
    for (std::size_t c = 0; c < dists.size(); ++c) {
        if (dists[c].empty()) continue;
        double mu = 0.0;
        for (double d : dists[c]) mu += d;
        mu /= static_cast<double>(dists[c].size());
        double var = 0.0;
        for (double d : dists[c]) var += (d - mu) * (d - mu);
        var /= static_cast<double>(dists[c].size());
        cal.mu[c] = mu;
        cal.sigma[c] = std::sqrt(var);
    }
    return cal;
}

namespace {

std::vector<InferRow> infer_impl(const sg::VideoFrames& video, const ModelParams& params,
                                 const PrototypeSet* protos, const sg::FeatureSpec& spec,
                                 int window) {
    std::vector<sg::DynamicSceneGraph> windows;
    for (std::size_t t = 0; t < video.frames.size(); ++t)
        windows.push_back(sg::build_dsg(video.frames, window, static_cast<int>(t), spec));
    std::vector<InferRow> out;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < windows.size(); start += kChunk) {
        std::vector<const sg::DynamicSceneGraph*> chunk;
        for (std::size_t i = start; i < std::min(windows.size(), start + kChunk); ++i)
            chunk.push_back(&windows[i]);
        sg::GraphBatch batch = sg::single_batch(chunk);
        Tape tape(false);
        auto enc = model::encode(tape, batch, params);
        if (protos) {
            auto pp = prototype_predict(tape, enc.z, *protos);
            const std::size_t c = pp.y_hat.cols();
            const std::size_t s = pp.d.cols();
            for (std::size_t b = 0; b < chunk.size(); ++b) {
                InferRow row;
                row.video_id = chunk[b]->video_id;
                row.frame_idx = chunk[b]->target_frame_idx;
                row.label = chunk[b]->label;
                auto yb = pp.y_hat.data().subspan(b * c, c);
                auto db = pp.d.data().subspan(b * s, s);
                row.pred = argmax_row(yb);
                row.y_hat.assign(yb.begin(), yb.end());
                row.distances.assign(db.begin(), db.end());
                out.push_back(std::move(row));
            }
        } else {
            Tensor probs = num::softmax_rows(tape, model::head_logits(tape, enc.z, params));
            const std::size_t c = probs.cols();
            for (std::size_t b = 0; b < chunk.size(); ++b) {
                InferRow row;
                row.video_id = chunk[b]->video_id;
                row.frame_idx = chunk[b]->target_frame_idx;
                row.label = chunk[b]->label;
                auto yb = probs.data().subspan(b * c, c);
                row.pred = argmax_row(yb);
                row.y_hat.assign(yb.begin(), yb.end());
                out.push_back(std::move(row));
            }
        }
    }
    return out;
}

}  // namespace

std::vector<InferRow> infer(const sg::VideoFrames& video, const ModelParams& params,
                            const PrototypeSet& protos, const sg::FeatureSpec& spec,
                            int window) {
    return infer_impl(video, params, &protos, spec, window);
}

std::vector<InferRow> infer_head(const sg::VideoFrames& video, const ModelParams& params,
                                 const sg::FeatureSpec& spec, int window) {
    return infer_impl(video, params, nullptr, spec, window);
}

}  // namespace protoflow::flow
