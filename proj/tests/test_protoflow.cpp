#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "protoflow/flow.hpp"
#include "protoflow/rng.hpp"
#include "protoflow/synthetic.hpp"
#include "support/gradcheck.hpp"

using namespace protoflow;
using num::Tape;
using num::Tensor;
using testsup::fill_random;
using testsup::max_grad_rel_err;

namespace {

// brute-force 2-means on <= 12 points: enumerate all assignments
std::pair<std::vector<std::vector<double>>, double> brute_force_2means(
    const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size();
    const std::size_t dim = pts[0].size();
    double best_inertia = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_centroids;
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
        std::vector<std::vector<double>> cen(2, std::vector<double>(dim, 0.0));
        std::size_t counts[2] = {0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const int g = (mask >> i) & 1;
            ++counts[g];
            for (std::size_t d = 0; d < dim; ++d) cen[static_cast<std::size_t>(g)][d] += pts[i][d];
        }
        for (int g = 0; g < 2; ++g)
            for (std::size_t d = 0; d < dim; ++d)
                cen[static_cast<std::size_t>(g)][d] /= static_cast<double>(counts[g]);
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& c = cen[static_cast<std::size_t>((mask >> i) & 1)];
            for (std::size_t d = 0; d < dim; ++d)
                inertia += (pts[i][d] - c[d]) * (pts[i][d] - c[d]);
        }
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best_centroids = cen;
        }
    }
    return {best_centroids, best_inertia};
}

model::PrototypeSet protos_from(const std::vector<double>& data, int c, int k,
                                std::size_t dz) {
    model::PrototypeSet ps;
    ps.num_classes = c;
    ps.k = k;
    ps.p = Tensor::from(data, {static_cast<std::size_t>(c * k), dz}, true);
    ps.p0 = ps.p.clone();
    ps.medoids.resize(static_cast<std::size_t>(c * k));
    return ps;
}

}  // namespace

TEST_CASE("prototype prediction follows the distance-softmax form") {
    SUBCASE("equidistant prototypes split the mass evenly") {
        // C=2, K=1, z halfway between the prototypes
        model::PrototypeSet ps = protos_from({-1.0, 0.0, 1.0, 0.0}, 2, 1, 2);
        Tensor z = Tensor::from({0.0, 0.0}, {1, 2});
        Tape tape(false);
        auto pp = flow::prototype_predict(tape, z, ps);
        CHECK(pp.y_hat.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(pp.y_hat.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(pp.q.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("per-row mass sums to 1/K for y_hat and 1 for q") {
        Rng rng(3);
        model::PrototypeSet ps = protos_from(std::vector<double>(2 * 2 * 3, 0.0), 2, 2, 3);
        fill_random(ps.p, rng);
        Tensor z = Tensor::zeros({5, 3});
        fill_random(z, rng);
        Tape tape(false);
        auto pp = flow::prototype_predict(tape, z, ps);
        for (std::size_t b = 0; b < 5; ++b) {
            double sy = 0.0, sq = 0.0;
            for (std::size_t c = 0; c < 2; ++c) {
                sy += pp.y_hat.at(b, c);
                sq += pp.q.at(b, c);
            }
            CHECK(std::abs(sy - 0.5) <= 1e-12);
            CHECK(std::abs(sq - 1.0) <= 1e-12);
        }
    }

    SUBCASE("z on a prototype takes nearly all the class mass") {
        // C=2, K=2; prototypes of class 1 at the origin region, others >= 10 away
        std::vector<double> pdata = {
            10.0, 10.0,  // class 0, slot 0
            12.0, 10.0,  // class 0, slot 1
            0.0, 0.0,    // class 1, slot 0  <- z sits here
            0.0, 11.0,   // class 1, slot 1
        };
        model::PrototypeSet ps = protos_from(pdata, 2, 2, 2);
        Tensor z = Tensor::from({0.0, 0.0}, {1, 2});
        Tape tape(false);
        auto pp = flow::prototype_predict(tape, z, ps);
        CHECK(flow::argmax_row(pp.y_hat.data()) == 1);
        CHECK(pp.q.at(0, 1) > 0.99);
    }

    SUBCASE("monotonicity: lowering one distance raises its slot and class mass") {
        std::vector<double> d1 = {1.0, 2.0, 1.5, 0.8, 2.2, 1.1};
        std::vector<double> d2 = d1;
        d2[1] -= 0.4;
        auto q1 = flow::class_mass_from_distances(d1, 3, 2);
        auto q2 = flow::class_mass_from_distances(d2, 3, 2);
        CHECK(q2[0] > q1[0]);
        CHECK(q2[1] < q1[1]);
        CHECK(q2[2] < q1[2]);
    }

    SUBCASE("translation invariance of distances and predictions") {
        Rng rng(5);
        model::PrototypeSet ps = protos_from(std::vector<double>(3 * 2 * 4, 0.0), 3, 2, 4);
        fill_random(ps.p, rng);
        Tensor z = Tensor::zeros({2, 4});
        fill_random(z, rng);

        model::PrototypeSet shifted = protos_from(
            std::vector<double>(ps.p.data().begin(), ps.p.data().end()), 3, 2, 4);
        Tensor z2 = z.clone();
        const double delta[4] = {0.3, -0.7, 1.1, 0.5};
        for (std::size_t r = 0; r < shifted.p.rows(); ++r)
            for (std::size_t c = 0; c < 4; ++c)
                shifted.p.mut_data()[r * 4 + c] += delta[c];
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 0; c < 4; ++c) z2.mut_data()[r * 4 + c] += delta[c];

        Tape tape(false);
        auto p1 = flow::prototype_predict(tape, z, ps);
        auto p2 = flow::prototype_predict(tape, z2, shifted);
        for (std::size_t i = 0; i < p1.d.numel(); ++i)
            CHECK(p1.d.data()[i] == doctest::Approx(p2.d.data()[i]).epsilon(1e-9));
        for (std::size_t i = 0; i < p1.y_hat.numel(); ++i)
            CHECK(p1.y_hat.data()[i] == doctest::Approx(p2.y_hat.data()[i]).epsilon(1e-9));
    }

    SUBCASE("argmax of y_hat equals argmax of q") {
        Rng rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> d(19 * 3);
            for (double& v : d) v = rng.uniform(0.0, 5.0);
            auto q = flow::class_mass_from_distances(d, 19, 3);
            std::vector<double> y = q;
            for (double& v : y) v /= 3.0;
            CHECK(flow::argmax_row(q) == flow::argmax_row(y));
        }
    }
}

TEST_CASE("k-means") {
    SUBCASE("k=1 is the exact mean") {
        std::vector<std::vector<double>> pts = {{1.0, 2.0}, {3.0, 6.0}, {5.0, 1.0}};
        auto res = flow::kmeans(pts, 1, 99);
        REQUIRE(res.centroids.size() == 1);
        CHECK(std::abs(res.centroids[0][0] - 3.0) <= 1e-12);
        CHECK(std::abs(res.centroids[0][1] - 3.0) <= 1e-12);
    }

    SUBCASE("two well-separated pairs recover the pair means") {
        std::vector<std::vector<double>> pts = {
            {0.0, 0.0}, {0.2, 0.0}, {10.0, 10.0}, {10.2, 10.0}};
        auto res = flow::kmeans(pts, 2, 1);
        auto [expect, best_inertia] = brute_force_2means(pts);
        // match centroids up to ordering
        std::sort(res.centroids.begin(), res.centroids.end());
        std::sort(expect.begin(), expect.end());
        for (int g = 0; g < 2; ++g)
            for (int d = 0; d < 2; ++d)
                CHECK(std::abs(res.centroids[static_cast<std::size_t>(g)][static_cast<std::size_t>(d)] -
                               expect[static_cast<std::size_t>(g)][static_cast<std::size_t>(d)]) <= 1e-6);
        CHECK(res.inertia_per_iter.back() == doctest::Approx(best_inertia).epsilon(1e-9));
    }

    SUBCASE("inertia never increases across Lloyd iterations") {
        Rng rng(13);
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 40; ++i)
            pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        auto res = flow::kmeans(pts, 4, 5);
        for (std::size_t i = 1; i < res.inertia_per_iter.size(); ++i)
            CHECK(res.inertia_per_iter[i] <= res.inertia_per_iter[i - 1] + 1e-12);
    }

    SUBCASE("same seed, same result") {
        Rng rng(17);
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 20; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        auto a = flow::kmeans(pts, 3, 7);
        auto b = flow::kmeans(pts, 3, 7);
        CHECK(a.centroids == b.centroids);
        CHECK(a.assignment == b.assignment);
    }
}

TEST_CASE("init_prototypes") {
    std::vector<flow::Embedded> emb;
    auto put = [&](int label, std::vector<double> z, const std::string& vid, int frame) {
        flow::Embedded e;
        e.label = label;
        e.z = std::move(z);
        e.video_id = vid;
        e.frame_idx = frame;
        emb.push_back(std::move(e));
    };
    put(0, {0.0, 0.0}, "a", 0);
    put(0, {0.2, 0.0}, "a", 1);
    put(0, {5.0, 5.0}, "a", 2);
    put(0, {5.2, 5.0}, "a", 3);
    put(1, {9.0, 9.0}, "b", 0);

    SUBCASE("k=2 splits class 0 into both planted clusters; short class duplicates its mean") {
        model::PrototypeSet ps = flow::init_prototypes(emb, 2, 2, 11);
        CHECK(ps.slots() == 4);
        // class 0 slots at the two pair means, in some order
        std::vector<std::vector<double>> got = {
            {ps.p.at(0, 0), ps.p.at(0, 1)}, {ps.p.at(1, 0), ps.p.at(1, 1)}};
        std::sort(got.begin(), got.end());
        CHECK(got[0][0] == doctest::Approx(0.1).epsilon(1e-9));
        CHECK(got[1][0] == doctest::Approx(5.1).epsilon(1e-9));
        // class 1 has one embedding; both slots carry it (mean duplication)
        CHECK(ps.p.at(2, 0) == 9.0);
        CHECK(ps.p.at(3, 0) == 9.0);
        // P0 frozen copy matches P at init
        CHECK(std::equal(ps.p.data().begin(), ps.p.data().end(), ps.p0.data().begin()));
        // medoids point at real training windows of the right class
        CHECK(ps.medoids[0].video_id == "a");
        CHECK(ps.medoids[2].video_id == "b");
        // k=1 gives the class mean exactly
        model::PrototypeSet one = flow::init_prototypes(emb, 2, 1, 11);
        CHECK(one.p.at(0, 0) == doctest::Approx((0.0 + 0.2 + 5.0 + 5.2) / 4).epsilon(1e-12));
    }

    SUBCASE("deterministic in the seed") {
        model::PrototypeSet a = flow::init_prototypes(emb, 2, 2, 5);
        model::PrototypeSet b = flow::init_prototypes(emb, 2, 2, 5);
        CHECK(std::equal(a.p.data().begin(), a.p.data().end(), b.p.data().begin()));
    }

    SUBCASE("a class with no embeddings names itself in the error") {
        CHECK_THROWS_WITH_AS(flow::init_prototypes(emb, 3, 2, 1),
                             doctest::Contains("class 2"), DataError);
    }
}

namespace {

// tiny two-phase synthetic world for the training-loop tests
sg::SyntheticData tiny_world(int frames, std::uint64_t seed, int num_videos = 1) {
    sg::GeneratorConfig cfg = sg::GeneratorConfig::defaults();
    cfg.seed = seed;
    cfg.num_train = num_videos;
    cfg.num_val = 0;
    cfg.num_test = 0;
    cfg.frames_min = cfg.frames_max = frames;
    cfg.num_phases = 2;
    cfg.transition = {{0.6, 0.4}, {0.4, 0.6}};
    cfg.templates.resize(2);
    cfg.rare_phase = -1;
    cfg.rare_prob = 0.0;
    cfg.jitter = 0.01;
    cfg.node_dropout = 0.0;
    cfg.edge_flip = 0.0;
    cfg.video_style = 0.0;
    return sg::generate_synthetic(cfg);
}

flow::TrainConfig tiny_train(int epochs, std::uint64_t seed) {
    flow::TrainConfig tc;
    tc.pretrain_epochs = epochs;
    tc.finetune_epochs = epochs;
    tc.batch_size = 8;
    tc.k = 2;
    tc.window = 2;
    tc.seed = seed;
    tc.base_lr = 3e-3;  // small problems converge faster at a higher rate
    tc.lr_step_epochs = 100;
    return tc;
}

}  // namespace

TEST_CASE("pretrain behaviour") {
    sg::SyntheticData data = tiny_world(8, 31);
    const sg::FeatureSpec spec{10, 2, 4};
    auto windows = sg::build_all_windows(sg::select_videos(data.dataset, {"video_000"}),
                                         2, spec);
    REQUIRE(windows.size() == 8);

    SUBCASE("empty train split is an error") {
        flow::TrainConfig tc = tiny_train(1, 0);
        model::ModelParams p = model::ModelParams::init(
            model::EncoderConfig::desk(spec.dim(), 16, 8), 2, 0);
        CHECK_THROWS_AS(flow::pretrain({}, windows, std::move(p), tc), DataError);
    }

    SUBCASE("loss history is deterministic and internally consistent") {
        flow::TrainConfig tc = tiny_train(3, 5);
        auto run = [&]() {
            model::ModelParams p = model::ModelParams::init(
                model::EncoderConfig::desk(spec.dim(), 16, 8), 2, tc.seed);
            return flow::pretrain(windows, windows, std::move(p), tc);
        };
        auto r1 = run();
        auto r2 = run();
        REQUIRE(r1.history.size() == r2.history.size());
        for (std::size_t i = 0; i < r1.history.size(); ++i) {
            CHECK(r1.history[i].total == r2.history[i].total);  // bit-identical
            CHECK(std::abs(r1.history[i].total -
                           (r1.history[i].l_rec + r1.history[i].l_cls +
                            r1.history[i].l_reg)) <= 1e-9);
        }
    }

    SUBCASE("single-batch overfit reaches train accuracy 1.0") {
        flow::TrainConfig tc = tiny_train(120, 7);
        tc.patience = 1000;
        model::ModelParams p = model::ModelParams::init(
            model::EncoderConfig::desk(spec.dim(), 16, 8), 2, 7);
        auto res = flow::pretrain(windows, {}, std::move(p), tc);
        double last_acc = 0.0;
        for (const flow::LossReport& r : res.history)
            if (r.split == "train") last_acc = r.accuracy;
        CHECK(last_acc == 1.0);
    }
}

TEST_CASE("embed_all contracts") {
    sg::SyntheticData data = tiny_world(6, 33);
    const sg::FeatureSpec spec{10, 2, 4};
    auto windows = sg::build_all_windows(sg::select_videos(data.dataset, {"video_000"}),
                                         2, spec);
    model::ModelParams params = model::ModelParams::init(
        model::EncoderConfig::desk(spec.dim(), 16, 8), 2, 1);

    CHECK(flow::embed_all({}, params).empty());
    auto emb = flow::embed_all(windows, params);
    CHECK(emb.size() == windows.size());  // one window per frame

    // identical to a direct encode of the same windows
    std::vector<const sg::DynamicSceneGraph*> ptrs;
    for (const auto& w : windows) ptrs.push_back(&w);
    sg::GraphBatch batch = sg::single_batch(ptrs);
    Tape tape(false);
    auto enc = model::encode(tape, batch, params);
    for (std::size_t b = 0; b < emb.size(); ++b)
        for (std::size_t c = 0; c < 8; ++c)
            CHECK(std::abs(emb[b].z[c] - enc.z.at(b, c)) <= 1e-12);
}

TEST_CASE("finetune behaviour") {
    sg::SyntheticData data = tiny_world(8, 35);
    const sg::FeatureSpec spec{10, 2, 4};
    auto windows = sg::build_all_windows(sg::select_videos(data.dataset, {"video_000"}),
                                         2, spec);

    auto make_start = [&](std::uint64_t seed) {
        model::ModelParams p = model::ModelParams::init(
            model::EncoderConfig::desk(spec.dim(), 16, 8), 2, seed);
        auto emb = flow::embed_all(windows, p);
        model::PrototypeSet protos = flow::init_prototypes(emb, 2, 2, seed);
        return std::pair{std::move(p), std::move(protos)};
    };

    SUBCASE("L_reg is exactly zero before any update and positive after") {
        auto [params, protos] = make_start(3);
        Tape tape(false);
        Tensor diff = num::sub(tape, protos.p, protos.p0);
        CHECK(num::sum(tape, num::mul(tape, diff, diff)).value() == 0.0);

        flow::TrainConfig tc = tiny_train(1, 3);
        flow::finetune(windows, {}, params, protos, tc);
        Tape t2(false);
        Tensor diff2 = num::sub(t2, protos.p, protos.p0);
        CHECK(num::sum(t2, num::mul(t2, diff2, diff2)).value() > 0.0);
    }

    SUBCASE("with cls and rec off, prototypes sit at the L_reg stationary point") {
        auto [params, protos] = make_start(5);
        flow::TrainConfig tc = tiny_train(3, 5);
        tc.lambda_cls = 0.0;
        tc.lambda_rec = 0.0;
        std::vector<double> before(protos.p.data().begin(), protos.p.data().end());
        flow::finetune(windows, {}, params, protos, tc);
        CHECK(std::equal(before.begin(), before.end(), protos.p.data().begin()));
    }

    SUBCASE("joint finetune gradient (encoder and prototypes) passes finite differences") {
        auto [params, protos] = make_start(7);
        protos.p.set_requires_grad(true);
        params.set_requires_grad(true, false, false);
        std::vector<const sg::DynamicSceneGraph*> ptrs;
        for (std::size_t i = 0; i < 4; ++i) ptrs.push_back(&windows[i]);
        sg::GraphBatch batch = sg::single_batch(ptrs);

        std::vector<Tensor> leaves = params.encoder_tensors();
        leaves.push_back(protos.p);
        auto fwd = [&](Tape& t) {
            auto enc = model::encode(t, batch, params);
            Tensor xhat = model::decode(t, enc.h, params);
            Tensor l_rec = num::mse_loss(t, xhat, batch.x);
            auto pp = flow::prototype_predict(t, enc.z, protos);
            Tensor l_cls = num::nll_from_probs(t, pp.q, batch.labels);
            Tensor diff = num::sub(t, protos.p, protos.p0);
            Tensor l_reg = num::sum(t, num::mul(t, diff, diff));
            return num::add(t, num::add(t, l_cls, l_reg), l_rec);
        };
        CHECK(max_grad_rel_err(leaves, fwd) < 1e-6);
    }

    SUBCASE("single-batch overfit reaches train accuracy 1.0") {
        auto [params, protos] = make_start(9);
        flow::TrainConfig tc = tiny_train(150, 9);
        tc.patience = 1000;
        // pretrain a little first so the embedding space is not random
        auto pre = flow::pretrain(windows, {}, params.clone(), tiny_train(60, 9));
        auto emb = flow::embed_all(windows, pre.params);
        model::PrototypeSet protos2 = flow::init_prototypes(emb, 2, 2, 9);
        auto res = flow::finetune(windows, {}, pre.params, protos2, tc);
        double last_acc = 0.0;
        for (const flow::LossReport& r : res.history)
            if (r.split == "train") last_acc = r.accuracy;
        CHECK(last_acc == 1.0);
    }
}

TEST_CASE("infer over a video") {
    sg::SyntheticData data = tiny_world(6, 41);
    const sg::FeatureSpec spec{10, 2, 4};
    const sg::VideoFrames* video = sg::find_video(data.dataset, "video_000");
    auto windows = sg::build_all_windows({video}, 1, spec);
    model::ModelParams params = model::ModelParams::init(
        model::EncoderConfig::desk(spec.dim(), 16, 8), 2, 1);
    auto emb = flow::embed_all(windows, params);
    model::PrototypeSet protos = flow::init_prototypes(emb, 2, 1, 1);

    auto rows = flow::infer(*video, params, protos, spec, 1);
    CHECK(rows.size() == video->frames.size());

    // w=1 inference equals batch prediction on the single-frame windows
    std::vector<const sg::DynamicSceneGraph*> ptrs;
    for (const auto& w : windows) ptrs.push_back(&w);
    sg::GraphBatch batch = sg::single_batch(ptrs);
    Tape tape(false);
    auto enc = model::encode(tape, batch, params);
    auto pp = flow::prototype_predict(tape, enc.z, protos);
    for (std::size_t b = 0; b < rows.size(); ++b) {
        CHECK(rows[b].pred == flow::argmax_row(pp.y_hat.data().subspan(b * 2, 2)));
        for (std::size_t s = 0; s < 2; ++s)
            CHECK(rows[b].distances[s] == doctest::Approx(pp.d.at(b, s)).epsilon(1e-12));
    }
}
