#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "protoflow/model.hpp"
#include "protoflow/rng.hpp"
#include "protoflow/util.hpp"
#include "support/gradcheck.hpp"
#include "support/tmpdir.hpp"

using namespace protoflow;
using num::Tape;
using num::Tensor;
using testsup::fill_random;
using testsup::max_grad_rel_err;
using testsup::TmpDir;

namespace {

model::EncoderConfig tiny_cfg(int input_dim = 5, int hidden = 6, int enc = 4) {
    model::EncoderConfig c = model::EncoderConfig::desk(input_dim, hidden, enc);
    c.edge_embed_dim = 3;
    return c;
}

std::vector<sg::TypedEdge> with_self_loops(std::vector<sg::TypedEdge> edges,
                                           std::size_t n, int self_type = 3) {
    for (std::size_t i = 0; i < n; ++i)
        edges.push_back({static_cast<std::int64_t>(i), static_cast<std::int64_t>(i),
                         self_type});
    std::stable_sort(edges.begin(), edges.end(),
                     [](const sg::TypedEdge& a, const sg::TypedEdge& b) {
                         return a.dst < b.dst;
                     });
    return edges;
}

sg::GraphBatch batch_of(Tensor x, std::vector<sg::TypedEdge> edges,
                        std::vector<std::int64_t> segments, std::vector<int> labels) {
    sg::GraphBatch b;
    b.x = std::move(x);
    b.edges = std::move(edges);
    b.segments = std::move(segments);
    b.labels = std::move(labels);
    b.num_graphs = b.labels.size();
    return b;
}

}  // namespace

TEST_CASE("gat layer on a single self-looped node matches the closed form") {
    model::EncoderConfig cfg = tiny_cfg();
    model::ModelParams params = model::ModelParams::init(cfg, 3, 42);
    const model::GatLayerParams& layer = params.layers[0];

    Rng rng(1);
    Tensor h = Tensor::zeros({1, 5});
    fill_random(h, rng);

    Tape tape(false);
    auto edges = with_self_loops({}, 1);
    model::GatOutput out = model::gat_layer(tape, h, edges, 1, layer, cfg, 0);

    CHECK(out.alpha.numel() == 1);
    CHECK(out.alpha.value() == doctest::Approx(1.0).epsilon(1e-12));

    // h' = elu(W_r h + E_self + bias), bias is zero at init
    Tensor hr = num::matmul(tape, h, layer.w_right[0]);
    Tensor etab = num::matmul(tape, layer.edge_embed, layer.edge_proj);
    for (std::size_t c = 0; c < 6; ++c) {
        const double pre = hr.at(0, c) + etab.at(3, c);
        const double expect = pre >= 0.0 ? pre : std::expm1(pre);
        CHECK(out.h.at(0, c) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("attention is symmetric for identical senders and sums to 1") {
    model::EncoderConfig cfg = tiny_cfg();
    model::ModelParams params = model::ModelParams::init(cfg, 3, 7);

    Rng rng(2);
    Tensor h = Tensor::zeros({3, 5});
    fill_random(h, rng);
    // nodes 0 and 1 identical, both feeding node 2
    for (std::size_t c = 0; c < 5; ++c) h.mut_data()[1 * 5 + c] = h.at(0, c);

    auto edges = with_self_loops({{0, 2, sg::kSpatial}, {1, 2, sg::kSpatial}}, 3);
    Tape tape(false);
    model::GatOutput out = model::gat_layer(tape, h, edges, 3, params.layers[0], cfg, 0);

    // locate the two incoming spatial edges of node 2 in sorted order
    std::vector<double> alpha_in;
    double sum2 = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (edges[e].dst != 2) continue;
        sum2 += out.alpha.at(e);
        if (edges[e].type == sg::kSpatial) alpha_in.push_back(out.alpha.at(e));
    }
    REQUIRE(alpha_in.size() == 2);
    CHECK(alpha_in[0] == doctest::Approx(alpha_in[1]).epsilon(1e-12));
    CHECK(sum2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gat layer full gradient check on a 4-node graph") {
    model::EncoderConfig cfg = tiny_cfg(4, 5, 3);
    model::ModelParams params = model::ModelParams::init(cfg, 2, 3);
    model::GatLayerParams& layer = params.layers[0];

    Rng rng(4);
    Tensor h = Tensor::zeros({4, 4}, true);
    fill_random(h, rng);
    auto edges = with_self_loops(
        {{0, 1, sg::kSpatial}, {2, 1, sg::kSemantic}, {1, 3, sg::kTemporal},
         {3, 0, sg::kSpatial}},
        4);
    Tensor target = Tensor::zeros({4, 5});
    fill_random(target, rng);

    std::vector<Tensor> leaves = {h, layer.w_left[0], layer.w_right[0], layer.attn[0],
                                  layer.edge_embed, layer.edge_proj, layer.bias};
    auto fwd = [&](Tape& t) {
        model::GatOutput out = model::gat_layer(t, h, edges, 4, layer, cfg, 0);
        return num::mse_loss(t, out.h, target);
    };
    CHECK(max_grad_rel_err(leaves, fwd) < 1e-6);
}

TEST_CASE("encode invariances") {
    model::EncoderConfig cfg = tiny_cfg();
    model::ModelParams params = model::ModelParams::init(cfg, 3, 9);
    Rng rng(5);

    SUBCASE("single-node graph pools to its own row") {
        Tensor x = Tensor::zeros({1, 5});
        fill_random(x, rng);
        sg::GraphBatch b = batch_of(x, {}, {0}, {0});
        Tape tape(false);
        auto enc = model::encode(tape, b, params);
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(enc.z.at(0, c) == doctest::Approx(enc.h.at(0, c)).epsilon(1e-12));
    }

    SUBCASE("node permutation leaves Z unchanged and permutes H") {
        Tensor x = Tensor::zeros({4, 5});
        fill_random(x, rng);
        std::vector<sg::TypedEdge> edges = {{0, 1, sg::kSpatial},
                                            {1, 2, sg::kSemantic},
                                            {3, 2, sg::kSpatial},
                                            {2, 0, sg::kTemporal}};
        sg::GraphBatch b1 = batch_of(x.clone(), edges, {0, 0, 0, 0}, {1});

        // permutation 0->2, 1->0, 2->3, 3->1
        const std::vector<std::int64_t> perm = {2, 0, 3, 1};
        Tensor px = Tensor::zeros({4, 5});
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t c = 0; c < 5; ++c)
                px.mut_data()[static_cast<std::size_t>(perm[i]) * 5 + c] = x.at(i, c);
        std::vector<sg::TypedEdge> pedges;
        for (const sg::TypedEdge& e : edges)
            pedges.push_back({perm[static_cast<std::size_t>(e.src)],
                              perm[static_cast<std::size_t>(e.dst)], e.type});
        sg::GraphBatch b2 = batch_of(px, pedges, {0, 0, 0, 0}, {1});

        Tape tape(false);
        auto e1 = model::encode(tape, b1, params);
        auto e2 = model::encode(tape, b2, params);
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(e1.z.at(0, c) == doctest::Approx(e2.z.at(0, c)).epsilon(1e-9));
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t c = 0; c < 4; ++c)
                CHECK(e1.h.at(i, c) ==
                      doctest::Approx(e2.h.at(static_cast<std::size_t>(perm[i]), c))
                          .epsilon(1e-9));
    }

    SUBCASE("identical graphs in one batch and batch-size invariance") {
        Tensor x1 = Tensor::zeros({2, 5});
        fill_random(x1, rng);

        Tensor x2 = Tensor::zeros({4, 5});
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t c = 0; c < 5; ++c) {
                x2.mut_data()[i * 5 + c] = x1.at(i, c);
                x2.mut_data()[(i + 2) * 5 + c] = x1.at(i, c);
            }
        sg::GraphBatch pair = batch_of(x2, {{0, 1, sg::kSpatial}, {2, 3, sg::kSpatial}},
                                       {0, 0, 1, 1}, {0, 0});
        sg::GraphBatch solo = batch_of(x1.clone(), {{0, 1, sg::kSpatial}}, {0, 0}, {0});

        Tape tape(false);
        auto ep = model::encode(tape, pair, params);
        auto es = model::encode(tape, solo, params);
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(ep.z.at(0, c) == doctest::Approx(ep.z.at(1, c)).epsilon(1e-12));
            CHECK(std::abs(ep.z.at(0, c) - es.z.at(0, c)) <= 1e-12);
        }
    }

    SUBCASE("two attention heads still produce valid shapes and gradients") {
        model::EncoderConfig cfg2 = tiny_cfg(4, 5, 3);
        cfg2.heads = 2;
        model::ModelParams p2 = model::ModelParams::init(cfg2, 2, 11);
        Tensor x = Tensor::zeros({3, 4}, true);
        fill_random(x, rng);
        sg::GraphBatch b = batch_of(x, {{0, 1, sg::kSpatial}, {1, 2, sg::kSemantic}},
                                    {0, 0, 0}, {0});
        Tensor target = Tensor::zeros({1, 3});
        fill_random(target, rng);
        auto fwd = [&](Tape& t) {
            auto enc = model::encode(t, b, p2);
            return num::mse_loss(t, enc.z, target);
        };
        CHECK(max_grad_rel_err({x, p2.layers[0].w_left[1], p2.layers[0].attn[1]}, fwd) <
              1e-6);
    }
}

TEST_CASE("decoder") {
    model::EncoderConfig cfg = tiny_cfg();
    model::ModelParams params = model::ModelParams::init(cfg, 3, 13);
    Rng rng(6);

    SUBCASE("zero weights decode to zero, shape matches input dim") {
        for (Tensor t : params.decoder_tensors())
            std::fill(t.mut_data().begin(), t.mut_data().end(), 0.0);
        Tensor h = Tensor::zeros({3, 4});
        fill_random(h, rng);
        Tape tape(false);
        Tensor xhat = model::decode(tape, h, params);
        CHECK(xhat.rows() == 3);
        CHECK(xhat.cols() == 5);
        for (double v : xhat.data()) CHECK(v == 0.0);
    }

    SUBCASE("decoder parameter gradients pass finite differences") {
        Tensor h = Tensor::zeros({3, 4}, true);
        fill_random(h, rng);
        Tensor target = Tensor::zeros({3, 5});
        fill_random(target, rng);
        std::vector<Tensor> leaves = params.decoder_tensors();
        leaves.push_back(h);
        auto fwd = [&](Tape& t) {
            return num::mse_loss(t, model::decode(t, h, params), target);
        };
        CHECK(max_grad_rel_err(leaves, fwd) < 1e-6);
    }
}

TEST_CASE("classification head") {
    model::EncoderConfig cfg = tiny_cfg();
    Rng rng(8);

    SUBCASE("zero weights give a uniform softmax") {
        model::ModelParams params = model::ModelParams::init(cfg, 4, 1);
        std::fill(params.head_w.mut_data().begin(), params.head_w.mut_data().end(), 0.0);
        Tensor z = Tensor::zeros({2, 4});
        fill_random(z, rng);
        Tape tape(false);
        Tensor probs = num::softmax_rows(tape, model::head_logits(tape, z, params));
        for (double v : probs.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("two-class logits 0 and ln 3") {
        Tape tape(false);
        Tensor logits = Tensor::from({0.0, std::log(3.0)}, {1, 2});
        Tensor probs = num::softmax_rows(tape, logits);
        CHECK(probs.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(probs.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
    }

    SUBCASE("rows are independent") {
        model::ModelParams params = model::ModelParams::init(cfg, 4, 2);
        Tensor z1 = Tensor::zeros({2, 4});
        fill_random(z1, rng);
        Tensor z2 = z1.clone();
        for (std::size_t c = 0; c < 4; ++c) z2.mut_data()[4 + c] += 1.0;  // change row 1
        Tape tape(false);
        Tensor l1 = model::head_logits(tape, z1, params);
        Tensor l2 = model::head_logits(tape, z2, params);
        for (std::size_t c = 0; c < 4; ++c) CHECK(l1.at(0, c) == l2.at(0, c));
    }
}

TEST_CASE("parameter count is a pure function of the config") {
    auto closed_form = [](const model::EncoderConfig& c, int num_classes) {
        std::size_t total = 0;
        for (int l = 0; l < c.num_layers; ++l) {
            const auto fin = static_cast<std::size_t>(c.layer_in(l));
            const auto fout = static_cast<std::size_t>(c.layer_out(l));
            total += static_cast<std::size_t>(c.heads) * (2 * fin * fout + fout);
            total += static_cast<std::size_t>(c.num_edge_types + 1) *
                     static_cast<std::size_t>(c.edge_embed_dim);
            total += static_cast<std::size_t>(c.edge_embed_dim) * fout + fout;
        }
        const auto dz = static_cast<std::size_t>(c.encoding_dim);
        const auto dh = static_cast<std::size_t>(c.hidden_dim);
        const auto d = static_cast<std::size_t>(c.input_dim);
        total += dz * dh + dh + dh * dh + dh + dh * d + d;
        total += dz * static_cast<std::size_t>(num_classes) +
                 static_cast<std::size_t>(num_classes);
        return total;
    };

    // paper-scale config, pinned as a regression constant
    model::EncoderConfig full;
    full.input_dim = 20;
    model::ModelParams params = model::ModelParams::init(full, 6, 0);
    CHECK(params.parameter_count() == 4831450);
    CHECK(params.parameter_count() == closed_form(full, 6));

    model::EncoderConfig desk = model::EncoderConfig::desk(20);
    model::ModelParams dp = model::ModelParams::init(desk, 6, 0);
    CHECK(dp.parameter_count() == closed_form(desk, 6));
}

TEST_CASE("checkpoint round trips") {
    TmpDir tmp("ckpt");
    model::EncoderConfig cfg = tiny_cfg();
    model::ModelParams params = model::ModelParams::init(cfg, 3, 21);
    model::CheckpointExtras extras{{4, 2, 3}, 2, 21};

    SUBCASE("tensors are bit-identical and bytes stable across save/load/save") {
        model::save_checkpoint(params, nullptr, extras, tmp / "a.pflw");
        model::LoadedCheckpoint lc = model::load_checkpoint(tmp / "a.pflw");
        auto orig = params.named();
        auto loaded = lc.params.named();
        REQUIRE(orig.size() == loaded.size());
        for (std::size_t i = 0; i < orig.size(); ++i) {
            CHECK(orig[i].name == loaded[i].name);
            CHECK(std::equal(orig[i].tensor.data().begin(), orig[i].tensor.data().end(),
                             loaded[i].tensor.data().begin()));
        }
        CHECK(lc.extras.window == 2);
        CHECK(lc.extras.features.node_classes == 4);
        CHECK_FALSE(lc.protos.has_value());

        model::save_checkpoint(lc.params, nullptr, lc.extras, tmp / "b.pflw");
        CHECK(read_file(tmp / "a.pflw") == read_file(tmp / "b.pflw"));
    }

    SUBCASE("prototypes and calibration survive") {
        model::PrototypeSet protos;
        protos.num_classes = 3;
        protos.k = 2;
        Rng rng(2);
        protos.p = Tensor::zeros({6, 4}, true);
        fill_random(protos.p, rng);
        protos.p0 = protos.p.clone();
        protos.medoids.assign(6, {"video_000", 5});
        protos.calib = model::Calibration{{0.1, 0.2, 0.3}, {0.01, 0.02, 0.03}, 3.0};

        model::save_checkpoint(params, &protos, extras, tmp / "p.pflw");
        model::LoadedCheckpoint lc = model::load_checkpoint(tmp / "p.pflw");
        REQUIRE(lc.protos.has_value());
        CHECK(lc.protos->k == 2);
        CHECK(lc.protos->medoids.size() == 6);
        CHECK(lc.protos->medoids[0].video_id == "video_000");
        REQUIRE(lc.protos->calib.has_value());
        CHECK(lc.protos->calib->mu[2] == 0.3);
        CHECK(std::equal(protos.p.data().begin(), protos.p.data().end(),
                         lc.protos->p.data().begin()));
        model::save_checkpoint(lc.params, &*lc.protos, lc.extras, tmp / "q.pflw");
        CHECK(read_file(tmp / "p.pflw") == read_file(tmp / "q.pflw"));
    }

    SUBCASE("wrong magic is rejected") {
        write_file(tmp / "bad.pflw", "NOPE....");
        CHECK_THROWS_WITH_AS(model::load_checkpoint(tmp / "bad.pflw"),
                             doctest::Contains("not a ProtoFlow checkpoint"), IoError);
    }

    SUBCASE("truncated file is rejected") {
        model::save_checkpoint(params, nullptr, extras, tmp / "full.pflw");
        std::string bytes = read_file(tmp / "full.pflw");
        write_file(tmp / "cut.pflw", bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_AS(model::load_checkpoint(tmp / "cut.pflw"), IoError);
    }
}
