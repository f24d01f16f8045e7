#include "protoflow/ops.hpp"

#include <atomic>
#include <cmath>

#include "protoflow/kernels.hpp"

namespace protoflow::num {

namespace {

std::atomic<std::uint64_t> g_nll_clamps{0};

bool any_grad(const Tensor& a, const Tensor& b) {
    return a.requires_grad() || b.requires_grad();
}

bool is_row_vector(const Tensor& t) {
    return t.shape().size() == 1 || (t.shape().size() == 2 && t.shape()[0] == 1);
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()));
}

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(Tape& tape, const Tensor& a, const Tensor& b, BinKind kind,
                 const char* opname) {
    const bool a_row = is_row_vector(a), b_row = is_row_vector(b);
    const Tensor *full = &a, *row = nullptr;
    bool row_is_a = false;
    if (a.shape() == b.shape()) {
        // plain elementwise
    } else if (b_row && b.numel() == a.cols() && a.shape().size() == 2) {
        full = &a;
        row = &b;
    } else if (a_row && a.numel() == b.cols() && b.shape().size() == 2) {
        full = &b;
        row = &a;
        row_is_a = true;
    } else {
        throw DimError(std::string(opname) + ": shape mismatch " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()) + " (not broadcastable)");
    }

    const std::size_t rows = full->rows(), cols = full->cols(), n = full->numel();
    Tensor out = Tensor::zeros(full->shape(), any_grad(a, b));
    auto od = out.mut_data();
    auto ad = a.data();
    auto bd = b.data();
    if (!row) {
        switch (kind) {
            case BinKind::Add: kern::add(n, ad.data(), bd.data(), od.data()); break;
            case BinKind::Sub: kern::sub(n, ad.data(), bd.data(), od.data()); break;
            case BinKind::Mul: kern::mul(n, ad.data(), bd.data(), od.data()); break;
        }
    } else {
        auto rd = row->data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                const double fv = full->data()[r * cols + c];
                const double rv = rd[c];
                double v = 0.0;
                switch (kind) {
                    case BinKind::Add: v = row_is_a ? rv + fv : fv + rv; break;
                    case BinKind::Sub: v = row_is_a ? rv - fv : fv - rv; break;
                    case BinKind::Mul: v = fv * rv; break;
                }
                od[r * cols + c] = v;
            }
    }

    if (tape.recording() && out.requires_grad()) {
        Tensor av = a, bv = b, ov = out;
        bool broadcast = row != nullptr;
        tape.record(out, [av, bv, ov, kind, broadcast, row_is_a, rows, cols]() mutable {
            auto g = ov.grad();
            auto accum = [&](Tensor& t, bool is_row, double sign, bool times_other,
                             const Tensor& other) {
                if (!t.requires_grad()) return;
                auto tg = t.mut_grad();
                if (!is_row) {
                    if (!times_other) {
                        kern::axpy(static_cast<std::int64_t>(g.size()), sign, g.data(),
                                   tg.data());
                    } else {
                        kern::mul_acc(static_cast<std::int64_t>(g.size()), g.data(),
                                      other.data().data(), tg.data());
                    }
                } else {
                    // row-vector operand: sum gradient over rows
                    if (!times_other) {
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < cols; ++c)
                                tg[c] += sign * g[r * cols + c];
                    } else {
                        auto od2 = other.data();
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < cols; ++c)
                                tg[c] += g[r * cols + c] * od2[r * cols + c];
                    }
                }
            };
            switch (kind) {
                case BinKind::Add:
                    accum(av, broadcast && row_is_a, 1.0, false, bv);
                    accum(bv, broadcast && !row_is_a, 1.0, false, av);
                    break;
                case BinKind::Sub:
                    accum(av, broadcast && row_is_a, 1.0, false, bv);
                    accum(bv, broadcast && !row_is_a, -1.0, false, av);
                    break;
                case BinKind::Mul: {
                    // d(a*b)/da = b, /db = a; broadcast side sums over rows
                    if (av.requires_grad()) {
                        if (broadcast && row_is_a) {
                            auto tg = av.mut_grad();
                            auto od2 = bv.data();
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c)
                                    tg[c] += g[r * cols + c] * od2[r * cols + c];
                        } else if (broadcast) {
                            auto tg = av.mut_grad();
                            auto rd = bv.data();
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c)
                                    tg[r * cols + c] += g[r * cols + c] * rd[c];
                        } else {
                            kern::mul_acc(static_cast<std::int64_t>(g.size()), g.data(),
                                          bv.data().data(), av.mut_grad().data());
                        }
                    }
                    if (bv.requires_grad()) {
                        if (broadcast && !row_is_a) {
                            auto tg = bv.mut_grad();
                            auto od2 = av.data();
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c)
                                    tg[c] += g[r * cols + c] * od2[r * cols + c];
                        } else if (broadcast) {
                            auto tg = bv.mut_grad();
                            auto rd = av.data();
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c)
                                    tg[r * cols + c] += g[r * cols + c] * rd[c];
                        } else {
                            kern::mul_acc(static_cast<std::int64_t>(g.size()), g.data(),
                                          av.data().data(), bv.mut_grad().data());
                        }
                    }
                    break;
                }
            }
        });
    }
    return out;
}

std::vector<double> transposed(const Tensor& t) {
    std::vector<double> out(t.numel());
    kern::transpose(static_cast<std::int64_t>(t.rows()),
                    static_cast<std::int64_t>(t.cols()), t.data().data(), out.data());
    return out;
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
        throw DimError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::zeros({m, n}, any_grad(a, b));
    kern::matmul(static_cast<std::int64_t>(m), static_cast<std::int64_t>(k),
                 static_cast<std::int64_t>(n), a.data().data(), b.data().data(),
                 out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor av = a, bv = b, ov = out;
        tape.record(out, [av, bv, ov, m, k, n]() mutable {
            auto g = ov.grad();
            if (av.requires_grad()) {
                // dA += g . B^T
                std::vector<double> bt = transposed(bv);
                kern::matmul(static_cast<std::int64_t>(m), static_cast<std::int64_t>(n),
                             static_cast<std::int64_t>(k), g.data(), bt.data(),
                             av.mut_grad().data(), true);
            }
            if (bv.requires_grad()) {
                // dB += A^T . g
                std::vector<double> at = transposed(av);
                kern::matmul(static_cast<std::int64_t>(k), static_cast<std::int64_t>(m),
                             static_cast<std::int64_t>(n), at.data(), g.data(),
                             bv.mut_grad().data(), true);
            }
        });
    }
    return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    return binary_op(tape, a, b, BinKind::Add, "add");
}
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    return binary_op(tape, a, b, BinKind::Sub, "sub");
}
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    return binary_op(tape, a, b, BinKind::Mul, "mul");
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    kern::scale(static_cast<std::int64_t>(a.numel()), a.data().data(), c,
                out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor av = a, ov = out;
        tape.record(out, [av, ov, c]() mutable {
            kern::axpy(static_cast<std::int64_t>(av.numel()), c, ov.grad().data(),
                       av.mut_grad().data());
        });
    }
    return out;
}

Tensor neg(Tape& tape, const Tensor& a) { return scale(tape, a, -1.0); }

Tensor exp(Tape& tape, const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    kern::exp_(static_cast<std::int64_t>(a.numel()), a.data().data(),
               out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor av = a, ov = out;
        tape.record(out, [av, ov]() mutable {
            // d exp(x) = exp(x), reuse the cached output
            kern::mul_acc(static_cast<std::int64_t>(av.numel()), ov.grad().data(),
                          ov.data().data(), av.mut_grad().data());
        });
    }
    return out;
}

Tensor leaky_relu(Tape& tape, const Tensor& a, double slope) {
    if (!(slope > 0.0 && slope < 1.0))
        throw Error("leaky_relu: slope must be in (0,1)");
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    kern::leaky_relu(static_cast<std::int64_t>(a.numel()), a.data().data(), slope,
                     out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor av = a, ov = out;
        tape.record(out, [av, ov, slope]() mutable {
            auto g = ov.grad();
            auto x = av.data();
            auto tg = av.mut_grad();
            for (std::size_t i = 0; i < x.size(); ++i)
                tg[i] += (x[i] >= 0.0 ? 1.0 : slope) * g[i];
        });
    }
    return out;
}

Tensor elu(Tape& tape, const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    kern::elu(static_cast<std::int64_t>(a.numel()), a.data().data(),
              out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor av = a, ov = out;
        tape.record(out, [av, ov]() mutable {
            auto g = ov.grad();
            auto x = av.data();
            auto y = ov.data();
            auto tg = av.mut_grad();
            for (std::size_t i = 0; i < x.size(); ++i)
                tg[i] += (x[i] >= 0.0 ? 1.0 : y[i] + 1.0) * g[i];
        });
    }
    return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& a) {
    const std::size_t rows = a.rows(), cols = a.cols();
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    kern::softmax_rows(static_cast<std::int64_t>(rows), static_cast<std::int64_t>(cols),
                       a.data().data(), out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor av = a, ov = out;
        tape.record(out, [av, ov, rows, cols]() mutable {
            auto g = ov.grad();
            auto s = ov.data();
            auto tg = av.mut_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c)
                    dot += g[r * cols + c] * s[r * cols + c];
                for (std::size_t c = 0; c < cols; ++c)
                    tg[r * cols + c] += s[r * cols + c] * (g[r * cols + c] - dot);
            }
        });
    }
    return out;
}

Tensor segment_mean(Tape& tape, const Tensor& h, const std::vector<std::int64_t>& segments,
                    std::size_t num_segments) {
    if (segments.size() != h.rows())
        throw DimError("segment_mean: segment list length " +
                       std::to_string(segments.size()) + " != rows " +
                       std::to_string(h.rows()));
    std::vector<std::int64_t> counts(num_segments, 0);
    for (std::int64_t s : segments) {
        if (s < 0 || static_cast<std::size_t>(s) >= num_segments)
            throw DimError("segment_mean: segment index " + std::to_string(s) +
                           " out of range [0," + std::to_string(num_segments) + ")");
        ++counts[static_cast<std::size_t>(s)];
    }
    for (std::size_t s = 0; s < num_segments; ++s)
        if (counts[s] == 0)
            throw DataError("segment_mean: empty segment " + std::to_string(s));

    const std::size_t d = h.cols();
    Tensor out = Tensor::zeros({num_segments, d}, h.requires_grad());
    auto od = out.mut_data();
    auto hd = h.data();
    for (std::size_t r = 0; r < segments.size(); ++r) {
        const std::size_t s = static_cast<std::size_t>(segments[r]);
        for (std::size_t c = 0; c < d; ++c) od[s * d + c] += hd[r * d + c];
    }
    for (std::size_t s = 0; s < num_segments; ++s) {
        const double inv = 1.0 / static_cast<double>(counts[s]);
        for (std::size_t c = 0; c < d; ++c) od[s * d + c] *= inv;
    }

    if (tape.recording() && out.requires_grad()) {
        Tensor hv = h, ov = out;
        tape.record(out, [hv, ov, segments, counts, d]() mutable {
            auto g = ov.grad();
            auto tg = hv.mut_grad();
            for (std::size_t r = 0; r < segments.size(); ++r) {
                const std::size_t s = static_cast<std::size_t>(segments[r]);
                const double inv = 1.0 / static_cast<double>(counts[s]);
                for (std::size_t c = 0; c < d; ++c) tg[r * d + c] += inv * g[s * d + c];
            }
        });
    }
    return out;
}

Tensor segment_sum_sorted(Tape& tape, const Tensor& x,
                          const std::vector<std::int64_t>& segments,
                          std::size_t num_segments) {
    const std::size_t d = x.cols();
    auto offsets = kern::segment_offsets(segments, static_cast<std::int64_t>(num_segments));
    Tensor out = Tensor::zeros({num_segments, d}, x.requires_grad());
    kern::segment_sum(static_cast<std::int64_t>(d), x.data().data(), offsets,
                      out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor xv = x, ov = out;
        tape.record(out, [xv, ov, segments, d]() mutable {
            auto g = ov.grad();
            auto tg = xv.mut_grad();
            for (std::size_t r = 0; r < segments.size(); ++r) {
                const std::size_t s = static_cast<std::size_t>(segments[r]);
                for (std::size_t c = 0; c < d; ++c) tg[r * d + c] += g[s * d + c];
            }
        });
    }
    return out;
}

Tensor segment_softmax_sorted(Tape& tape, const Tensor& scores,
                              const std::vector<std::int64_t>& segments,
                              std::size_t num_segments) {
    if (scores.numel() != segments.size())
        throw DimError("segment_softmax: scores length != segment list length");
    auto offsets = kern::segment_offsets(segments, static_cast<std::int64_t>(num_segments));
    Tensor out = Tensor::zeros(scores.shape(), scores.requires_grad());
    kern::segment_softmax(scores.data().data(), offsets, out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor sv = scores, ov = out;
        tape.record(out, [sv, ov, offsets]() mutable {
            auto g = ov.grad();
            auto a = ov.data();
            auto tg = sv.mut_grad();
            for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
                double dot = 0.0;
                for (std::int64_t r = offsets[s]; r < offsets[s + 1]; ++r)
                    dot += g[static_cast<std::size_t>(r)] * a[static_cast<std::size_t>(r)];
                for (std::int64_t r = offsets[s]; r < offsets[s + 1]; ++r) {
                    const auto i = static_cast<std::size_t>(r);
                    tg[i] += a[i] * (g[i] - dot);
                }
            }
        });
    }
    return out;
}

Tensor gather_rows(Tape& tape, const Tensor& x, const std::vector<std::int64_t>& idx) {
    const std::size_t d = x.cols();
    for (std::int64_t i : idx)
        if (i < 0 || static_cast<std::size_t>(i) >= x.rows())
            throw DimError("gather_rows: index " + std::to_string(i) + " out of range");
    Tensor out = Tensor::zeros({idx.size(), d}, x.requires_grad());
    kern::gather_rows(static_cast<std::int64_t>(d), x.data().data(), idx,
                      out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor xv = x, ov = out;
        tape.record(out, [xv, ov, idx, d]() mutable {
            kern::scatter_rows_acc(static_cast<std::int64_t>(d), ov.grad().data(), idx,
                                   xv.mut_grad().data());
        });
    }
    return out;
}

Tensor scale_rows(Tape& tape, const Tensor& x, const Tensor& s) {
    if (s.numel() != x.rows())
        throw DimError("scale_rows: scale length " + std::to_string(s.numel()) +
                       " != rows " + std::to_string(x.rows()));
    const std::size_t rows = x.rows(), d = x.cols();
    Tensor out = Tensor::zeros(x.shape(), any_grad(x, s));
    kern::scale_rows(static_cast<std::int64_t>(rows), static_cast<std::int64_t>(d),
                     x.data().data(), s.data().data(), out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor xv = x, sv = s, ov = out;
        tape.record(out, [xv, sv, ov, rows, d]() mutable {
            auto g = ov.grad();
            if (xv.requires_grad()) {
                auto tg = xv.mut_grad();
                auto sd = sv.data();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < d; ++c)
                        tg[r * d + c] += sd[r] * g[r * d + c];
            }
            if (sv.requires_grad()) {
                auto tg = sv.mut_grad();
                auto xd = xv.data();
                for (std::size_t r = 0; r < rows; ++r) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < d; ++c)
                        acc += xd[r * d + c] * g[r * d + c];
                    tg[r] += acc;
                }
            }
        });
    }
    return out;
}

Tensor pairwise_distance(Tape& tape, const Tensor& z, const Tensor& protos) {
    if (z.cols() != protos.cols())
        throw DimError("pairwise_distance: feature dims differ, " +
                       shape_str(z.shape()) + " vs " + shape_str(protos.shape()));
    const std::size_t B = z.rows(), P = protos.rows(), d = z.cols();
    Tensor out = Tensor::zeros({B, P}, any_grad(z, protos));
    kern::pairwise_dist(static_cast<std::int64_t>(B), static_cast<std::int64_t>(P),
                        static_cast<std::int64_t>(d), z.data().data(),
                        protos.data().data(), out.mut_data().data());
    if (tape.recording() && out.requires_grad()) {
        Tensor zv = z, pv = protos, ov = out;
        tape.record(out, [zv, pv, ov, B, P, d]() mutable {
            // dD/dz_b = (z_b - p) / D; distance zero gets a clamped denominator
            constexpr double kEps = 1e-12;
            auto g = ov.grad();
            auto D = ov.data();
            auto zd = zv.data();
            auto pd = pv.data();
            if (zv.requires_grad()) {
                auto tg = zv.mut_grad();
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t p = 0; p < P; ++p) {
                        const double w =
                            g[b * P + p] / (D[b * P + p] > kEps ? D[b * P + p] : kEps);
                        if (w == 0.0) continue;
                        for (std::size_t c = 0; c < d; ++c)
                            tg[b * d + c] += w * (zd[b * d + c] - pd[p * d + c]);
                    }
            }
            if (pv.requires_grad()) {
                auto tg = pv.mut_grad();
                for (std::size_t p = 0; p < P; ++p)
                    for (std::size_t b = 0; b < B; ++b) {
                        const double w =
                            g[b * P + p] / (D[b * P + p] > kEps ? D[b * P + p] : kEps);
                        if (w == 0.0) continue;
                        for (std::size_t c = 0; c < d; ++c)
                            tg[p * d + c] -= w * (zd[b * d + c] - pd[p * d + c]);
                    }
            }
        });
    }
    return out;
}

Tensor avg_col_groups(Tape& tape, const Tensor& x, std::size_t group_size) {
    if (group_size == 0 || x.cols() % group_size != 0)
        throw DimError("avg_col_groups: cols " + std::to_string(x.cols()) +
                       " not divisible by group size " + std::to_string(group_size));
    const std::size_t rows = x.rows(), groups = x.cols() / group_size, cols = x.cols();
    Tensor out = Tensor::zeros({rows, groups}, x.requires_grad());
    auto od = out.mut_data();
    auto xd = x.data();
    const double inv = 1.0 / static_cast<double>(group_size);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t g = 0; g < groups; ++g) {
            double acc = 0.0;
            for (std::size_t k = 0; k < group_size; ++k)
                acc += xd[r * cols + g * group_size + k];
            od[r * groups + g] = acc * inv;
        }
    if (tape.recording() && out.requires_grad()) {
        Tensor xv = x, ov = out;
        tape.record(out, [xv, ov, rows, groups, group_size, cols, inv]() mutable {
            auto g = ov.grad();
            auto tg = xv.mut_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t gi = 0; gi < groups; ++gi) {
                    const double gv = g[r * groups + gi] * inv;
                    for (std::size_t k = 0; k < group_size; ++k)
                        tg[r * cols + gi * group_size + k] += gv;
                }
        });
    }
    return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
    Tensor out = Tensor::zeros({1}, a.requires_grad());
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    out.mut_data()[0] = acc;
    if (tape.recording() && out.requires_grad()) {
        Tensor av = a, ov = out;
        tape.record(out, [av, ov]() mutable {
            const double g = ov.grad()[0];
            auto tg = av.mut_grad();
            for (double& v : tg) v += g;
        });
    }
    return out;
}

Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target) {
    check_same_shape("mse_loss", pred, target);
    const std::size_t n = pred.numel();
    Tensor out = Tensor::zeros({1}, any_grad(pred, target));
    double acc = 0.0;
    auto pd = pred.data();
    auto td = target.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pd[i] - td[i];
        acc += d * d;
    }
    out.mut_data()[0] = acc / static_cast<double>(n);
    if (tape.recording() && out.requires_grad()) {
        Tensor pv = pred, tv = target, ov = out;
        tape.record(out, [pv, tv, ov, n]() mutable {
            const double g = ov.grad()[0] * 2.0 / static_cast<double>(n);
            auto pd2 = pv.data();
            auto td2 = tv.data();
            if (pv.requires_grad()) {
                auto tg = pv.mut_grad();
                for (std::size_t i = 0; i < n; ++i) tg[i] += g * (pd2[i] - td2[i]);
            }
            if (tv.requires_grad()) {
                auto tg = tv.mut_grad();
                for (std::size_t i = 0; i < n; ++i) tg[i] -= g * (pd2[i] - td2[i]);
            }
        });
    }
    return out;
}

Tensor nll_from_probs(Tape& tape, const Tensor& probs, const std::vector<int>& labels) {
    constexpr double kClamp = 1e-30;
    const std::size_t B = probs.rows(), C = probs.cols();
    if (labels.size() != B)
        throw DimError("nll_from_probs: batch " + std::to_string(B) + " vs labels " +
                       std::to_string(labels.size()));
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw DimError("nll_from_probs: label " + std::to_string(y) +
                           " out of range [0," + std::to_string(C) + ")");
    Tensor out = Tensor::zeros({1}, probs.requires_grad());
    auto pd = probs.data();
    double acc = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        double p = pd[b * C + static_cast<std::size_t>(labels[b])];
        if (p < kClamp) {
            p = kClamp;
            g_nll_clamps.fetch_add(1, std::memory_order_relaxed);
        }
        acc -= std::log(p);
    }
    out.mut_data()[0] = acc / static_cast<double>(B);
    if (tape.recording() && out.requires_grad()) {
        Tensor pv = probs, ov = out;
        tape.record(out, [pv, ov, labels, B, C]() mutable {
            const double g = ov.grad()[0] / static_cast<double>(B);
            auto pd2 = pv.data();
            auto tg = pv.mut_grad();
            for (std::size_t b = 0; b < B; ++b) {
                const std::size_t i = b * C + static_cast<std::size_t>(labels[b]);
                const double p = pd2[i] < kClamp ? kClamp : pd2[i];
                tg[i] -= g / p;
            }
        });
    }
    return out;
}

std::uint64_t nll_clamp_count() { return g_nll_clamps.load(); }
void reset_nll_clamp_count() { g_nll_clamps.store(0); }

}  // namespace protoflow::num
