// Times the OpenMP kernels against the serial reference and cross-checks
// their outputs. Usage: protoflow_bench [size] [reps]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "protoflow/kernels.hpp"
#include "protoflow/rng.hpp"
#include "protoflow/threading.hpp"

using namespace protoflow;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch())
        .count();
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

template <typename F>
double time_ms(int reps, F&& fn) {
    fn();  // warm-up
    const double t0 = now_ms();
    for (int r = 0; r < reps; ++r) fn();
    return (now_ms() - t0) / reps;
}

}  // namespace

int main(int argc, char** argv) {
    const std::int64_t n = argc > 1 ? std::atoll(argv[1]) : 384;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 5;

    Rng rng(7);
    std::vector<double> a(static_cast<std::size_t>(n * n)), b(a.size()), c(a.size()),
        c_ref(a.size());
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);

    std::printf("matmul %lld x %lld, %d reps\n", static_cast<long long>(n),
                static_cast<long long>(n), reps);
    const double t_ref = time_ms(reps, [&] { kern::ref::matmul(n, n, n, a.data(), b.data(), c_ref.data()); });
    std::printf("  %-18s %10.2f ms\n", "serial reference", t_ref);
    for (int threads : {1, 2, 4}) {
        set_threads(threads);
        const double t = time_ms(reps, [&] { kern::matmul(n, n, n, a.data(), b.data(), c.data()); });
        const double err = max_rel_err(c, c_ref);
        std::printf("  %-14s %2dT %10.2f ms   %6.2fx vs ref   max rel err %.2e\n",
                    "omp kernel", threads, t, t_ref / t, err);
        if (err > 1e-12) {
            std::printf("kernel/reference mismatch\n");
            return 1;
        }
    }

    // segment reduction: E edges over N nodes
    const std::int64_t edges = n * n / 4, nodes = n, d = 64;
    std::vector<std::int64_t> seg(static_cast<std::size_t>(edges));
    for (auto& s : seg) s = static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(nodes)));
    std::sort(seg.begin(), seg.end());
    std::vector<double> x(static_cast<std::size_t>(edges * d)), out(static_cast<std::size_t>(nodes * d)),
        out_ref(out.size());
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    auto offsets = kern::segment_offsets(seg, nodes);

    std::printf("segment_sum %lld edges x %lld dims\n", static_cast<long long>(edges),
                static_cast<long long>(d));
    const double s_ref = time_ms(reps, [&] { kern::ref::segment_sum(d, x.data(), offsets, out_ref.data()); });
    std::printf("  %-18s %10.2f ms\n", "serial reference", s_ref);
    for (int threads : {1, 2, 4}) {
        set_threads(threads);
        const double t = time_ms(reps, [&] { kern::segment_sum(d, x.data(), offsets, out.data()); });
        const double err = max_rel_err(out, out_ref);
        std::printf("  %-14s %2dT %10.2f ms   %6.2fx vs ref   max rel err %.2e\n",
                    "omp kernel", threads, t, s_ref / t, err);
        if (err > 1e-12) {
            std::printf("kernel/reference mismatch\n");
            return 1;
        }
    }

    // pairwise distances, the fine-tuning hot spot
    const std::int64_t bsz = 256, protos = 57, dz = 64;
    std::vector<double> z(static_cast<std::size_t>(bsz * dz)), p(static_cast<std::size_t>(protos * dz)),
        dmat(static_cast<std::size_t>(bsz * protos)), dref(dmat.size());
    for (double& v : z) v = rng.uniform(-1.0, 1.0);
    for (double& v : p) v = rng.uniform(-1.0, 1.0);
    std::printf("pairwise_dist %lld x %lld x %lld\n", static_cast<long long>(bsz),
                static_cast<long long>(protos), static_cast<long long>(dz));
    const double p_ref = time_ms(reps, [&] { kern::ref::pairwise_dist(bsz, protos, dz, z.data(), p.data(), dref.data()); });
    std::printf("  %-18s %10.2f ms\n", "serial reference", p_ref);
    for (int threads : {1, 2, 4}) {
        set_threads(threads);
        const double t = time_ms(reps, [&] { kern::pairwise_dist(bsz, protos, dz, z.data(), p.data(), dmat.data()); });
        const double err = max_rel_err(dmat, dref);
        std::printf("  %-14s %2dT %10.2f ms   %6.2fx vs ref   max rel err %.2e\n",
                    "omp kernel", threads, t, p_ref / t, err);
        if (err > 1e-12) {
            std::printf("kernel/reference mismatch\n");
            return 1;
        }
    }
    return 0;
}
