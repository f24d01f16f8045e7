#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "protoflow/kernels.hpp"
#include "protoflow/rng.hpp"
#include "protoflow/threading.hpp"

using namespace protoflow;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

struct ThreadGuard {
    ~ThreadGuard() { set_threads(1); }
};

}  // namespace

TEST_CASE("omp kernels match the serial reference") {
    ThreadGuard guard;
    Rng rng(23);
    const std::int64_t m = 37, k = 19, n = 29;
    auto a = random_vec(static_cast<std::size_t>(m * k), rng);
    auto b = random_vec(static_cast<std::size_t>(k * n), rng);
    std::vector<double> c(static_cast<std::size_t>(m * n)), c_ref(c.size());

    kern::ref::matmul(m, k, n, a.data(), b.data(), c_ref.data());
    for (int threads : {1, 3}) {
        set_threads(threads);
        kern::matmul(m, k, n, a.data(), b.data(), c.data());
        CHECK(max_rel(c, c_ref) < 1e-13);
    }

    std::vector<double> t1(a.size()), t2(a.size());
    kern::ref::transpose(m, k, a.data(), t1.data());
    kern::transpose(m, k, a.data(), t2.data());
    CHECK(t1 == t2);

    auto s = random_vec(static_cast<std::size_t>(m * n), rng);
    std::vector<double> sm(s.size()), sm_ref(s.size());
    kern::ref::softmax_rows(m, n, s.data(), sm_ref.data());
    set_threads(3);
    kern::softmax_rows(m, n, s.data(), sm.data());
    CHECK(max_rel(sm, sm_ref) < 1e-13);

    // sorted segments over 11 groups
    std::vector<std::int64_t> seg(64);
    for (auto& x : seg) x = static_cast<std::int64_t>(rng.index(11));
    std::sort(seg.begin(), seg.end());
    auto offsets = kern::segment_offsets(seg, 11);
    auto x = random_vec(seg.size() * 5, rng);
    std::vector<double> out(11 * 5), out_ref(out.size());
    kern::ref::segment_sum(5, x.data(), offsets, out_ref.data());
    kern::segment_sum(5, x.data(), offsets, out.data());
    CHECK(max_rel(out, out_ref) < 1e-13);

    auto z = random_vec(12 * 7, rng);
    auto p = random_vec(9 * 7, rng);
    std::vector<double> d(12 * 9), d_ref(d.size());
    kern::ref::pairwise_dist(12, 9, 7, z.data(), p.data(), d_ref.data());
    kern::pairwise_dist(12, 9, 7, z.data(), p.data(), d.data());
    CHECK(max_rel(d, d_ref) < 1e-13);
}

TEST_CASE("kernel results are bit-identical across thread counts") {
    ThreadGuard guard;
    Rng rng(31);
    const std::int64_t m = 53, k = 41, n = 47;
    auto a = random_vec(static_cast<std::size_t>(m * k), rng);
    auto b = random_vec(static_cast<std::size_t>(k * n), rng);

    auto run = [&](int threads) {
        set_threads(threads);
        std::vector<double> c(static_cast<std::size_t>(m * n));
        kern::matmul(m, k, n, a.data(), b.data(), c.data());
        return c;
    };
    const auto c1 = run(1);
    CHECK(run(2) == c1);
    CHECK(run(4) == c1);

    std::vector<std::int64_t> seg(128);
    for (auto& x : seg) x = static_cast<std::int64_t>(rng.index(17));
    std::sort(seg.begin(), seg.end());
    auto offsets = kern::segment_offsets(seg, 17);
    auto x = random_vec(seg.size() * 6, rng);
    auto run_seg = [&](int threads) {
        set_threads(threads);
        std::vector<double> out(17 * 6);
        kern::segment_sum(6, x.data(), offsets, out.data());
        return out;
    };
    const auto s1 = run_seg(1);
    CHECK(run_seg(4) == s1);
}

TEST_CASE("segment_offsets covers empty segments") {
    std::vector<std::int64_t> seg = {1, 1, 3};
    auto offsets = kern::segment_offsets(seg, 5);
    REQUIRE(offsets.size() == 6);
    CHECK(offsets[0] == 0);
    CHECK(offsets[1] == 0);
    CHECK(offsets[2] == 2);
    CHECK(offsets[3] == 2);
    CHECK(offsets[4] == 3);
    CHECK(offsets[5] == 3);
}
