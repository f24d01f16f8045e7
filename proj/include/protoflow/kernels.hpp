#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Dense numeric kernels. The kern:: entry points carry OpenMP pragmas and
// honor protoflow::threads(); kern::ref:: holds the naive serial versions
// kept as the correctness reference for tests and the kernel benchmark.
//
// Every kernel fixes the accumulation order per output element, so results
// do not depend on the thread count.

namespace protoflow::kern {

using std::int64_t;

// c[m x n] = a[m x k] * b[k x n]; accumulates into c when acc is true
void matmul(int64_t m, int64_t k, int64_t n, const double* a, const double* b,
            double* c, bool acc = false);

// dst[cols x rows] = src[rows x cols]^T
void transpose(int64_t rows, int64_t cols, const double* src, double* dst);

void add(int64_t n, const double* a, const double* b, double* out);
void sub(int64_t n, const double* a, const double* b, double* out);
void mul(int64_t n, const double* a, const double* b, double* out);
void scale(int64_t n, const double* a, double c, double* out);
void exp_(int64_t n, const double* a, double* out);
void leaky_relu(int64_t n, const double* a, double slope, double* out);
void elu(int64_t n, const double* a, double* out);

// out[i] += a[i] * b[i]  (used by elementwise backward rules)
void mul_acc(int64_t n, const double* a, const double* b, double* out);
// out[i] += c * a[i]
void axpy(int64_t n, double c, const double* a, double* out);

// row-wise softmax with max subtraction; a and out are [rows x cols]
void softmax_rows(int64_t rows, int64_t cols, const double* a, double* out);

// offsets[s]..offsets[s+1] delimit segment s in a sorted segment-id array
std::vector<int64_t> segment_offsets(const std::vector<int64_t>& sorted_seg,
                                     int64_t num_segments);

// out[s] = sum of rows of x whose (sorted) segment is s
void segment_sum(int64_t d, const double* x, const std::vector<int64_t>& offsets,
                 double* out, bool acc = false);
// out[s] = mean of rows; every segment must be non-empty
void segment_mean(int64_t d, const double* x, const std::vector<int64_t>& offsets,
                  double* out);
// per-segment softmax over a column of scores (d == 1 layout)
void segment_softmax(const double* scores, const std::vector<int64_t>& offsets,
                     double* out);

// out[r x d]: out[i] = x[idx[i]]; scatter_rows_acc is its transpose (serial:
// indices may repeat)
void gather_rows(int64_t d, const double* x, const std::vector<int64_t>& idx,
                 double* out);
void scatter_rows_acc(int64_t d, const double* g, const std::vector<int64_t>& idx,
                      double* out);

// rows of x scaled by s: out[i, :] = x[i, :] * s[i]
void scale_rows(int64_t rows, int64_t d, const double* x, const double* s,
                double* out);

// D[b, p] = || z[b] - proto[p] ||_2
void pairwise_dist(int64_t b, int64_t p, int64_t d, const double* z,
                   const double* proto, double* out);

namespace ref {
void matmul(int64_t m, int64_t k, int64_t n, const double* a, const double* b,
            double* c, bool acc = false);
void transpose(int64_t rows, int64_t cols, const double* src, double* dst);
void softmax_rows(int64_t rows, int64_t cols, const double* a, double* out);
void segment_sum(int64_t d, const double* x, const std::vector<int64_t>& offsets,
                 double* out, bool acc = false);
void pairwise_dist(int64_t b, int64_t p, int64_t d, const double* z,
                   const double* proto, double* out);
}  // namespace ref

}  // namespace protoflow::kern
