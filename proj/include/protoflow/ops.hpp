#pragma once

#include <cstdint>
#include <vector>

#include "protoflow/tensor.hpp"

// Differentiable tensor operations. Each op computes its forward result and,
// when the tape is recording and the result needs a gradient, records a
// backward rule closing over the involved tensors.

namespace protoflow::num {

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// binary elementwise; shapes must match, or one operand may be a row vector
// ([1 x n] or [n]) broadcast across the rows of the other
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor scale(Tape& tape, const Tensor& a, double c);
Tensor neg(Tape& tape, const Tensor& a);
Tensor exp(Tape& tape, const Tensor& a);
Tensor leaky_relu(Tape& tape, const Tensor& a, double slope);
Tensor elu(Tape& tape, const Tensor& a);

Tensor softmax_rows(Tape& tape, const Tensor& a);

// row i of the result is the mean of the rows of h whose segment id is i;
// every segment in [0, num_segments) must be non-empty
Tensor segment_mean(Tape& tape, const Tensor& h, const std::vector<std::int64_t>& segments,
                    std::size_t num_segments);

// segments must be sorted non-decreasing (callers sort edges by destination)
Tensor segment_sum_sorted(Tape& tape, const Tensor& x,
                          const std::vector<std::int64_t>& segments,
                          std::size_t num_segments);
Tensor segment_softmax_sorted(Tape& tape, const Tensor& scores,
                              const std::vector<std::int64_t>& segments,
                              std::size_t num_segments);

Tensor gather_rows(Tape& tape, const Tensor& x, const std::vector<std::int64_t>& idx);
Tensor scale_rows(Tape& tape, const Tensor& x, const Tensor& s);

// D[b, p] = Euclidean distance between row b of z and row p of protos
Tensor pairwise_distance(Tape& tape, const Tensor& z, const Tensor& protos);

// y[b, c] = mean over the group of group_size adjacent columns: the Eq-style
// per-class average of softmaxed distance mass
Tensor avg_col_groups(Tape& tape, const Tensor& x, std::size_t group_size);

Tensor sum(Tape& tape, const Tensor& a);
Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target);

// mean negative log of probs[b, labels[b]]; probabilities are clamped at
// 1e-30 and each clamp bumps nll_clamp_count()
Tensor nll_from_probs(Tape& tape, const Tensor& probs, const std::vector<int>& labels);

std::uint64_t nll_clamp_count();
void reset_nll_clamp_count();

}  // namespace protoflow::num
