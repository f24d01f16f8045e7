#pragma once

#include <cstdint>
#include <vector>

#include "protoflow/tensor.hpp"

namespace protoflow::num {

// Adam with bias correction and a stepped learning-rate schedule: the
// effective rate is base_lr * 0.5^floor(epoch / lr_step_epochs).
class AdamState {
public:
    AdamState(std::vector<Tensor> params, double base_lr, double beta1 = 0.9,
              double beta2 = 0.999, double eps = 1e-8, int lr_step_epochs = 20);

    void set_epoch(int epoch) { epoch_ = epoch; }
    double effective_lr() const;
    std::uint64_t step_count() const { return t_; }

    // One Adam update over all managed parameters; every parameter must have
    // a gradient, and gradients are zeroed afterwards.
    void step();

    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double base_lr_, beta1_, beta2_, eps_;
    int lr_step_epochs_;
    int epoch_ = 0;
    std::uint64_t t_ = 0;
};

}  // namespace protoflow::num
