#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "protoflow/error.hpp"

namespace protoflow::num {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty unless requires_grad
    std::string name;          // set for learnable parameters
};

// Shared-handle dense tensor of 64-bit reals, row-major. Copying a Tensor
// aliases the same storage; clone() makes a deep copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(std::vector<double> data, Shape shape, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool valid() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t numel() const { return impl_->data.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const { return impl_->data; }
    std::span<double> mut_data() { return impl_->data; }
    double value() const;  // scalar convenience
    double at(std::size_t i) const { return impl_->data[i]; }
    double at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v);
    std::span<const double> grad() const { return impl_->grad; }
    std::span<double> mut_grad() { return impl_->grad; }
    void zero_grad();

    const std::string& name() const { return impl_->name; }
    void set_name(std::string n) { impl_->name = std::move(n); }

    Tensor clone() const;

    const TensorImpl* key() const { return impl_.get(); }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Records backward rules during a forward pass and replays them in strict
// reverse order. Single-writer: one tape per training step.
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    std::size_t size() const { return ops_.size(); }
    void clear();

    void record(const Tensor& out, std::function<void()> backward);
    bool produced(const Tensor& t) const;

    // Seeds d(loss)/d(loss) = 1 and replays the tape backwards. Gradients
    // accumulate: a tensor consumed twice receives both contributions.
    void backward(const Tensor& loss);

private:
    bool recording_;
    std::vector<std::function<void()>> ops_;
    std::unordered_set<const TensorImpl*> outputs_;
};

}  // namespace protoflow::num
