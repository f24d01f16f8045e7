#include "protoflow/tensor.hpp"

#include <numeric>

namespace protoflow::num {

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

namespace {
std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}
}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data.assign(shape_numel(t.impl_->shape), 0.0);
    t.impl_->requires_grad = requires_grad;
    if (requires_grad) t.impl_->grad.assign(t.impl_->data.size(), 0.0);
    return t;
}

Tensor Tensor::from(std::vector<double> data, Shape shape, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw DimError("tensor: data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    t.impl_->requires_grad = requires_grad;
    if (requires_grad) t.impl_->grad.assign(t.impl_->data.size(), 0.0);
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({v}, {1}, requires_grad);
}

std::size_t Tensor::rows() const { return impl_->shape.empty() ? 1 : impl_->shape[0]; }

std::size_t Tensor::cols() const {
    if (impl_->shape.size() >= 2) return impl_->shape[1];
    return 1;
}

double Tensor::value() const {
    if (numel() != 1)
        throw DimError("value(): tensor is not scalar, shape " + shape_str(shape()));
    return impl_->data[0];
}

void Tensor::set_requires_grad(bool v) {
    impl_->requires_grad = v;
    if (v && impl_->grad.size() != impl_->data.size())
        impl_->grad.assign(impl_->data.size(), 0.0);
    if (!v) impl_->grad.clear();
}

void Tensor::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl>(*impl_);
    return t;
}

void Tape::clear() {
    ops_.clear();
    outputs_.clear();
}

void Tape::record(const Tensor& out, std::function<void()> backward) {
    if (!recording_) return;
    outputs_.insert(out.key());
    ops_.push_back(std::move(backward));
}

bool Tape::produced(const Tensor& t) const {
    return outputs_.contains(t.key());
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw DimError("backward: loss must be scalar, got shape " +
                       shape_str(loss.shape()));
    if (!loss.requires_grad())
        throw Error("backward: loss does not require grad");
    if (!produced(loss))
        throw Error("backward: loss was not recorded on this tape");
    Tensor seed = loss;
    seed.mut_grad()[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

}  // namespace protoflow::num
