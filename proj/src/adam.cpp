#include "protoflow/adam.hpp"

#include <cmath>

#include "protoflow/threading.hpp"

namespace protoflow::num {

AdamState::AdamState(std::vector<Tensor> params, double base_lr, double beta1,
                     double beta2, double eps, int lr_step_epochs)
    : params_(std::move(params)),
      base_lr_(base_lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      lr_step_epochs_(lr_step_epochs) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

double AdamState::effective_lr() const {
    return base_lr_ * std::pow(0.5, static_cast<double>(epoch_ / lr_step_epochs_));
}

void AdamState::step() {
    for (const Tensor& p : params_)
        if (p.grad().size() != p.numel())
            throw Error("adam_step: parameter '" +
                        (p.name().empty() ? std::string("<unnamed>") : p.name()) +
                        "' has no gradient");
    ++t_;
    const double lr = effective_lr();
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        auto x = p.mut_data();
        auto g = p.mut_grad();
        auto& m = m_[i];
        auto& v = v_[i];
        const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static) if (protoflow::threads() > 1)
        for (std::int64_t j = 0; j < n; ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            x[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
            g[j] = 0.0;
        }
    }
}

}  // namespace protoflow::num
