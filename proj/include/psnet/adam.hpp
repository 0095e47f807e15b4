#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "psnet/tensor.hpp"

namespace psnet {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam update for one parameter tensor. m and v are the running first and
// second moment estimates, t the 1-based step count after this update.
template <class S>
void adam_update(std::vector<S>& param, const std::vector<S>& grad, std::vector<S>& m, std::vector<S>& v,
                 std::int64_t t, const AdamConfig& cfg) {
    if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size()) {
        throw std::invalid_argument("adam_update: parameter, gradient and moment sizes disagree");
    }
    const S b1 = static_cast<S>(cfg.beta1);
    const S b2 = static_cast<S>(cfg.beta2);
    const S corr1 = S(1) - static_cast<S>(std::pow(cfg.beta1, static_cast<double>(t)));
    const S corr2 = S(1) - static_cast<S>(std::pow(cfg.beta2, static_cast<double>(t)));
    const S lr = static_cast<S>(cfg.lr);
    const S eps = static_cast<S>(cfg.eps);
    for (std::size_t i = 0; i < param.size(); ++i) {
        const S g = grad[i];
        m[i] = b1 * m[i] + (S(1) - b1) * g;
        v[i] = b2 * v[i] + (S(1) - b2) * g * g;
        const S m_hat = m[i] / corr1;
        const S v_hat = v[i] / corr2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

// Owns moment state for a fixed list of parameter tensors. step() consumes the
// gradients currently stored on the tensors; callers zero them afterwards.
template <class S>
class AdamT {
  public:
    AdamT(std::vector<TensorPtrT<S>> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.emplace_back(p->data.size(), S(0));
            v_.emplace_back(p->data.size(), S(0));
        }
    }

    void step() {
        ++t_;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            if (p.grad.empty()) {
                p.ensure_grad();
            }
            adam_update(p.data, p.grad, m_[i], v_[i], t_, cfg_);
        }
    }

    std::int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    std::vector<TensorPtrT<S>> params_;
    AdamConfig cfg_;
    std::vector<std::vector<S>> m_;
    std::vector<std::vector<S>> v_;
    std::int64_t t_ = 0;
};

using Adam = AdamT<float>;

}  // namespace psnet
