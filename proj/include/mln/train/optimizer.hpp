#pragma once

#include <cmath>
#include <vector>

#include "mln/core/tensor.hpp"
#include "mln/net/swin_unet.hpp"

namespace mln::train {

// Adaptive-moment optimizer with decoupled weight decay. Decay applies only
// to parameters flagged for it (weight matrices; never biases or
// normalization parameters).
template <typename S>
class AdamW {
public:
    AdamW(const net::ParamStore<S>& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8, double weight_decay = 1e-3)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
        m_.reserve(store.count());
        v_.reserve(store.count());
        for (size_t i = 0; i < store.count(); ++i) {
            m_.emplace_back(store.values[i].shape);
            v_.emplace_back(store.values[i].shape);
        }
    }

    // grads[i] may be empty (untouched parameter this step, e.g. the LN
    // parameters of inactive branches in round-robin mode); those receive no
    // moment update and no decay.
    void step(net::ParamStore<S>& store, const std::vector<core::Tensor<S>>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < store.count(); ++i) {
            if (grads[i].data.empty()) continue;
            auto& theta = store.values[i];
            auto& m = m_[i];
            auto& v = v_[i];
            const bool decay = store.info[i].weight_decay && weight_decay_ > 0.0;
            for (size_t j = 0; j < theta.data.size(); ++j) {
                const double g = static_cast<double>(grads[i].data[j]);
                double mj = beta1_ * static_cast<double>(m.data[j]) + (1.0 - beta1_) * g;
                double vj = beta2_ * static_cast<double>(v.data[j]) + (1.0 - beta2_) * g * g;
                m.data[j] = static_cast<S>(mj);
                v.data[j] = static_cast<S>(vj);
                double update = (mj / bc1) / (std::sqrt(vj / bc2) + eps_);
                if (decay) update += weight_decay_ * static_cast<double>(theta.data[j]);
                theta.data[j] = static_cast<S>(static_cast<double>(theta.data[j]) - lr_ * update);
            }
        }
    }

    int64_t steps_taken() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_, weight_decay_;
    int64_t t_ = 0;
    std::vector<core::Tensor<S>> m_, v_;
};

}  // namespace mln::train
