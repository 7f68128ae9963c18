#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lfs/tape.hpp"

namespace lfs::numgrad {

// Adam over a named subset of a ParamStore's parameters.
class Adam {
public:
    Adam(ParamStore* store, std::vector<std::string> names, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : store_(store), names_(std::move(names)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& name : names_) {
            m_.push_back(Array::zeros(store_->value(name).shape));
            v_.push_back(Array::zeros(store_->value(name).shape));
        }
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    const std::vector<std::string>& names() const { return names_; }

    // one step from the gradients currently held in the store
    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t p = 0; p < names_.size(); ++p) {
            Array& w = store_->value(names_[p]);
            const Array& g = store_->grad(names_[p]);
            Array& m = m_[p];
            Array& v = v_[p];
            for (size_t i = 0; i < w.data.size(); ++i) {
                const double gi = g.data[i];
                m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * gi;
                v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * gi * gi;
                const double mhat = m.data[i] / bc1;
                const double vhat = v.data[i] / bc2;
                w.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    ParamStore* store_;
    std::vector<std::string> names_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Array> m_, v_;
};

// theta_bar <- (1-eta) * theta_bar + eta * theta, elementwise over name pairs
inline void ema_update_params(ParamStore& store, const std::vector<std::pair<std::string, std::string>>& target_online,
                              double eta) {
    require(eta > 0.0 && eta <= 1.0, "EMA momentum must be in (0,1], got ", eta);
    for (const auto& [tgt, online] : target_online) {
        Array& t = store.value(tgt);
        const Array& o = store.value(online);
        require(t.same_shape(o), "EMA shape mismatch between '", tgt, "' ", shape_str(t.shape), " and '", online,
                "' ", shape_str(o.shape));
        for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = (1.0 - eta) * t.data[i] + eta * o.data[i];
    }
}

}  // namespace lfs::numgrad
