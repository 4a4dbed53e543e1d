// Adam optimizer with bias correction.

#pragma once

#include "ferroscope/network.hpp"

namespace ferroscope::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
  public:
    explicit Adam(Network& net, AdamConfig cfg = {}) : cfg_(cfg) {
        for (auto& ref : net.param_refs()) {
            names_.push_back(ref.name);
            m_.emplace_back(ref.value->shape);
            v_.emplace_back(ref.value->shape);
        }
    }

    // One update from the gradients currently stored in the network.
    void step(Network& net) {
        auto refs = net.param_refs();
        if (refs.size() != m_.size()) throw StateError("adam: optimizer does not match network");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (std::size_t p = 0; p < refs.size(); ++p) {
            auto& value = refs[p].value->data;
            auto& grad = refs[p].grad->data;
            auto& m = m_[p].data;
            auto& v = v_[p].data;
            for (std::size_t i = 0; i < value.size(); ++i) {
                const float g = grad[i];
                if (!std::isfinite(g))
                    throw NumericError("adam: non-finite gradient in parameter '" + names_[p] + "'");
                m[i] = float(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g);
                v[i] = float(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * double(g) * double(g));
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                value[i] = float(value[i] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
            }
        }
    }

    std::uint64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<std::string> names_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace ferroscope::nn
