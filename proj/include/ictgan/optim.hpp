// Adam optimizer over a named parameter group.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ictgan/common.hpp"
#include "ictgan/tensor.hpp"

namespace ictgan {

template <class Real>
struct AdamConfig {
    Real learning_rate = Real(1e-4);
    Real beta1 = Real(0);
    Real beta2 = Real(0.9);
    Real eps = Real(1e-8);
};

// First/second moment buffers per parameter tensor plus the shared step count.
template <class Real>
struct AdamState {
    std::vector<std::vector<Real>> m;
    std::vector<std::vector<Real>> v;
    std::int64_t t = 0;

    void init(const std::vector<TensorPtr<Real>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p->values.size(), Real(0));
            v.emplace_back(p->values.size(), Real(0));
        }
        t = 0;
    }
};

// One bias-corrected Adam update. Reads each parameter's grad buffer; missing
// grads count as zero. NaN gradients abort with the tensor name.
template <class Real>
void adam_step(const std::vector<TensorPtr<Real>>& params, AdamState<Real>& state,
               const AdamConfig<Real>& cfg) {
    if (state.m.size() != params.size())
        throw StateError("adam_step: state does not match parameter group");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(state.t));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        if (m.size() != p.values.size())
            throw StateError("adam_step: moment shape mismatch for " + p.name);
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            const Real g = p.grad.empty() ? Real(0) : p.grad[i];
            if (!std::isfinite(static_cast<double>(g)))
                throw NumericalError("NaN/Inf gradient in parameter '" + p.name + "'");
            m[i] = cfg.beta1 * m[i] + (Real(1) - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (Real(1) - cfg.beta2) * g * g;
            const Real mhat = static_cast<Real>(m[i] / bc1);
            const Real vhat = static_cast<Real>(v[i] / bc2);
            p.values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace ictgan
