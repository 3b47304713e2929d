#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>

#include "tall/error.hpp"
#include "tall/tensor.hpp"

namespace tall {

/// Linear warm-up from 0 to base_lr, then cosine decay to 0 at total_steps.
inline double lr_schedule(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double base_lr) {
    if (step > total_steps)
        throw ConfigError("lr_schedule: step " + std::to_string(step) + " beyond total " + std::to_string(total_steps));
    if (step < warmup_steps) return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    if (total_steps == warmup_steps) return base_lr;
    const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
    return std::max(0.0, base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <Scalar T>
struct AdamState {
    std::map<std::string, Tensor<T>> m, v;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update in place. Throws NumericalError naming the
/// first parameter with a non-finite gradient, before anything is modified.
template <Scalar T>
void adam_step(std::map<std::string, Tensor<T>>& params, const std::map<std::string, Tensor<T>>& grads,
               AdamState<T>& state, double lr, const AdamConfig& cfg = {}) {
    for (const auto& [name, p] : params) {
        auto it = grads.find(name);
        if (it == grads.end()) throw ConfigError("adam_step: no gradient for parameter " + name);
        if (it->second.shape() != p.shape()) throw ShapeError("adam_step " + name, p.shape(), it->second.shape());
        for (T g : it->second.data())
            if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient in parameter " + name);
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        const auto& g = grads.at(name);
        auto [mi, m_new] = state.m.try_emplace(name, p.shape());
        auto [vi, v_new] = state.v.try_emplace(name, p.shape());
        auto& m = mi->second;
        auto& v = vi->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            const double mn = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            const double vn = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            m[i] = static_cast<T>(mn);
            v[i] = static_cast<T>(vn);
            p[i] = static_cast<T>(p[i] - lr * (mn / bc1) / (std::sqrt(vn / bc2) + cfg.eps));
        }
    }
}

}  // namespace tall
