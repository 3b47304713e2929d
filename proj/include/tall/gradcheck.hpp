#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "tall/ops.hpp"

namespace tall {

/// Bound parameters, keyed by name, as seen by a loss closure.
using ParamVars = std::map<std::string, Var<double>>;

/// Scalar loss built on the given tape from the bound parameters.
using LossFn = std::function<Var<double>(Tape<double>&, const ParamVars&)>;

struct ParamGradError {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coordinates = 0;
};

struct GradReport {
    std::vector<ParamGradError> params;
    double eps = 0.0;
    std::size_t coordinates_sampled = 0;

    double max_rel_error() const {
        double m = 0.0;
        for (const auto& p : params) m = std::max(m, p.max_rel_error);
        return m;
    }
};

inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

inline double eval_loss(const LossFn& loss_fn, const std::map<std::string, Tensor<double>>& params) {
    Tape<double> tape;
    ParamVars vars;
    for (const auto& [name, value] : params) vars.emplace(name, tape.param(name, value));
    auto out = loss_fn(tape, vars);
    if (out.value().size() != 1) throw UsageError("grad_check: loss must be scalar");
    return out.value()[0];
}

}  // namespace detail

/// Compares tape gradients against central differences (f(x+eps) - f(x-eps)) / 2eps
/// on coordinates sampled uniformly without replacement from each parameter.
inline GradReport grad_check(const LossFn& loss_fn, std::map<std::string, Tensor<double>> params,
                             double eps = 1e-5, std::size_t samples_per_param = 50, std::uint64_t seed = 0) {
    std::map<std::string, Tensor<double>> analytic;
    {
        Tape<double> tape;
        ParamVars vars;
        for (const auto& [name, value] : params) vars.emplace(name, tape.param(name, value));
        auto out = loss_fn(tape, vars);
        if (out.value().size() != 1) throw UsageError("grad_check: loss must be scalar");
        if (!std::isfinite(out.value()[0])) throw NumericalError("grad_check: non-finite loss at base point");
        tape.backward(out);
        analytic = tape.param_grads();
    }

    GradReport report;
    report.eps = eps;
    Rng rng(seed);
    for (auto& [name, tensor] : params) {
        std::vector<std::size_t> coords(tensor.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (coords.size() > samples_per_param) {
            for (std::size_t i = 0; i < samples_per_param; ++i) {
                const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                        static_cast<std::int64_t>(coords.size() - 1)));
                std::swap(coords[i], coords[j]);
            }
            coords.resize(samples_per_param);
        }
        ParamGradError pe;
        pe.name = name;
        pe.coordinates = coords.size();
        for (auto idx : coords) {
            const double orig = tensor[idx];
            tensor[idx] = orig + eps;
            const double fp = detail::eval_loss(loss_fn, params);
            tensor[idx] = orig - eps;
            const double fm = detail::eval_loss(loss_fn, params);
            tensor[idx] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericalError("grad_check: non-finite loss perturbing " + name + "[" +
                                     std::to_string(idx) + "]");
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic.at(name)[idx];
            const double err = relative_error(a, numeric);
            if (err >= pe.max_rel_error) {
                pe.max_rel_error = err;
                pe.worst_index = idx;
                pe.analytic = a;
                pe.numeric = numeric;
            }
        }
        report.coordinates_sampled += coords.size();
        report.params.push_back(pe);
    }
    return report;
}

}  // namespace tall
