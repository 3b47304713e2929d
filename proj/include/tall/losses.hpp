#pragma once

// Semantic-consistency (adjacent-frame MSE) loss, cross-entropy and their
// weighted sum, both as plain functions and as tape expressions.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tall/error.hpp"
#include "tall/ops.hpp"

namespace tall {

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kDefaultAlpha = 0.5;

struct ScResult {
    double sc = 0.0;
    std::vector<double> pair_mse;  // entry t-1 compares frame t with frame t-1
};

/// L_sc over T frame feature vectors of equal length.
inline ScResult sc_loss(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2) throw ConfigError("sc_loss needs at least 2 frames, got " + std::to_string(features.size()));
    const std::size_t n = features.front().size();
    if (n == 0) throw ConfigError("sc_loss: empty feature vectors");
    ScResult r;
    for (std::size_t t = 1; t < features.size(); ++t) {
        if (features[t].size() != n) throw ShapeError("sc_loss", Shape{n}, Shape{features[t].size()});
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = features[t][i] - features[t - 1][i];
            s += d * d;
        }
        r.pair_mse.push_back(s / static_cast<double>(n));
    }
    double total = 0.0;
    for (double m : r.pair_mse) total += m;
    r.sc = total / static_cast<double>(r.pair_mse.size());
    return r;
}

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// Binary cross-entropy, mean over the batch. Labels must be 0 or 1.
inline double ce_loss(std::span<const double> probs, std::span<const int> labels) {
    if (probs.size() != labels.size()) throw ShapeError("ce_loss", Shape{probs.size()}, Shape{labels.size()});
    if (probs.empty()) throw ConfigError("ce_loss: empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw ConfigError("ce_loss: label " + std::to_string(labels[i]) + " outside {0,1}");
        const double p = clamp_prob(probs[i]);
        s += labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return -s / static_cast<double>(probs.size());
}

/// Softmax cross-entropy over K classes, mean over the batch.
/// `probs` is row-major [n, K].
inline double ce_loss_multiclass(std::span<const double> probs, std::span<const int> labels, std::size_t k) {
    if (k == 0 || probs.size() != labels.size() * k) throw ShapeError("ce_loss_multiclass", Shape{probs.size()}, Shape{labels.size(), k});
    if (labels.empty()) throw ConfigError("ce_loss: empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
            throw ConfigError("ce_loss: label " + std::to_string(labels[i]) + " outside 0.." + std::to_string(k - 1));
        s += std::log(clamp_prob(probs[i * k + static_cast<std::size_t>(labels[i])]));
    }
    return -s / static_cast<double>(labels.size());
}

inline double total_loss(double ce, double sc, double alpha = kDefaultAlpha) {
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
    return ce + alpha * sc;
}

struct LossReport {
    double ce = 0.0;
    double sc = 0.0;
    double alpha = kDefaultAlpha;
    double total = 0.0;
    std::vector<double> pair_mse;

    static LossReport make(double ce, const ScResult& sc, double alpha) {
        return LossReport{ce, sc.sc, alpha, total_loss(ce, sc.sc, alpha), sc.pair_mse};
    }
};

// Tape versions.

/// Adjacent-frame MSE averaged over pairs; `features` is [T, N] with T >= 2.
template <Scalar T>
Var<T> sc_loss(Var<T> features) {
    const Shape& s = features.shape();
    if (s.size() != 2 || s[0] < 2)
        throw ConfigError("sc_loss needs at least 2 frames, got features of shape " + shape_str(s));
    const std::size_t t = s[0], n = s[1];
    auto later = std::make_shared<IndexMap>((t - 1) * n);
    auto earlier = std::make_shared<IndexMap>((t - 1) * n);
    for (std::size_t i = 0; i < (t - 1) * n; ++i) {
        (*later)[i] = static_cast<std::uint32_t>(i + n);
        (*earlier)[i] = static_cast<std::uint32_t>(i);
    }
    auto d = sub(gather(features, IndexMapPtr(std::move(later)), Shape{t - 1, n}),
                 gather(features, IndexMapPtr(std::move(earlier)), Shape{t - 1, n}));
    // equal pair sizes make the mean over all terms the mean of pair MSEs
    return mean(mul(d, d));
}

/// Same loss over separately computed frame feature rows, each [1, N].
template <Scalar T>
Var<T> sc_loss(const std::vector<Var<T>>& frames) {
    if (frames.size() < 2) throw ConfigError("sc_loss needs at least 2 frames, got " + std::to_string(frames.size()));
    Var<T> acc;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        auto d = sub(frames[t], frames[t - 1]);
        auto term = mean(mul(d, d));
        acc = t == 1 ? term : add(acc, term);
    }
    return scale(acc, static_cast<T>(1.0 / static_cast<double>(frames.size() - 1)));
}

/// Cross-entropy of one sample: -log clamp(softmax(logits)[label]).
template <Scalar T>
Var<T> ce_loss(Var<T> logits, std::size_t label) {
    const Shape& s = logits.shape();
    const std::size_t k = s.back();
    if (label >= k) throw ConfigError("ce_loss: label " + std::to_string(label) + " outside 0.." + std::to_string(k - 1));
    auto probs = softmax(reshape(logits, Shape{1, k}));
    auto pick = gather(probs, std::make_shared<const IndexMap>(IndexMap{static_cast<std::uint32_t>(label)}), Shape{1});
    return scale(log_clamped(pick, static_cast<T>(kProbClamp), static_cast<T>(1.0 - kProbClamp)), T{-1});
}

template <Scalar T>
Var<T> total_loss(Var<T> ce, Var<T> sc, double alpha) {
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
    return add(ce, scale(sc, static_cast<T>(alpha)));
}

}  // namespace tall
