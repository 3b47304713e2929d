#pragma once

// Video-level scores, accuracy, ROC/AUC, multi-class reports and
// gradient-weighted saliency maps.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tall/error.hpp"
#include "tall/model.hpp"

namespace tall {

/// Mean of the per-clip fake probabilities of one video.
inline double video_score(std::span<const double> clip_probs) {
    if (clip_probs.empty()) throw ConfigError("video_score: no clip probabilities");
    double s = 0.0;
    for (double p : clip_probs) s += p;
    return s / static_cast<double>(clip_probs.size());
}

struct RocCurve {
    std::vector<double> thresholds;  // descending; a point is "score >= threshold"
    std::vector<double> fpr;         // starts at 0, ends at 1
    std::vector<double> tpr;
    double auc = 0.0;
};

namespace detail {

inline void check_binary(std::span<const double> scores, std::span<const int> labels, std::size_t& pos,
                         std::size_t& neg) {
    if (scores.size() != labels.size()) throw ShapeError("roc_auc", Shape{scores.size()}, Shape{labels.size()});
    pos = neg = 0;
    for (int l : labels) {
        if (l == 1) ++pos;
        else if (l == 0) ++neg;
        else throw ConfigError("roc_auc: label " + std::to_string(l) + " outside {0,1}");
    }
    if (pos == 0 || neg == 0) throw ConfigError("roc_auc: AUC undefined without both classes");
}

}  // namespace detail

/// ROC curve with AUC from the Mann-Whitney rank statistic (ties count 1/2).
inline RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
    std::size_t pos = 0, neg = 0;
    detail::check_binary(scores, labels, pos, neg);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie groups; sum of positive ranks gives U.
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum += mid;
        i = j;
    }
    const double p = static_cast<double>(pos), q = static_cast<double>(neg);
    RocCurve roc;
    roc.auc = (rank_sum - p * (p + 1.0) / 2.0) / (p * q);

    roc.fpr.push_back(0.0);
    roc.tpr.push_back(0.0);
    roc.thresholds.push_back(std::numeric_limits<double>::infinity());
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = n; i > 0;) {
        const double thr = scores[order[i - 1]];
        while (i > 0 && scores[order[i - 1]] == thr) {
            (labels[order[i - 1]] == 1 ? tp : fp) += 1;
            --i;
        }
        roc.thresholds.push_back(thr);
        roc.fpr.push_back(static_cast<double>(fp) / q);
        roc.tpr.push_back(static_cast<double>(tp) / p);
    }
    return roc;
}

/// Fraction correct when predicting class 1 for score >= threshold.
inline double accuracy(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
    if (scores.size() != labels.size()) throw ShapeError("accuracy", Shape{scores.size()}, Shape{labels.size()});
    if (scores.empty()) throw ConfigError("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if ((scores[i] >= threshold ? 1 : 0) == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

struct ClassMetrics {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    std::size_t support = 0;
};

struct MulticlassReport {
    std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
    std::vector<ClassMetrics> per_class;
};

inline MulticlassReport multiclass_report(std::span<const int> preds, std::span<const int> labels, std::size_t k) {
    if (preds.size() != labels.size()) throw ShapeError("multiclass_report", Shape{preds.size()}, Shape{labels.size()});
    MulticlassReport r;
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k || preds[i] < 0 ||
            static_cast<std::size_t>(preds[i]) >= k)
            throw ConfigError("multiclass_report: class id outside 0.." + std::to_string(k - 1));
        ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t tp = r.confusion[c][c], predicted = 0, actual = 0;
        for (std::size_t o = 0; o < k; ++o) {
            predicted += r.confusion[o][c];
            actual += r.confusion[c][o];
        }
        ClassMetrics m;
        m.support = actual;
        m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        m.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        r.per_class.push_back(m);
    }
    return r;
}

struct SaliencyMap {
    Tensor<float> map;  // [H, W], values in [0, 1]
    std::string layer;
};

/// Gradient-weighted class activation over the post-GRB tokens: channel
/// weights are the token-averaged gradients of the target logit, the
/// weighted channel sum is rectified, upsampled (nearest) to the thumbnail
/// and divided by its maximum.
inline SaliencyMap saliency(const ModelConfig& cfg, const ParamSet<float>& params, const Thumbnail& th,
                            std::size_t target_class) {
    if (target_class >= cfg.num_classes)
        throw ConfigError("saliency: class " + std::to_string(target_class) + " outside 0.." +
                          std::to_string(cfg.num_classes - 1));
    Tape<double> tape;
    ParamSet<double> pd;
    for (const auto& [name, t] : params) pd.emplace(name, t.cast<double>());
    auto bound = bind_params(tape, pd);
    auto out = model_forward(tape, cfg, bound, th);
    Tensor<double> seed(out.logits.shape());
    seed[target_class] = 1.0;
    tape.backward(out.logits, seed);
    const auto& a = out.fy.value();
    const auto& g = tape.grad(out.fy);
    const std::size_t n = a.dim(0), d = a.dim(1), gh = out.final_gh, gw = out.final_gw;

    std::vector<double> weight(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) weight[c] += g[i * d + c] / static_cast<double>(n);
    std::vector<double> cam(n, 0.0);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += weight[c] * a[i * d + c];
        cam[i] = std::max(0.0, s);
        peak = std::max(peak, cam[i]);
    }
    const std::size_t h = cfg.image_h, w = cfg.image_w;
    SaliencyMap sm{Tensor<float>(Shape{h, w}), "post-grb tokens " + std::to_string(gh) + "x" + std::to_string(gw)};
    if (peak > 0.0)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                sm.map[y * w + x] = static_cast<float>(cam[(y * gh / h) * gw + x * gw / w] / peak);
    return sm;
}

}  // namespace tall
