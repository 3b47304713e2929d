#pragma once

// Training configuration, its strict JSON form, and dotted-key overrides.

#include <json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "tall/clipgen.hpp"
#include "tall/error.hpp"
#include "tall/model.hpp"
#include "tall/transform.hpp"

namespace tall {

using Json = nlohmann::json;

/// Toggles of the component ablation grid.
struct Components {
    bool tall = true;     // thumbnail input; off means a per-frame model
    bool mask = true;
    bool grb = true;
    bool sc_loss = true;

    friend bool operator==(const Components&, const Components&) = default;
};

struct TrainConfig {
    CorpusSpec corpus;
    ModelConfig model;  // architecture; input geometry and class count are derived
    double lr = 3e-4;
    std::size_t batch = 8;
    std::size_t epochs = 15;
    std::size_t warmup_epochs = 1;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    std::size_t mask_size = 16;
    std::string layout = "2x2";
    double factor = 4.0;
    /// forward | reverse | random (fresh permutation per clip) | random:SEED | drop-last-K
    std::string order = "forward";
    std::size_t frames_per_clip = 4;
    std::size_t train_clips = 8;  // dense-sampling segments a training clip is drawn from
    std::size_t eval_clips = 8;
    /// Per-frame input downsampling when the thumbnail transform is off.
    double baseline_factor = 2.0;
    Components components;
    std::size_t threads = 1;
    bool eval_each_epoch = true;

    void validate() const;
};

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename V>
void read_key(const Json& j, const char* key, V& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<V>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + where + ": " + j.at(key).dump());
    }
}

}  // namespace detail

inline Json to_json(const CorpusSpec& c) {
    Json kinds = Json::array();
    for (auto k : c.kinds) kinds.push_back(to_string(k));
    return Json{{"videos_per_class", c.videos_per_class}, {"frames", c.frames}, {"height", c.height},
                {"width", c.width}, {"kinds", kinds}, {"multiclass", c.multiclass},
                {"magnitude", c.magnitude}, {"seed", c.seed}};
}

inline CorpusSpec corpus_from_json(const Json& j) {
    const std::string where = "corpus config";
    detail::reject_unknown(j, {"videos_per_class", "frames", "height", "width", "kinds", "multiclass", "magnitude", "seed"},
                           where);
    CorpusSpec c;
    detail::read_key(j, "videos_per_class", c.videos_per_class, where);
    detail::read_key(j, "frames", c.frames, where);
    detail::read_key(j, "height", c.height, where);
    detail::read_key(j, "width", c.width, where);
    detail::read_key(j, "multiclass", c.multiclass, where);
    detail::read_key(j, "magnitude", c.magnitude, where);
    detail::read_key(j, "seed", c.seed, where);
    if (j.contains("kinds")) {
        std::vector<std::string> names;
        detail::read_key(j, "kinds", names, where);
        c.kinds.clear();
        for (const auto& n : names) c.kinds.push_back(parse_artifact_kind(n));
    }
    c.validate();
    return c;
}

inline Json to_json(const ModelConfig& m) {
    return Json{{"image_h", m.image_h}, {"image_w", m.image_w}, {"in_channels", m.in_channels},
                {"patch", m.patch}, {"embed_dim", m.embed_dim}, {"depths", m.depths},
                {"heads", m.heads}, {"windows", m.windows}, {"shifted_windows", m.shifted_windows},
                {"mlp_ratio", m.mlp_ratio}, {"grid_rows", m.grid_rows}, {"grid_cols", m.grid_cols},
                {"grb", m.grb}, {"grb_dk", m.grb_dk}, {"num_classes", m.num_classes}, {"init_std", m.init_std},
                {"input_mean", m.input_mean}, {"input_std", m.input_std}};
}

inline ModelConfig model_from_json(const Json& j) {
    const std::string where = "model config";
    detail::reject_unknown(j, {"image_h", "image_w", "in_channels", "patch", "embed_dim", "depths", "heads", "windows",
                               "shifted_windows", "mlp_ratio", "grid_rows", "grid_cols", "grb", "grb_dk",
                               "num_classes", "init_std", "input_mean", "input_std"},
                           where);
    ModelConfig m;
    detail::read_key(j, "image_h", m.image_h, where);
    detail::read_key(j, "image_w", m.image_w, where);
    detail::read_key(j, "in_channels", m.in_channels, where);
    detail::read_key(j, "patch", m.patch, where);
    detail::read_key(j, "embed_dim", m.embed_dim, where);
    detail::read_key(j, "depths", m.depths, where);
    detail::read_key(j, "heads", m.heads, where);
    detail::read_key(j, "windows", m.windows, where);
    detail::read_key(j, "shifted_windows", m.shifted_windows, where);
    detail::read_key(j, "mlp_ratio", m.mlp_ratio, where);
    detail::read_key(j, "grid_rows", m.grid_rows, where);
    detail::read_key(j, "grid_cols", m.grid_cols, where);
    detail::read_key(j, "grb", m.grb, where);
    detail::read_key(j, "grb_dk", m.grb_dk, where);
    detail::read_key(j, "num_classes", m.num_classes, where);
    detail::read_key(j, "init_std", m.init_std, where);
    detail::read_key(j, "input_mean", m.input_mean, where);
    detail::read_key(j, "input_std", m.input_std, where);
    return m;
}

inline Json to_json(const TrainConfig& c) {
    Json model = to_json(c.model);
    // derived from the corpus and layout; kept out of the training config
    for (const char* k : {"image_h", "image_w", "in_channels", "grid_rows", "grid_cols", "grb", "num_classes"})
        model.erase(k);
    return Json{{"corpus", to_json(c.corpus)},
                {"model", model},
                {"lr", c.lr},
                {"batch", c.batch},
                {"epochs", c.epochs},
                {"warmup_epochs", c.warmup_epochs},
                {"alpha", c.alpha},
                {"seed", c.seed},
                {"mask_size", c.mask_size},
                {"layout", c.layout},
                {"factor", c.factor},
                {"order", c.order},
                {"frames_per_clip", c.frames_per_clip},
                {"train_clips", c.train_clips},
                {"eval_clips", c.eval_clips},
                {"baseline_factor", c.baseline_factor},
                {"components",
                 {{"tall", c.components.tall},
                  {"mask", c.components.mask},
                  {"grb", c.components.grb},
                  {"sc_loss", c.components.sc_loss}}},
                {"threads", c.threads},
                {"eval_each_epoch", c.eval_each_epoch}};
}

inline TrainConfig train_config_from_json(const Json& j) {
    const std::string where = "train config";
    detail::reject_unknown(j, {"corpus", "model", "lr", "batch", "epochs", "warmup_epochs", "alpha", "seed", "mask_size",
                               "layout", "factor", "order", "frames_per_clip", "train_clips", "eval_clips",
                               "baseline_factor", "components", "threads", "eval_each_epoch"},
                           where);
    TrainConfig c;
    if (j.contains("corpus")) c.corpus = corpus_from_json(j.at("corpus"));
    if (j.contains("model")) {
        const Json& m = j.at("model");
        detail::reject_unknown(m, {"patch", "embed_dim", "depths", "heads", "windows", "shifted_windows", "mlp_ratio",
                                   "grb_dk", "init_std", "input_mean", "input_std"},
                               "model config");
        c.model = model_from_json(m);
    }
    detail::read_key(j, "lr", c.lr, where);
    detail::read_key(j, "batch", c.batch, where);
    detail::read_key(j, "epochs", c.epochs, where);
    detail::read_key(j, "warmup_epochs", c.warmup_epochs, where);
    detail::read_key(j, "alpha", c.alpha, where);
    detail::read_key(j, "seed", c.seed, where);
    detail::read_key(j, "mask_size", c.mask_size, where);
    detail::read_key(j, "layout", c.layout, where);
    detail::read_key(j, "factor", c.factor, where);
    detail::read_key(j, "order", c.order, where);
    detail::read_key(j, "frames_per_clip", c.frames_per_clip, where);
    detail::read_key(j, "train_clips", c.train_clips, where);
    detail::read_key(j, "eval_clips", c.eval_clips, where);
    detail::read_key(j, "baseline_factor", c.baseline_factor, where);
    detail::read_key(j, "threads", c.threads, where);
    detail::read_key(j, "eval_each_epoch", c.eval_each_epoch, where);
    if (j.contains("components")) {
        const Json& t = j.at("components");
        detail::reject_unknown(t, {"tall", "mask", "grb", "sc_loss"}, "components");
        detail::read_key(t, "tall", c.components.tall, "components");
        detail::read_key(t, "mask", c.components.mask, "components");
        detail::read_key(t, "grb", c.components.grb, "components");
        detail::read_key(t, "sc_loss", c.components.sc_loss, "components");
    }
    c.validate();
    return c;
}

/// Sets `dotted.key` in a JSON document. The value is parsed as JSON when
/// possible and kept as a string otherwise. The key must already exist.
inline void apply_override(Json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("override '" + assignment + "' is not KEY=VALUE");
    const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    Json* node = &j;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown key '" + key + "' in override");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    Json value = Json::parse(raw, nullptr, false);
    *node = value.is_discarded() ? Json(raw) : value;
}

/// Layout actually used by the transform for this config.
inline LayoutSpec effective_layout(const TrainConfig& c) {
    if (!c.components.tall) return LayoutSpec::grid(1, 1, c.baseline_factor);
    return LayoutSpec::parse(c.layout, c.factor);
}

/// The model config implied by the architecture fields, the corpus and the layout.
inline ModelConfig effective_model(const TrainConfig& c) {
    ModelConfig m = c.model;
    const LayoutSpec layout = effective_layout(c);
    const std::size_t sub_h = detail::downsampled_extent(c.corpus.height, layout.factor_h);
    const std::size_t sub_w = detail::downsampled_extent(c.corpus.width, layout.factor_w);
    m.image_h = layout.rows * sub_h;
    m.image_w = layout.cols * sub_w;
    m.in_channels = kChannels;
    m.grid_rows = layout.rows;
    m.grid_cols = layout.cols;
    m.grb = c.components.grb;
    m.num_classes = c.corpus.num_classes();
    return m;
}

inline void TrainConfig::validate() const {
    corpus.validate();
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (batch == 0) throw ConfigError("batch must be positive");
    if (warmup_epochs > epochs && epochs > 0) throw ConfigError("warmup_epochs exceeds epochs");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
    if (frames_per_clip == 0 || train_clips == 0 || eval_clips == 0) throw ConfigError("clip geometry must be positive");
    if (threads == 0) throw ConfigError("threads must be positive");
    if (components.mask && !components.tall) throw ConfigError("the mask is part of the thumbnail transform; needs tall");
    if (components.sc_loss && frames_per_clip < 2) throw ConfigError("sc_loss needs at least 2 frames per clip");
    if (mask_size > std::min(corpus.height, corpus.width)) throw ConfigError("mask_size exceeds the frame");
    if (order != "random") OrderSpec::parse(order);
    const LayoutSpec layout = effective_layout(*this);
    if (components.tall && frames_per_clip > layout.slots())
        throw ConfigError("frames_per_clip " + std::to_string(frames_per_clip) + " exceeds layout " + layout.name);
    const std::size_t need = std::max(train_clips, eval_clips) * frames_per_clip;
    if (corpus.frames < need)
        throw ConfigError("videos of " + std::to_string(corpus.frames) + " frames are too short; dense sampling needs " +
                          std::to_string(need));
    effective_model(*this).validate();
}

}  // namespace tall
