#pragma once

// Training loop, evaluation driver, checkpoints and the ablation harness.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tall/clipgen.hpp"
#include "tall/config.hpp"
#include "tall/losses.hpp"
#include "tall/metrics.hpp"
#include "tall/model.hpp"
#include "tall/optim.hpp"
#include "tall/tensor_io.hpp"
#include "tall/transform.hpp"

namespace tall {

namespace fs = std::filesystem;

/// Hash of the scene split of a corpus; equal hashes mean identical splits.
inline std::string split_hash(const CorpusSpec& spec) {
    std::string s;
    for (auto sp : assign_scene_splits(spec.videos_per_class, spec.seed)) s.push_back(to_string(sp)[0]);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s)));
    return buf;
}

inline std::string config_hash(const TrainConfig& cfg) {
    Json j = to_json(cfg);
    j.erase("threads");  // does not change results
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

/// Forward pass of one clip through the configured pipeline.
template <Scalar T>
struct ClipForward {
    Var<T> logits;                       // [1, K]
    std::vector<Var<T>> frame_features;  // one [1, d] row per placed frame (per-frame model)
    std::optional<Var<T>> stacked_features;  // [F', d] (thumbnail model)
};

template <Scalar T>
ClipForward<T> clip_forward(Tape<T>& tape, const TrainConfig& cfg, const ModelConfig& model,
                            const BoundParams<T>& p, const Clip& clip, bool train, Rng& rng) {
    ClipForward<T> out;
    const LayoutSpec layout = effective_layout(cfg);
    if (cfg.components.tall) {
        const OrderSpec order = cfg.order == "random" ? OrderSpec::random(rng.next_u64()) : OrderSpec::parse(cfg.order);
        const std::size_t mask = train && cfg.components.mask ? cfg.mask_size : 0;
        const Thumbnail th = tall_transform(clip, mask, layout, order, rng);
        auto mo = model_forward(tape, model, p, th);
        out.logits = mo.logits;
        out.stacked_features = mo.frame_features;
        return out;
    }
    // Per-frame model: every frame is its own 1x1 "thumbnail"; logits are averaged.
    const std::size_t t = clip.num_frames(), fsize = clip.frames.size() / t;
    Var<T> sum_logits;
    for (std::size_t f = 0; f < t; ++f) {
        Shape shape = clip.frames.shape();
        shape[0] = 1;
        Clip one{Tensor<float>(shape, std::vector<float>(clip.frames.raw() + f * fsize, clip.frames.raw() + (f + 1) * fsize)),
                 clip.video, clip.start + f, clip.label, clip.seed};
        const Thumbnail th = tall_transform(one, 0, layout, OrderSpec::forward(), rng);
        auto mo = model_forward(tape, model, p, th);
        sum_logits = f == 0 ? mo.logits : add(sum_logits, mo.logits);
        out.frame_features.push_back(*mo.frame_features);
    }
    out.logits = scale(sum_logits, static_cast<T>(1.0 / static_cast<double>(t)));
    return out;
}

struct SampleLoss {
    double ce = 0.0, sc = 0.0, total = 0.0;
};

template <Scalar T>
Var<T> clip_loss(const TrainConfig& cfg, const ClipForward<T>& fw, int label, SampleLoss& parts) {
    auto ce = ce_loss(fw.logits, static_cast<std::size_t>(label));
    parts.ce = static_cast<double>(ce.value()[0]);
    parts.sc = 0.0;
    Var<T> loss = ce;
    if (cfg.components.sc_loss) {
        std::optional<Var<T>> sc;
        if (fw.stacked_features && fw.stacked_features->shape()[0] >= 2) sc = sc_loss(*fw.stacked_features);
        else if (fw.frame_features.size() >= 2) sc = sc_loss(fw.frame_features);
        if (sc) {
            parts.sc = static_cast<double>(sc->value()[0]);
            loss = total_loss(ce, *sc, cfg.alpha);
        }
    }
    parts.total = static_cast<double>(loss.value()[0]);
    return loss;
}

/// Class probabilities from a [1, K] logit row.
template <Scalar T>
std::vector<double> class_probs(const Tensor<T>& logits) {
    std::vector<double> p(logits.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < p.size(); ++k) m = std::max(m, static_cast<double>(logits[k]));
    double z = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) z += p[k] = std::exp(static_cast<double>(logits[k]) - m);
    for (auto& v : p) v /= z;
    return p;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct EvalResult {
    std::vector<std::size_t> videos;
    std::vector<int> labels;
    std::vector<double> scores;  // video-level probability of "fake" (any non-real class)
    std::vector<std::vector<double>> probs;  // mean class probabilities per video
    std::optional<double> auc;
    double acc = 0.0;
    MulticlassReport report;

    Json to_json(std::size_t k) const {
        Json per_class = Json::array();
        for (std::size_t c = 0; c < report.per_class.size(); ++c)
            per_class.push_back({{"class", c},
                                 {"precision", report.per_class[c].precision},
                                 {"recall", report.per_class[c].recall},
                                 {"f1", report.per_class[c].f1},
                                 {"support", report.per_class[c].support}});
        Json j{{"videos", videos.size()}, {"acc", acc}, {"num_classes", k}, {"per_class", per_class}};
        j["auc"] = auc ? Json(*auc) : Json(nullptr);
        return j;
    }
};

/// Video-level evaluation: eval_clips dense clips per video (offsets seeded by
/// the scene, no mask), clip probabilities averaged.
inline EvalResult evaluate(const TrainConfig& cfg, const ParamSet<float>& params, Split split,
                           std::optional<std::size_t> max_videos = std::nullopt) {
    const ModelConfig model = effective_model(cfg);
    EvalResult r;
    r.videos = videos_in_split(cfg.corpus, split);
    if (max_videos && r.videos.size() > *max_videos) r.videos.resize(*max_videos);
    const std::size_t n = r.videos.size(), k = model.num_classes;
    r.labels.resize(n);
    r.scores.resize(n);
    r.probs.assign(n, std::vector<double>(k, 0.0));
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const auto info = describe_video(cfg.corpus, r.videos[i]);
        Rng rng(derive_seed(cfg.corpus.seed, {0xe7a1, info.scene}));
        const auto starts = dense_sample_starts(cfg.corpus.frames, cfg.eval_clips, cfg.frames_per_clip, rng);
        std::vector<double> fake;
        for (auto s : starts) {
            const Clip clip = render_clip(cfg.corpus, r.videos[i], s, cfg.frames_per_clip);
            Tape<float> tape;
            const auto bound = bind_params(tape, params);
            const auto fw = clip_forward(tape, cfg, model, bound, clip, false, rng);
            const auto p = class_probs(fw.logits.value());
            for (std::size_t c = 0; c < k; ++c) r.probs[i][c] += p[c] / static_cast<double>(starts.size());
            fake.push_back(1.0 - p[0]);
        }
        r.labels[i] = info.label;
        r.scores[i] = video_score(fake);
    });
    if (n == 0) return r;
    std::vector<int> binary(n), preds(n);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        binary[i] = r.labels[i] > 0 ? 1 : 0;
        (binary[i] ? has_pos : has_neg) = true;
        preds[i] = static_cast<int>(std::max_element(r.probs[i].begin(), r.probs[i].end()) - r.probs[i].begin());
    }
    if (has_pos && has_neg) r.auc = roc_auc(r.scores, binary).auc;
    if (k == 2) {
        r.acc = accuracy(r.scores, binary);
        for (std::size_t i = 0; i < n; ++i) preds[i] = r.scores[i] >= 0.5 ? 1 : 0;
    } else {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) correct += preds[i] == r.labels[i];
        r.acc = static_cast<double>(correct) / static_cast<double>(n);
    }
    r.report = multiclass_report(preds, r.labels, k);
    return r;
}

struct StepReport {
    std::size_t step = 0;
    std::size_t epoch = 0;
    double lr = 0.0;
    double ce = 0.0, sc = 0.0, total = 0.0;  // batch means
};

/// Owns parameters, optimizer state and the data position of one run.
/// Gradients of a batch are computed per sample (optionally on several
/// threads) and summed in sample order, so results do not depend on the
/// thread count.
class Trainer {
public:
    explicit Trainer(TrainConfig cfg)
        : cfg_(std::move(cfg)), model_(effective_model(cfg_)), order_rng_(derive_seed(cfg_.seed, {0x0dde})) {
        cfg_.validate();
        params_ = init_params<float>(model_, cfg_.seed);
        train_videos_ = videos_in_split(cfg_.corpus, Split::train);
        if (train_videos_.empty()) throw ConfigError("training split is empty; increase corpus.videos_per_class");
    }

    const TrainConfig& config() const { return cfg_; }
    const ModelConfig& model() const { return model_; }
    const ParamSet<float>& params() const { return params_; }
    const AdamState<float>& adam() const { return adam_; }
    std::size_t step_index() const { return step_; }
    std::size_t steps_per_epoch() const { return (train_videos_.size() + cfg_.batch - 1) / cfg_.batch; }
    std::size_t total_steps() const { return steps_per_epoch() * cfg_.epochs; }
    std::size_t warmup_steps() const { return steps_per_epoch() * cfg_.warmup_epochs; }
    bool done() const { return step_ >= total_steps(); }

    StepReport step() {
        if (done()) throw UsageError("training already finished at step " + std::to_string(step_));
        const std::size_t spe = steps_per_epoch(), epoch = step_ / spe, pos = step_ % spe;
        if (pos == 0) {
            epoch_order_ = train_videos_;
            order_rng_.shuffle(epoch_order_.begin(), epoch_order_.end());
        }
        const std::size_t first = pos * cfg_.batch, last = std::min(first + cfg_.batch, epoch_order_.size());
        const std::size_t b = last - first;
        const double lr = lr_schedule(step_, total_steps(), warmup_steps(), cfg_.lr);

        std::vector<std::map<std::string, Tensor<float>>> grads(b);
        std::vector<SampleLoss> losses(b);
        parallel_for(b, cfg_.threads, [&](std::size_t i) {
            const std::size_t video = epoch_order_[first + i];
            Rng rng(derive_seed(cfg_.seed, {0x7a11, epoch, video}));
            const auto starts = dense_sample_starts(cfg_.corpus.frames, cfg_.train_clips, cfg_.frames_per_clip, rng);
            const auto start = starts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(starts.size() - 1)))];
            const Clip clip = render_clip(cfg_.corpus, video, start, cfg_.frames_per_clip);
            Tape<float> tape;
            const auto bound = bind_params(tape, params_);
            const auto fw = clip_forward(tape, cfg_, model_, bound, clip, true, rng);
            auto loss = clip_loss(cfg_, fw, clip.label, losses[i]);
            tape.backward(loss);
            grads[i] = tape.param_grads();
        });

        StepReport rep{step_, epoch, lr, 0, 0, 0};
        for (const auto& l : losses) {
            rep.ce += l.ce / static_cast<double>(b);
            rep.sc += l.sc / static_cast<double>(b);
            rep.total += l.total / static_cast<double>(b);
        }
        if (!std::isfinite(rep.total))
            throw NumericalError("non-finite loss at step " + std::to_string(step_));
        auto& sum = grads[0];
        for (std::size_t i = 1; i < b; ++i)
            for (auto& [name, g] : sum) {
                const auto& gi = grads[i].at(name);
                for (std::size_t j = 0; j < g.size(); ++j) g[j] += gi[j];
            }
        const float inv = 1.0f / static_cast<float>(b);
        for (auto& [name, g] : sum)
            for (auto& v : g.data()) v *= inv;
        adam_step(params_, sum, adam_, lr);
        ++step_;
        return rep;
    }

    void save(const fs::path& dir) const {
        fs::create_directories(dir / "params");
        for (const auto& [name, t] : params_) write_tensor(dir / "params" / (name + ".tten"), t);
        if (adam_.step > 0) {
            fs::create_directories(dir / "adam_m");
            fs::create_directories(dir / "adam_v");
            for (const auto& [name, t] : adam_.m) write_tensor(dir / "adam_m" / (name + ".tten"), t);
            for (const auto& [name, t] : adam_.v) write_tensor(dir / "adam_v" / (name + ".tten"), t);
        }
        write_json(dir / "config.json", Json{{"train", to_json(cfg_)}, {"model", to_json(model_)}});
        write_json(dir / "meta.json", Json{{"step", step_},
                                           {"adam_step", adam_.step},
                                           {"rng_state", order_rng_.state()},
                                           {"epoch_order", epoch_order_}});
    }

    static Trainer load(const fs::path& dir) {
        const Json config = read_json(dir / "config.json");
        if (!config.contains("train")) throw FormatError(config_path(dir) + ": missing 'train'", 0);
        Trainer t(train_config_from_json(config.at("train")));
        if (config.contains("model") && model_from_json(config.at("model")).image_h != t.model_.image_h)
            throw ConfigError(config_path(dir) + ": model geometry does not match the training config");
        for (auto& [name, p] : t.params_) {
            auto loaded = read_tensor<float>(dir / "params" / (name + ".tten"));
            if (loaded.shape() != p.shape()) throw ShapeError("checkpoint " + name, p.shape(), loaded.shape());
            p = std::move(loaded);
        }
        const Json meta = read_json(dir / "meta.json");
        try {
            t.step_ = meta.at("step").get<std::size_t>();
            t.adam_.step = meta.at("adam_step").get<std::uint64_t>();
            t.order_rng_.set_state(meta.at("rng_state").get<std::string>());
            t.epoch_order_ = meta.at("epoch_order").get<std::vector<std::size_t>>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError((dir / "meta.json").string() + ": " + e.what(), 0);
        }
        if (t.adam_.step > 0)
            for (const auto& [name, p] : t.params_) {
                t.adam_.m.emplace(name, read_tensor<float>(dir / "adam_m" / (name + ".tten")));
                t.adam_.v.emplace(name, read_tensor<float>(dir / "adam_v" / (name + ".tten")));
            }
        return t;
    }

    static void write_json(const fs::path& path, const Json& j) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        out << j.dump(2) << "\n";
    }

    static Json read_json(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read " + path.string());
        Json j = Json::parse(in, nullptr, false);
        if (j.is_discarded()) throw FormatError(path.string() + ": invalid JSON", 0);
        return j;
    }

private:
    static std::string config_path(const fs::path& dir) { return (dir / "config.json").string(); }

    TrainConfig cfg_;
    ModelConfig model_;
    ParamSet<float> params_;
    AdamState<float> adam_;
    std::vector<std::size_t> train_videos_;
    std::vector<std::size_t> epoch_order_;
    Rng order_rng_;
    std::size_t step_ = 0;
};

struct EpochStats {
    std::size_t epoch = 0;
    double ce = 0.0, sc = 0.0, total = 0.0;
    double lr_end = 0.0;
    std::optional<double> val_auc;
    double seconds = 0.0;
};

struct RunRecord {
    std::string config_hash;
    std::string split_hash;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::vector<EpochStats> epochs;
    Json final_metrics;
    double wall_time_s = 0.0;

    Json to_json() const {
        Json ep = Json::array();
        for (const auto& e : epochs) {
            Json j{{"epoch", e.epoch}, {"ce", e.ce}, {"sc", e.sc}, {"total", e.total}, {"lr_end", e.lr_end},
                   {"seconds", e.seconds}};
            j["val_auc"] = e.val_auc ? Json(*e.val_auc) : Json(nullptr);
            ep.push_back(j);
        }
        return Json{{"config_hash", config_hash},
                    {"split_hash", split_hash},
                    {"seed", seed},
                    {"threads", threads},
                    // per-sample gradients are reduced in a fixed order
                    {"deterministic", true},
                    {"epochs", ep},
                    {"final_metrics", final_metrics},
                    {"wall_time_s", wall_time_s}};
    }
};

struct TrainOptions {
    std::optional<fs::path> out_dir;
    bool final_test_eval = true;
    std::function<void(const std::string&)> log;  // progress lines
};

/// Full run: steps, per-epoch checkpoint and validation, final test metrics.
/// A non-finite loss saves the state before the failing step to
/// out_dir/checkpoint-before-nan and rethrows.
inline RunRecord train(const TrainConfig& cfg, const TrainOptions& opt = {}, Trainer* trainer_out = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    Trainer tr(cfg);
    RunRecord rec;
    rec.config_hash = config_hash(cfg);
    rec.split_hash = split_hash(cfg.corpus);
    rec.seed = cfg.seed;
    rec.threads = cfg.threads;
    std::ofstream csv;
    if (opt.out_dir) {
        fs::create_directories(*opt.out_dir);
        csv.open(*opt.out_dir / "train_log.csv");
        if (!csv) throw IoError("cannot write " + (*opt.out_dir / "train_log.csv").string());
        csv << "step,ce,sc,total,lr\n";
        csv.precision(9);
    }
    const auto log = [&](const std::string& s) {
        if (opt.log) opt.log(s);
    };
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const auto te = std::chrono::steady_clock::now();
        EpochStats st;
        st.epoch = e;
        std::size_t n = 0;
        for (std::size_t s = 0; s < tr.steps_per_epoch(); ++s) {
            StepReport rep;
            try {
                rep = tr.step();
            } catch (const NumericalError& err) {
                if (opt.out_dir) tr.save(*opt.out_dir / "checkpoint-before-nan");
                throw NumericalError(std::string(err.what()) +
                                     (opt.out_dir ? "; state before the step saved to checkpoint-before-nan" : ""));
            }
            if (csv.is_open()) csv << rep.step << ',' << rep.ce << ',' << rep.sc << ',' << rep.total << ',' << rep.lr << '\n';
            st.ce += rep.ce;
            st.sc += rep.sc;
            st.total += rep.total;
            st.lr_end = rep.lr;
            ++n;
        }
        st.ce /= static_cast<double>(n);
        st.sc /= static_cast<double>(n);
        st.total /= static_cast<double>(n);
        if (opt.out_dir) tr.save(*opt.out_dir / "checkpoint");
        if (cfg.eval_each_epoch) st.val_auc = evaluate(cfg, tr.params(), Split::val).auc;
        st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - te).count();
        char line[160];
        std::snprintf(line, sizeof line, "epoch %zu loss %.4f ce %.4f sc %.4f val_auc %s (%.1fs)", e, st.total, st.ce,
                      st.sc, st.val_auc ? std::to_string(*st.val_auc).c_str() : "-", st.seconds);
        log(line);
        rec.epochs.push_back(st);
    }
    if (opt.out_dir) tr.save(*opt.out_dir / "checkpoint");
    if (opt.final_test_eval) {
        const auto test = evaluate(cfg, tr.params(), Split::test);
        rec.final_metrics = test.to_json(tr.model().num_classes);
        if (opt.out_dir) Trainer::write_json(*opt.out_dir / "metrics.json", rec.final_metrics);
    }
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opt.out_dir) Trainer::write_json(*opt.out_dir / "run.json", rec.to_json());
    if (trainer_out) *trainer_out = std::move(tr);
    return rec;
}

// Ablation harness.

struct AblationVariant {
    std::string name;
    Json columns;  // axis-specific descriptors written to the table
    TrainConfig config;
};

inline const std::vector<std::string>& ablation_axes() {
    static const std::vector<std::string> axes{"components", "layout", "order", "size", "window"};
    return axes;
}

inline std::vector<AblationVariant> ablation_variants(const TrainConfig& base, const std::string& axis) {
    std::vector<AblationVariant> out;
    if (axis == "components") {
        // {tall, mask, grb, sc_loss}; the baseline is a per-frame model trained with cross-entropy
        const bool grid[7][4] = {{0, 0, 0, 0}, {1, 0, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 0},
                                 {0, 0, 1, 1}, {1, 1, 1, 0}, {1, 1, 1, 1}};
        for (int i = 0; i < 7; ++i) {
            TrainConfig c = base;
            c.components = Components{grid[i][0], grid[i][1], grid[i][2], grid[i][3]};
            out.push_back({std::to_string(i + 1),
                           Json{{"tall", grid[i][0]}, {"mask", grid[i][1]}, {"grb", grid[i][2]}, {"sc_loss", grid[i][3]}},
                           c});
        }
    } else if (axis == "layout") {
        const std::pair<const char*, const char*> layouts[] = {{"a", "1x4"}, {"b", "4x1"}, {"c", "2x2-col"}, {"d", "2x2"}};
        for (auto [name, layout] : layouts) {
            TrainConfig c = base;
            c.layout = layout;
            out.push_back({std::string("(") + name + ")", Json{{"layout", layout}}, c});
        }
    } else if (axis == "order") {
        const std::pair<const char*, const char*> orders[] = {{"0, 1, 2, -", "drop-last-1"},
                                                              {"0, 1, -, -", "drop-last-2"},
                                                              {"Random", "random"},
                                                              {"Reverse", "reverse"},
                                                              {"Forward", "forward"}};
        for (auto [name, order] : orders) {
            TrainConfig c = base;
            c.order = order;
            out.push_back({name, Json{{"order", order}}, c});
        }
    } else if (axis == "size") {
        struct Row {
            const char* layout;
            std::size_t grid;
            double factor;
            std::size_t window;
            bool downsampled;
        };
        // Sub-frame sizes relative to the default (factor 4 -> 32 px): double, third, quarter, default.
        const Row rows[] = {{"3x3", 3, 2.0, 8, false},
                            {"2x2", 2, 2.0, 8, false},
                            {"3x3", 3, 16.0 / 3.0, 6, true},
                            {"4x4", 4, 8.0, 8, true},
                            {"2x2", 2, 4.0, 8, true}};
        for (const auto& r : rows) {
            TrainConfig c = base;
            c.layout = r.layout;
            c.factor = r.factor;
            c.frames_per_clip = r.grid * r.grid;
            c.train_clips = c.eval_clips = std::max<std::size_t>(1, std::min<std::size_t>(8, c.corpus.frames / c.frames_per_clip));
            c.model.windows = {r.window, 0};
            const auto m = effective_model(c);
            char name[64];
            std::snprintf(name, sizeof name, "%s %zux%zu", r.layout, m.image_h, m.image_w);
            out.push_back({name,
                           Json{{"downsampled", r.downsampled}, {"factor", r.factor}, {"thumbnail", m.image_h},
                                {"layout", r.layout}},
                           c});
        }
    } else if (axis == "window") {
        for (std::size_t w : {4, 16, 8}) {
            TrainConfig c = base;
            c.model.windows = {w, 0};
            const auto m = effective_model(c);
            const std::size_t w0 = m.stage_window(0).first, w1 = m.stage_window(1).first;
            out.push_back({"(" + std::to_string(w0) + "," + std::to_string(w1) + ")", Json{{"windows", {w0, w1}}}, c});
        }
    } else {
        throw ConfigError("unknown ablation axis '" + axis + "' (components, layout, order, size, window)");
    }
    for (auto& v : out) v.config.validate();
    return out;
}

struct AblationRow {
    AblationVariant variant;
    RunRecord record;
    std::optional<double> auc;
    double acc = 0.0;
};

/// One training run per variant, all with the base seed and the same split.
inline std::vector<AblationRow> ablate(const TrainConfig& base, const std::string& axis,
                                       const std::optional<fs::path>& out_dir = std::nullopt,
                                       const std::function<void(const std::string&)>& log = {}) {
    std::vector<AblationRow> rows;
    std::string expected_split;
    for (auto& v : ablation_variants(base, axis)) {
        if (log) log("variant " + v.name);
        TrainOptions opt;
        opt.log = log;
        if (out_dir) opt.out_dir = *out_dir / ("variant-" + std::to_string(rows.size() + 1));
        AblationRow row{v, train(v.config, opt), std::nullopt, 0.0};
        if (expected_split.empty()) expected_split = row.record.split_hash;
        if (row.record.split_hash != expected_split)
            throw ConfigError("ablation variants do not share a data split");
        const Json& m = row.record.final_metrics;
        if (m.contains("auc") && !m["auc"].is_null()) row.auc = m["auc"].get<double>();
        if (m.contains("acc")) row.acc = m["acc"].get<double>();
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

/// variant, axis columns..., auc, acc, split_hash
inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "variant";
    if (!rows.empty())
        for (const auto& [k, _] : rows.front().variant.columns.items()) out += "," + k;
    out += ",auc,acc,split_hash\n";
    for (const auto& r : rows) {
        out += csv_field(r.variant.name);
        for (const auto& [k, v] : r.variant.columns.items()) out += "," + csv_field(v.is_string() ? v.get<std::string>() : v.dump());
        char buf[64];
        std::snprintf(buf, sizeof buf, ",%s,%.6f,", r.auc ? std::to_string(*r.auc).c_str() : "", r.acc);
        out += buf + r.record.split_hash + "\n";
    }
    return out;
}

}  // namespace tall
