#pragma once

// Command-line front end: gen-data, transform, train, eval, ablate,
// bench-transform and saliency.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tall/clipgen.hpp"
#include "tall/config.hpp"
#include "tall/error.hpp"
#include "tall/metrics.hpp"
#include "tall/tensor_io.hpp"
#include "tall/trainer.hpp"
#include "tall/transform.hpp"

namespace tall::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, usage_error = 1, data_error = 2, numerical_abort = 3 };

inline int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::usage:
        case ErrorKind::config:
        case ErrorKind::shape: return usage_error;
        case ErrorKind::format:
        case ErrorKind::io: return data_error;
        case ErrorKind::numerical: return numerical_abort;
    }
    return usage_error;
}

/// One line, `error kind=<kind>: <message>`, newlines flattened.
inline void print_error(std::ostream& err, const std::string& kind, std::string msg) {
    for (auto& ch : msg)
        if (ch == '\n' || ch == '\r') ch = ' ';
    err << "error kind=" << kind << ": " << msg << "\n";
}

inline std::optional<fs::path> default_data_dir() {
    if (const char* env = std::getenv("TALL_DATA_DIR"); env && *env) return fs::path(env);
    return std::nullopt;
}

inline Json read_json_file(const fs::path& p) { return Trainer::read_json(p); }

/// `--seed` wins, then an explicit seed from the config or a `--set`, then a
/// fresh entropy seed that is reported on `log`.
inline void resolve_seed(Json& j, bool explicit_seed, const std::optional<std::uint64_t>& flag, std::ostream& log) {
    if (flag) {
        j["seed"] = *flag;
    } else if (!explicit_seed) {
        std::random_device rd;
        const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        log << "seed " << s << " (entropy)\n";
        j["seed"] = s;
    }
}

inline bool sets_seed(const std::vector<std::string>& sets, const std::string& key = "seed") {
    for (const auto& s : sets)
        if (s.rfind(key + "=", 0) == 0) return true;
    return false;
}

struct Context {
    std::ostream& out;
    std::ostream& err;
};

/// Loads a train config file (or defaults), applies --set overrides and the
/// corpus from a data directory manifest when one is given.
inline TrainConfig load_train_config(const std::optional<fs::path>& path, const std::vector<std::string>& sets,
                                     const std::optional<fs::path>& data_dir, const std::optional<std::uint64_t>& seed,
                                     std::optional<std::size_t> threads, std::ostream& log) {
    Json file = path ? read_json_file(*path) : Json::object();
    train_config_from_json(file);  // reject unknown keys in the file itself
    Json j = to_json(TrainConfig{});
    j.merge_patch(file);
    if (data_dir && fs::exists(*data_dir / "manifest.json")) {
        const Json manifest = read_json_file(*data_dir / "manifest.json");
        if (!manifest.contains("spec")) throw FormatError((*data_dir / "manifest.json").string() + ": missing 'spec'", 0);
        j["corpus"] = manifest.at("spec");
    }
    for (const auto& s : sets) apply_override(j, s);
    resolve_seed(j, file.contains("seed") || sets_seed(sets), seed, log);
    if (threads) j["threads"] = *threads;
    return train_config_from_json(j);
}

inline void write_text(const fs::path& p, const std::string& s) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    f << s;
}

// Subcommands.

inline void cmd_gen_data(Context& ctx, const std::optional<fs::path>& spec_path, std::optional<fs::path> out,
                         const std::vector<std::string>& sets, const std::optional<std::uint64_t>& seed,
                         std::size_t threads, bool ppm) {
    if (!out) out = default_data_dir();
    if (!out) throw UsageError("gen-data needs --out or TALL_DATA_DIR");
    Json file = spec_path ? read_json_file(*spec_path) : Json::object();
    corpus_from_json(file);
    Json j = to_json(CorpusSpec{});
    j.merge_patch(file);
    for (const auto& s : sets) apply_override(j, s);
    resolve_seed(j, file.contains("seed") || sets_seed(sets), seed, ctx.err);
    const CorpusSpec spec = corpus_from_json(j);
    fs::create_directories(*out / "videos");
    const auto splits = assign_scene_splits(spec.videos_per_class, spec.seed);
    Json videos = Json::array();
    for (std::size_t i = 0; i < spec.num_videos(); ++i) {
        const auto info = describe_video(spec, i);
        char name[32];
        std::snprintf(name, sizeof name, "video-%05zu.tten", i);
        Json v{{"file", std::string("videos/") + name}, {"index", i}, {"label", info.label}, {"scene", info.scene},
               {"split", to_string(splits[info.scene])}};
        v["kind"] = info.kind ? Json(to_string(*info.kind)) : Json(nullptr);
        videos.push_back(v);
    }
    parallel_for(spec.num_videos(), threads, [&](std::size_t i) {
        const Video v = generate_video(spec, i);
        const fs::path file = *out / videos[i]["file"].get<std::string>();
        write_tensor(file, v.frames);
        if (ppm) {
            const std::size_t fsize = v.frames.size() / v.num_frames();
            Tensor<float> first(Shape{kChannels, spec.height, spec.width},
                                std::vector<float>(v.frames.raw(), v.frames.raw() + fsize));
            write_ppm(first, fs::path(file).replace_extension(".ppm"));
        }
    });
    Trainer::write_json(*out / "manifest.json", Json{{"spec", to_json(spec)}, {"videos", videos}});
    ctx.out << Json{{"videos", spec.num_videos()}, {"out", out->string()}, {"seed", spec.seed}}.dump() << "\n";
}

inline void cmd_transform(Context& ctx, const fs::path& in, const fs::path& out, const std::string& layout_name,
                          const std::string& order_name, std::size_t mask_size, double factor,
                          const std::optional<std::uint64_t>& seed_flag, const std::optional<fs::path>& ppm) {
    const Clip clip = read_clip(in);
    Json seed_holder = Json::object();
    resolve_seed(seed_holder, false, seed_flag, ctx.err);
    const auto seed = seed_holder["seed"].get<std::uint64_t>();
    Rng rng(seed);
    const LayoutSpec layout = LayoutSpec::parse(layout_name, factor);
    if (mask_size > std::min(clip.height(), clip.width()))
        throw ConfigError("mask size " + std::to_string(mask_size) + " exceeds the frame");
    const Thumbnail th = tall_transform(clip, mask_size, layout, OrderSpec::parse(order_name), rng);
    write_tensor(out, th.image);
    Json side{{"layout", layout.name}, {"factor", factor}, {"order", th.order.name()}, {"frame_slot", th.frame_slot},
              {"mask", {{"x", th.mask.x}, {"y", th.mask.y}, {"size", th.mask.size}}}, {"video", clip.video},
              {"start", clip.start}, {"label", clip.label}, {"seed", seed}};
    Trainer::write_json(clip_sidecar(out), side);
    if (ppm) write_ppm(th.image, *ppm);
    ctx.out << Json{{"out", out.string()}, {"height", th.height()}, {"width", th.width()}}.dump() << "\n";
}

inline void cmd_train(Context& ctx, const TrainConfig& cfg, const fs::path& out) {
    TrainOptions opt;
    opt.out_dir = out;
    opt.log = [&](const std::string& s) { ctx.err << s << "\n"; };
    ctx.err << "seed " << cfg.seed << ", " << videos_in_split(cfg.corpus, Split::train).size() << " training videos\n";
    const auto rec = train(cfg, opt);
    ctx.out << rec.final_metrics.dump() << "\n";
}

inline void cmd_eval(Context& ctx, const fs::path& ckpt, const std::string& split_name,
                     const std::optional<fs::path>& out, const std::optional<fs::path>& roc_path,
                     std::optional<std::size_t> threads, std::optional<std::size_t> max_videos) {
    Trainer tr = Trainer::load(ckpt);
    TrainConfig cfg = tr.config();
    if (threads) cfg.threads = *threads;
    const Split split = parse_split(split_name);
    const auto r = evaluate(cfg, tr.params(), split, max_videos);
    Json m = r.to_json(tr.model().num_classes);
    m["split"] = split_name;
    m["step"] = tr.step_index();
    Trainer::write_json(out.value_or(ckpt / "metrics.json"), m);
    if (roc_path) {
        std::vector<int> binary;
        for (int l : r.labels) binary.push_back(l > 0 ? 1 : 0);
        const auto roc = roc_auc(r.scores, binary);
        std::ostringstream csv;
        csv.precision(17);
        csv << "threshold,fpr,tpr\n";
        for (std::size_t i = 0; i < roc.fpr.size(); ++i) csv << roc.thresholds[i] << ',' << roc.fpr[i] << ',' << roc.tpr[i] << '\n';
        write_text(*roc_path, csv.str());
    }
    ctx.out << m.dump() << "\n";
}

inline void cmd_ablate(Context& ctx, const TrainConfig& base, const std::string& axis, const std::optional<fs::path>& out,
                       bool plan_only) {
    if (plan_only) {
        std::vector<AblationRow> rows;
        for (auto& v : ablation_variants(base, axis)) rows.push_back({v, RunRecord{}, std::nullopt, 0.0});
        for (auto& r : rows) r.record.split_hash = split_hash(r.variant.config.corpus);
        ctx.out << ablation_csv(rows);
        return;
    }
    const auto rows = ablate(base, axis, out, [&](const std::string& s) { ctx.err << s << "\n"; });
    const std::string csv = ablation_csv(rows);
    if (out) write_text(*out / ("ablation-" + axis + ".csv"), csv);
    ctx.out << csv;
}

struct BenchResult {
    double clips_per_s = 0.0;
    double bytes_per_s = 0.0;
    double seconds = 0.0;
};

/// Times tall_transform on a pool of random clips.
inline BenchResult bench_transform(std::size_t clips, std::size_t threads, std::size_t size, std::size_t frames,
                                   double factor, std::size_t mask_size, const std::string& layout_name, std::uint64_t seed) {
    if (clips == 0 || threads == 0) throw ConfigError("bench-transform needs positive --clips and --threads");
    const LayoutSpec layout = LayoutSpec::parse(layout_name, factor);
    Rng rng(seed);
    std::vector<Clip> pool;
    for (std::size_t i = 0; i < std::min<std::size_t>(clips, 8); ++i)
        pool.push_back(Clip{Tensor<float>::uniform(Shape{frames, kChannels, size, size}, rng, 0.0, 1.0), i, 0, 0, seed});
    std::vector<double> sink(threads, 0.0);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < threads; ++w)
        workers.emplace_back([&, w] {
            Rng local(derive_seed(seed, {w}));
            for (std::size_t i = w; i < clips; i += threads) {
                const Thumbnail th = tall_transform(pool[i % pool.size()], mask_size, layout, OrderSpec::forward(), local);
                sink[w] += th.image[i % th.image.size()];
            }
        });
    for (auto& t : workers) t.join();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double bytes = static_cast<double>(frames * kChannels * size * size * sizeof(float)) * static_cast<double>(clips);
    volatile double keep = 0.0;
    for (double s : sink) keep = keep + s;
    return {static_cast<double>(clips) / secs, bytes / secs, secs};
}

/// Artifact square of a scene mapped into thumbnail pixels, one per placed frame.
inline std::vector<Region> thumbnail_regions(const Thumbnail& th, const Region& r) {
    std::vector<Region> out;
    const double fh = th.layout.factor_h, fw = th.layout.factor_w;
    for (int slot : th.frame_slot) {
        if (slot < 0) continue;
        const auto [gr, gc] = th.layout.coords[static_cast<std::size_t>(slot)];
        Region t;
        t.y = gr * th.sub_h + static_cast<std::size_t>(static_cast<double>(r.y) / fh);
        t.x = gc * th.sub_w + static_cast<std::size_t>(static_cast<double>(r.x) / fw);
        t.size = static_cast<std::size_t>(static_cast<double>(r.size) / std::max(fh, fw));
        out.push_back(t);
    }
    return out;
}

/// Mean saliency inside and outside the given thumbnail regions.
inline std::pair<double, double> region_means(const Tensor<float>& map, const std::vector<Region>& regions) {
    const std::size_t h = map.dim(0), w = map.dim(1);
    double in = 0.0, outside = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            bool inside = false;
            for (const auto& r : regions) inside |= r.contains(y, x);
            (inside ? in : outside) += map[y * w + x];
            ++(inside ? n_in : n_out);
        }
    return {n_in ? in / static_cast<double>(n_in) : 0.0, n_out ? outside / static_cast<double>(n_out) : 0.0};
}

inline void cmd_saliency(Context& ctx, const fs::path& ckpt, std::size_t video, std::optional<std::size_t> cls,
                         std::size_t start, const fs::path& out_prefix) {
    Trainer tr = Trainer::load(ckpt);
    const TrainConfig& cfg = tr.config();
    if (!cfg.components.tall) throw ConfigError("saliency needs a thumbnail model (components.tall)");
    const auto info = describe_video(cfg.corpus, video);
    const Clip clip = render_clip(cfg.corpus, video, start, cfg.frames_per_clip);
    Rng rng(derive_seed(cfg.seed, {0x5a11, video}));
    const OrderSpec order = cfg.order == "random" ? OrderSpec::random(rng.next_u64()) : OrderSpec::parse(cfg.order);
    const Thumbnail th = tall_transform(clip, 0, effective_layout(cfg), order, rng);
    const std::size_t target = cls.value_or(tr.model().num_classes > 2 ? static_cast<std::size_t>(info.label) : 1);
    const SaliencyMap sm = saliency(tr.model(), tr.params(), th, target);
    const auto regions = thumbnail_regions(th, artifact_region(cfg.corpus, info.scene));
    const auto [inside, outside] = region_means(sm.map, regions);
    if (out_prefix.has_parent_path()) fs::create_directories(out_prefix.parent_path());
    write_ppm(th.image, out_prefix.string() + "-thumb.ppm");
    write_pgm(sm.map, out_prefix.string() + "-saliency.pgm");
    ctx.out << Json{{"video", video}, {"label", info.label}, {"class", target}, {"layer", sm.layer},
                    {"mean_inside_artifact", inside}, {"mean_outside_artifact", outside}}
                   .dump()
            << "\n";
}

/// Markdown reference of every subcommand's flags.
inline std::string help_markdown(CLI::App& app) {
    std::ostringstream md;
    md << "# `" << app.get_name() << "` command reference\n\n"
       << "Generated by `" << app.get_name() << " --help-all`.\n\n```text\n"
       << app.help("", CLI::AppFormatMode::Normal) << "```\n";
    for (CLI::App* sub : app.get_subcommands([](CLI::App*) { return true; })) {
        md << "\n## " << sub->get_name() << "\n\n" << sub->get_description() << "\n\n```text\n"
           << sub->help(app.get_name(), CLI::AppFormatMode::Sub) << "```\n";
    }
    return md.str();
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    Context ctx{out, err};
    CLI::App app{"Thumbnail-layout deepfake detection toolkit", "tall"};
    app.require_subcommand(0, 1);
    bool help_all = false;
    app.add_flag("--help-all", help_all, "Print a markdown reference of all subcommands and exit");

    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::vector<std::string> sets;

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic real/fake video corpus");
    std::optional<std::string> gen_spec, gen_out;
    bool gen_ppm = false;
    std::size_t gen_threads = 1;
    gen->add_option("--spec", gen_spec, "Corpus spec JSON (defaults used for missing keys)");
    gen->add_option("--out", gen_out, "Output directory (default: $TALL_DATA_DIR)");
    gen->add_option("--set", sets, "Override KEY=VALUE (dotted keys)");
    gen->add_option("--seed", seed, "Corpus seed");
    gen->add_option("--threads", gen_threads, "Worker threads")->check(CLI::PositiveNumber);
    gen->add_flag("--ppm", gen_ppm, "Also write the first frame of each video as PPM");

    auto* tf = app.add_subcommand("transform", "Turn one clip file into a thumbnail");
    std::string tf_in, tf_out, tf_layout = "2x2", tf_order = "forward";
    std::size_t tf_mask = 0;
    double tf_factor = 2.0;
    std::optional<std::string> tf_ppm;
    tf->add_option("--in", tf_in, "Input clip (TALLTEN1 [T,3,H,W] with JSON sidecar)")->required();
    tf->add_option("--out", tf_out, "Output thumbnail tensor")->required();
    tf->add_option("--layout", tf_layout, "RxC or RxC-col")->capture_default_str();
    tf->add_option("--order", tf_order, "forward, reverse, random[:SEED], drop-last-K")->capture_default_str();
    tf->add_option("--mask-size", tf_mask, "Side of the square mask in pixels")->capture_default_str();
    tf->add_option("--factor", tf_factor, "Downsampling factor")->capture_default_str();
    tf->add_option("--seed", seed, "Mask seed");
    tf->add_option("--ppm", tf_ppm, "Also write the thumbnail as PPM");

    auto* trn = app.add_subcommand("train", "Train a model");
    std::optional<std::string> trn_config, trn_data;
    std::string trn_out;
    trn->add_option("--config", trn_config, "Training config JSON");
    trn->add_option("--out", trn_out, "Run directory (checkpoint, logs, metrics)")->required();
    trn->add_option("--data", trn_data, "Corpus directory with manifest.json (default: $TALL_DATA_DIR)");
    trn->add_option("--set", sets, "Override KEY=VALUE (dotted keys, e.g. model.embed_dim=48)");
    trn->add_option("--seed", seed, "Run seed");
    trn->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string ev_ckpt, ev_split = "test";
    std::optional<std::string> ev_out, ev_roc;
    std::optional<std::size_t> ev_max;
    ev->add_option("--ckpt", ev_ckpt, "Checkpoint directory")->required();
    ev->add_option("--split", ev_split, "train, val or test")->capture_default_str();
    ev->add_option("--out", ev_out, "metrics.json path (default: inside the checkpoint)");
    ev->add_option("--roc", ev_roc, "Also write the ROC curve as CSV");
    ev->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    ev->add_option("--max-videos", ev_max, "Evaluate only the first N videos of the split");

    auto* ab = app.add_subcommand("ablate", "Run one ablation axis and print the result table");
    std::string ab_axis;
    std::optional<std::string> ab_config, ab_out, ab_data;
    bool ab_plan = false;
    ab->add_option("--axis", ab_axis, "components, layout, order, size or window")->required();
    ab->add_option("--config", ab_config, "Base training config JSON");
    ab->add_option("--out", ab_out, "Directory for per-variant runs and the CSV table");
    ab->add_option("--data", ab_data, "Corpus directory with manifest.json (default: $TALL_DATA_DIR)");
    ab->add_option("--set", sets, "Override KEY=VALUE on the base config");
    ab->add_option("--seed", seed, "Shared seed for every variant");
    ab->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    ab->add_flag("--plan", ab_plan, "List the variants without training");

    auto* bench = app.add_subcommand("bench-transform", "Measure thumbnail transform throughput");
    std::size_t b_clips = 1000, b_threads = 1, b_size = 224, b_frames = 4, b_mask = 28;
    double b_factor = 2.0;
    std::string b_layout = "2x2";
    bench->add_option("--clips", b_clips, "Clips to transform")->capture_default_str();
    bench->add_option("--threads", b_threads, "Worker threads")->capture_default_str();
    bench->add_option("--size", b_size, "Frame side in pixels")->capture_default_str();
    bench->add_option("--frames", b_frames, "Frames per clip")->capture_default_str();
    bench->add_option("--factor", b_factor, "Downsampling factor")->capture_default_str();
    bench->add_option("--mask-size", b_mask, "Mask side")->capture_default_str();
    bench->add_option("--layout", b_layout, "Layout")->capture_default_str();
    bench->add_option("--seed", seed, "Seed for the random clip pool");

    auto* sal = app.add_subcommand("saliency", "Write a gradient-weighted saliency map for one video");
    std::string s_ckpt, s_out = "saliency";
    std::size_t s_video = 0, s_start = 0;
    std::optional<std::size_t> s_class;
    sal->add_option("--ckpt", s_ckpt, "Checkpoint directory")->required();
    sal->add_option("--video", s_video, "Corpus video index")->required();
    sal->add_option("--start", s_start, "First frame of the clip")->capture_default_str();
    sal->add_option("--class", s_class, "Target class (default: fake, or the true class when multi-class)");
    sal->add_option("--out", s_out, "Output prefix for -thumb.ppm and -saliency.pgm")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << help_markdown(app);
        return ok;
    } catch (const CLI::ParseError& e) {
        print_error(err, "usage", e.what());
        return usage_error;
    }

    try {
        if (help_all) {
            out << help_markdown(app);
            return ok;
        }
        if (app.get_subcommands().empty()) {
            out << app.help();
            return ok;
        }
        auto data_dir = [](const std::optional<std::string>& flag) -> std::optional<fs::path> {
            if (flag) return fs::path(*flag);
            return default_data_dir();
        };
        if (gen->parsed()) {
            cmd_gen_data(ctx, gen_spec ? std::optional<fs::path>(*gen_spec) : std::nullopt,
                         gen_out ? std::optional<fs::path>(*gen_out) : std::nullopt, sets, seed, gen_threads, gen_ppm);
        } else if (tf->parsed()) {
            cmd_transform(ctx, tf_in, tf_out, tf_layout, tf_order, tf_mask, tf_factor, seed,
                          tf_ppm ? std::optional<fs::path>(*tf_ppm) : std::nullopt);
        } else if (trn->parsed()) {
            const auto cfg = load_train_config(trn_config ? std::optional<fs::path>(*trn_config) : std::nullopt, sets,
                                               data_dir(trn_data), seed, threads, err);
            cmd_train(ctx, cfg, trn_out);
        } else if (ev->parsed()) {
            cmd_eval(ctx, ev_ckpt, ev_split, ev_out ? std::optional<fs::path>(*ev_out) : std::nullopt,
                     ev_roc ? std::optional<fs::path>(*ev_roc) : std::nullopt, threads, ev_max);
        } else if (ab->parsed()) {
            const auto cfg = load_train_config(ab_config ? std::optional<fs::path>(*ab_config) : std::nullopt, sets,
                                               data_dir(ab_data), seed, threads, err);
            cmd_ablate(ctx, cfg, ab_axis, ab_out ? std::optional<fs::path>(*ab_out) : std::nullopt, ab_plan);
        } else if (bench->parsed()) {
            const auto r = bench_transform(b_clips, b_threads, b_size, b_frames, b_factor, b_mask, b_layout, seed.value_or(0));
            out << Json{{"clips", b_clips}, {"threads", b_threads}, {"seconds", r.seconds},
                        {"clips_per_s", r.clips_per_s}, {"bytes_per_s", r.bytes_per_s}}
                       .dump()
                << "\n";
        } else if (sal->parsed()) {
            cmd_saliency(ctx, s_ckpt, s_video, s_class, s_start, s_out);
        }
        return ok;
    } catch (const Error& e) {
        print_error(err, to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception& e) {
        print_error(err, "format", e.what());
        return data_error;
    } catch (const std::filesystem::filesystem_error& e) {
        print_error(err, "io", e.what());
        return data_error;
    } catch (const std::exception& e) {
        print_error(err, "internal", e.what());
        return usage_error;
    }
}

}  // namespace tall::cli
