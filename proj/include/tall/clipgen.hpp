#pragma once

// Synthetic real/fake video corpus, dense clip sampling and clip files.
//
// Real videos are a drifting textured background with 2-4 smooth blobs.
// A fake is its real twin (same scene) with a fixed square region perturbed
// independently in every frame, so the fake signal is temporal incoherence
// confined to that region.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tall/error.hpp"
#include "tall/rng.hpp"
#include "tall/tensor.hpp"
#include "tall/tensor_io.hpp"

namespace tall {

enum class ArtifactKind { flicker, seam, texture };

inline std::string to_string(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::flicker: return "flicker-region";
        case ArtifactKind::seam: return "boundary-seam";
        case ArtifactKind::texture: return "texture-swap";
    }
    return "?";
}

inline ArtifactKind parse_artifact_kind(const std::string& s) {
    if (s == "flicker-region" || s == "flicker") return ArtifactKind::flicker;
    if (s == "boundary-seam" || s == "seam") return ArtifactKind::seam;
    if (s == "texture-swap" || s == "texture") return ArtifactKind::texture;
    throw ConfigError("unknown artifact kind '" + s + "'");
}

inline constexpr std::size_t kChannels = 3;

struct CorpusSpec {
    std::size_t videos_per_class = 500;
    std::size_t frames = 48;
    std::size_t height = 128;
    std::size_t width = 128;
    /// Fakes cycle through these kinds; in multiclass mode kind i is class i+1.
    std::vector<ArtifactKind> kinds{ArtifactKind::flicker};
    bool multiclass = false;
    double magnitude = 0.5;
    std::uint64_t seed = 0;

    std::size_t num_classes() const { return multiclass ? 1 + kinds.size() : 2; }
    std::size_t num_videos() const { return videos_per_class * num_classes(); }

    void validate() const {
        if (height < 16 || width < 16)
            throw ConfigError("corpus frames must be at least 16x16, got " + std::to_string(height) + "x" +
                              std::to_string(width));
        if (!(magnitude >= 0.0 && magnitude <= 1.0))
            throw ConfigError("artifact magnitude must lie in [0,1], got " + std::to_string(magnitude));
        if (kinds.empty()) throw ConfigError("at least one artifact kind is required");
        if (videos_per_class == 0 || frames == 0) throw ConfigError("empty corpus");
    }
};

/// Identity of one corpus video. Index layout: class-major, so index i and
/// i + videos_per_class show the same scene.
struct VideoInfo {
    std::size_t index = 0;
    std::size_t scene = 0;
    int label = 0;
    std::optional<ArtifactKind> kind;
};

inline VideoInfo describe_video(const CorpusSpec& spec, std::size_t index) {
    if (index >= spec.num_videos())
        throw ConfigError("video index " + std::to_string(index) + " out of range (corpus has " +
                          std::to_string(spec.num_videos()) + ")");
    VideoInfo info;
    info.index = index;
    info.scene = index % spec.videos_per_class;
    const std::size_t cls = index / spec.videos_per_class;
    if (cls == 0) return info;
    if (spec.multiclass) {
        info.label = static_cast<int>(cls);
        info.kind = spec.kinds[cls - 1];
    } else {
        info.label = 1;
        info.kind = spec.kinds[info.scene % spec.kinds.size()];
    }
    return info;
}

struct Region {
    std::size_t x = 0, y = 0, size = 0;

    bool contains(std::size_t row, std::size_t col) const {
        return row >= y && row < y + size && col >= x && col < x + size;
    }
};

/// The fixed square that fakes perturb; a function of the scene only.
inline Region artifact_region(const CorpusSpec& spec, std::size_t scene) {
    Rng rng(derive_seed(spec.seed, {0x5e91, scene}));
    Region r;
    r.size = std::max<std::size_t>(4, 3 * std::min(spec.height, spec.width) / 8);
    const std::size_t mx = spec.width / 8, my = spec.height / 8;
    r.x = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(mx),
                                                   static_cast<std::int64_t>(spec.width - mx - r.size)));
    r.y = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(my),
                                                   static_cast<std::int64_t>(spec.height - my - r.size)));
    return r;
}

namespace detail {

struct Grating {
    double fx, fy, phase, speed;
    double amp[kChannels];
};

struct Blob {
    double color[kChannels];
    double x0, y0, vx, vy, wobble, wfreq, wphase, sigma;
};

struct Scene {
    double base[kChannels];
    std::vector<Grating> gratings;
    std::vector<Blob> blobs;
};

inline Scene make_scene(const CorpusSpec& spec, std::size_t scene) {
    Rng rng(derive_seed(spec.seed, {0x5ce7e, scene}));
    Scene s;
    for (auto& b : s.base) b = rng.uniform(0.35, 0.65);
    for (int g = 0; g < 3; ++g) {
        Grating gr;
        const double cycles = rng.uniform(0.5, 3.0);
        const double theta = rng.uniform(0.0, std::numbers::pi);
        gr.fx = cycles * std::cos(theta);
        gr.fy = cycles * std::sin(theta);
        gr.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        gr.speed = rng.uniform(-0.15, 0.15);
        for (auto& a : gr.amp) a = rng.uniform(-0.07, 0.07);
        s.gratings.push_back(gr);
    }
    const auto nblobs = rng.uniform_int(2, 4);
    const double side = static_cast<double>(std::min(spec.height, spec.width));
    for (std::int64_t b = 0; b < nblobs; ++b) {
        Blob bl;
        for (auto& c : bl.color) c = rng.uniform(0.0, 1.0);
        bl.x0 = rng.uniform(0.2, 0.8) * static_cast<double>(spec.width);
        bl.y0 = rng.uniform(0.2, 0.8) * static_cast<double>(spec.height);
        bl.vx = rng.uniform(-1.0, 1.0);
        bl.vy = rng.uniform(-1.0, 1.0);
        bl.wobble = rng.uniform(0.0, 3.0);
        bl.wfreq = rng.uniform(0.1, 0.3);
        bl.wphase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        bl.sigma = rng.uniform(0.06, 0.12) * side;
        s.blobs.push_back(bl);
    }
    return s;
}

/// Reflects p into [0, extent) (triangle wave) so blobs bounce off the borders.
inline double reflect(double p, double extent) {
    const double period = 2.0 * extent;
    double q = std::fmod(p, period);
    if (q < 0) q += period;
    return q < extent ? q : period - q;
}

inline void render_real(const CorpusSpec& spec, const Scene& s, std::size_t t, float* frame) {
    const std::size_t h = spec.height, w = spec.width, plane = h * w;
    const double tt = static_cast<double>(t);
    for (std::size_t y = 0; y < h; ++y) {
        const double v = static_cast<double>(y) / static_cast<double>(h);
        for (std::size_t x = 0; x < w; ++x) {
            const double u = static_cast<double>(x) / static_cast<double>(w);
            double px[kChannels] = {s.base[0], s.base[1], s.base[2]};
            for (const auto& g : s.gratings) {
                const double sv = std::sin(2.0 * std::numbers::pi * (g.fx * u + g.fy * v) + g.phase + g.speed * tt);
                for (std::size_t c = 0; c < kChannels; ++c) px[c] += g.amp[c] * sv;
            }
            for (std::size_t c = 0; c < kChannels; ++c) frame[c * plane + y * w + x] = static_cast<float>(px[c]);
        }
    }
    for (const auto& b : s.blobs) {
        const double cx = reflect(b.x0 + b.vx * tt + b.wobble * std::sin(b.wfreq * tt + b.wphase), static_cast<double>(w));
        const double cy = reflect(b.y0 + b.vy * tt + b.wobble * std::cos(b.wfreq * tt + b.wphase), static_cast<double>(h));
        const double r = 3.0 * b.sigma;
        const auto y0 = static_cast<std::size_t>(std::max(0.0, cy - r));
        const auto y1 = static_cast<std::size_t>(std::min(static_cast<double>(h), cy + r + 1));
        const auto x0 = static_cast<std::size_t>(std::max(0.0, cx - r));
        const auto x1 = static_cast<std::size_t>(std::min(static_cast<double>(w), cx + r + 1));
        const double inv = 1.0 / (2.0 * b.sigma * b.sigma);
        for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = x0; x < x1; ++x) {
                const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
                const double a = 0.8 * std::exp(-(dx * dx + dy * dy) * inv);
                for (std::size_t c = 0; c < kChannels; ++c) {
                    float& p = frame[c * plane + y * w + x];
                    p = static_cast<float>(p * (1.0 - a) + b.color[c] * a);
                }
            }
    }
    for (std::size_t i = 0; i < kChannels * plane; ++i) frame[i] = std::clamp(frame[i], 0.0f, 1.0f);
}

/// Perturbs the artifact region of one frame in place. Magnitude 0 is an
/// exact no-op for every kind.
inline void apply_artifact(const CorpusSpec& spec, ArtifactKind kind, const Region& reg, std::size_t scene,
                           std::size_t t, float* frame) {
    const std::size_t h = spec.height, w = spec.width, plane = h * w;
    const double m = spec.magnitude;
    Rng rng(derive_seed(spec.seed, {0xfa6e, scene, static_cast<std::uint64_t>(kind), t}));
    switch (kind) {
        case ArtifactKind::flicker: {
            const std::size_t cell = std::max<std::size_t>(2, h / 32);
            const std::size_t cells = (reg.size + cell - 1) / cell;
            const double lift = rng.uniform(0.5, 1.0);
            std::vector<double> noise(kChannels * cells * cells);
            for (auto& n : noise) n = lift + 0.5 * rng.uniform(-1.0, 1.0);
            for (std::size_t c = 0; c < kChannels; ++c)
                for (std::size_t y = 0; y < reg.size; ++y)
                    for (std::size_t x = 0; x < reg.size; ++x) {
                        float& p = frame[c * plane + (reg.y + y) * w + reg.x + x];
                        const double n = noise[(c * cells + y / cell) * cells + x / cell];
                        p = std::clamp(static_cast<float>(p + 0.4 * m * n), 0.0f, 1.0f);
                    }
            break;
        }
        case ArtifactKind::seam: {
            const auto dx = static_cast<std::ptrdiff_t>(std::lround(m * rng.uniform(-4.0, 4.0)));
            const auto dy = static_cast<std::ptrdiff_t>(std::lround(m * rng.uniform(-4.0, 4.0)));
            const double gray = rng.uniform(0.0, 1.0);
            const double blend = 0.6 * m;
            std::vector<float> src(frame, frame + kChannels * plane);
            const std::size_t ring = 2;
            for (std::size_t c = 0; c < kChannels; ++c)
                for (std::size_t y = reg.y; y < reg.y + reg.size; ++y)
                    for (std::size_t x = reg.x; x < reg.x + reg.size; ++x) {
                        const auto sy = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) + dy, 0,
                                                                   static_cast<std::ptrdiff_t>(h) - 1);
                        const auto sx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) + dx, 0,
                                                                   static_cast<std::ptrdiff_t>(w) - 1);
                        double p = src[c * plane + static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
                        const bool edge = y < reg.y + ring || y >= reg.y + reg.size - ring || x < reg.x + ring ||
                                          x >= reg.x + reg.size - ring;
                        if (edge) p = (1.0 - blend) * p + blend * gray;
                        frame[c * plane + y * w + x] = std::clamp(static_cast<float>(p), 0.0f, 1.0f);
                    }
            break;
        }
        case ArtifactKind::texture: {
            double ph[2], fx[2], fy[2];
            for (int k = 0; k < 2; ++k) {
                ph[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
                fx[k] = rng.uniform(4.0, 8.0);
                fy[k] = rng.uniform(4.0, 8.0);
            }
            const double inv = 1.0 / static_cast<double>(reg.size);
            for (std::size_t c = 0; c < kChannels; ++c)
                for (std::size_t y = 0; y < reg.size; ++y)
                    for (std::size_t x = 0; x < reg.size; ++x) {
                        const double u = static_cast<double>(x) * inv, v = static_cast<double>(y) * inv;
                        double tex = 0.5;
                        for (int k = 0; k < 2; ++k)
                            tex += 0.2 * std::sin(2.0 * std::numbers::pi * (fx[k] * u + fy[k] * v) + ph[k] +
                                                  static_cast<double>(c));
                        float& p = frame[c * plane + (reg.y + y) * w + reg.x + x];
                        p = std::clamp(static_cast<float>((1.0 - m) * p + m * tex), 0.0f, 1.0f);
                    }
            break;
        }
    }
}

}  // namespace detail

/// Renders frames [first, first+count) of a corpus video as [count, 3, H, W].
inline Tensor<float> render_frames(const CorpusSpec& spec, std::size_t index, std::size_t first, std::size_t count) {
    spec.validate();
    const auto info = describe_video(spec, index);
    if (count == 0 || first + count > spec.frames)
        throw ConfigError("frame range [" + std::to_string(first) + "," + std::to_string(first + count) +
                          ") outside video of " + std::to_string(spec.frames) + " frames");
    const auto scene = detail::make_scene(spec, info.scene);
    const auto region = artifact_region(spec, info.scene);
    const std::size_t fsize = kChannels * spec.height * spec.width;
    Tensor<float> out(Shape{count, kChannels, spec.height, spec.width});
    for (std::size_t i = 0; i < count; ++i) {
        float* frame = out.raw() + i * fsize;
        detail::render_real(spec, scene, first + i, frame);
        if (info.kind) detail::apply_artifact(spec, *info.kind, region, info.scene, first + i, frame);
    }
    return out;
}

struct Video {
    Tensor<float> frames;  // [F, 3, H, W]
    int label = 0;
    std::size_t index = 0;
    std::size_t scene = 0;
    std::uint64_t seed = 0;
    double fps = 25.0;

    std::size_t num_frames() const { return frames.dim(0); }
};

inline Video generate_video(const CorpusSpec& spec, std::size_t index) {
    const auto info = describe_video(spec, index);
    Video v;
    v.frames = render_frames(spec, index, 0, spec.frames);
    v.label = info.label;
    v.index = index;
    v.scene = info.scene;
    v.seed = spec.seed;
    return v;
}

struct Clip {
    Tensor<float> frames;  // [T, 3, H, W]
    std::size_t video = 0;
    std::size_t start = 0;
    int label = 0;
    std::uint64_t seed = 0;

    std::size_t num_frames() const { return frames.dim(0); }
    std::size_t height() const { return frames.dim(2); }
    std::size_t width() const { return frames.dim(3); }
};

/// Start frames for dense sampling: the video is cut into num_clips equal
/// segments and each contributes one run of frames_per_clip consecutive
/// frames at a uniform offset inside the segment.
inline std::vector<std::size_t> dense_sample_starts(std::size_t num_frames, std::size_t num_clips,
                                                    std::size_t frames_per_clip, Rng& rng) {
    if (num_clips == 0 || frames_per_clip == 0) throw ConfigError("dense_sample: empty clip geometry");
    if (num_frames < num_clips * frames_per_clip)
        throw ConfigError("dense_sample: video has " + std::to_string(num_frames) + " frames, needs at least " +
                          std::to_string(num_clips * frames_per_clip));
    const std::size_t seg = num_frames / num_clips;
    std::vector<std::size_t> starts(num_clips);
    for (std::size_t k = 0; k < num_clips; ++k)
        starts[k] = k * seg + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(seg - frames_per_clip)));
    return starts;
}

inline Clip extract_clip(const Video& video, std::size_t start, std::size_t frames_per_clip) {
    const std::size_t fsize = video.frames.size() / video.num_frames();
    if (start + frames_per_clip > video.num_frames()) throw ConfigError("clip runs past the end of the video");
    Shape shape = video.frames.shape();
    shape[0] = frames_per_clip;
    std::vector<float> data(video.frames.raw() + start * fsize, video.frames.raw() + (start + frames_per_clip) * fsize);
    return Clip{Tensor<float>(std::move(shape), std::move(data)), video.index, start, video.label, video.seed};
}

inline std::vector<Clip> dense_sample(const Video& video, std::size_t num_clips, std::size_t frames_per_clip, Rng& rng) {
    std::vector<Clip> clips;
    for (auto s : dense_sample_starts(video.num_frames(), num_clips, frames_per_clip, rng))
        clips.push_back(extract_clip(video, s, frames_per_clip));
    return clips;
}

/// Renders one clip without materialising the rest of the video.
inline Clip render_clip(const CorpusSpec& spec, std::size_t index, std::size_t start, std::size_t frames_per_clip) {
    const auto info = describe_video(spec, index);
    return Clip{render_frames(spec, index, start, frames_per_clip), index, start, info.label, spec.seed};
}

// Clip files: TALLTEN1 tensor [T,3,H,W] plus a JSON sidecar with the same stem.

inline std::filesystem::path clip_sidecar(const std::filesystem::path& path) {
    auto p = path;
    p.replace_extension(".json");
    return p;
}

inline void write_clip(const Clip& clip, const std::filesystem::path& path) {
    write_tensor(path, clip.frames);
    nlohmann::json meta = {{"video", clip.video}, {"start", clip.start}, {"label", clip.label},
                           {"seed", clip.seed}, {"frames", clip.num_frames()}};
    std::ofstream out(clip_sidecar(path));
    if (!out) throw IoError("cannot write " + clip_sidecar(path).string());
    out << meta.dump(2) << '\n';
}

inline Clip read_clip(const std::filesystem::path& path) {
    Clip clip;
    clip.frames = read_tensor<float>(path);
    if (clip.frames.rank() != 4 || clip.frames.dim(1) != kChannels)
        throw FormatError("clip tensor must be [T,3,H,W], got " + shape_str(clip.frames.shape()), 9);
    std::ifstream in(clip_sidecar(path));
    if (!in) throw IoError("missing clip sidecar " + clip_sidecar(path).string());
    nlohmann::json meta;
    try {
        in >> meta;
        clip.video = meta.at("video").get<std::size_t>();
        clip.start = meta.at("start").get<std::size_t>();
        clip.label = meta.at("label").get<int>();
        clip.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad clip sidecar: ") + e.what(), 0);
    }
    if (meta.value("frames", clip.num_frames()) != clip.num_frames())
        throw FormatError("sidecar frame count disagrees with tensor", 0);
    return clip;
}

/// Binary PPM (P6) of a [3,H,W] frame with values in [0,1].
inline void write_ppm(const Tensor<float>& frame, const std::filesystem::path& path) {
    if (frame.rank() != 3 || frame.dim(0) != 3) throw ShapeError("write_ppm", frame.shape(), Shape{3, 0, 0});
    const std::size_t h = frame.dim(1), w = frame.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P6\n" << w << ' ' << h << "\n255\n";
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const float v = std::clamp(frame[(c * h + y) * w + x], 0.0f, 1.0f);
                out.put(static_cast<char>(std::lround(v * 255.0f)));
            }
}

/// Binary PGM (P5) of an [H,W] map with values in [0,1].
inline void write_pgm(const Tensor<float>& map, const std::filesystem::path& path) {
    if (map.rank() != 2) throw ShapeError("write_pgm", map.shape(), Shape{0, 0});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << map.dim(1) << ' ' << map.dim(0) << "\n255\n";
    for (float v : map.data()) out.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
}

// Splits are assigned per scene so real/fake twins and all clips of a video
// land in the same split.

enum class Split { train, val, test };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "'");
}

/// 70/15/15 scene split, deterministic in the corpus seed.
inline std::vector<Split> assign_scene_splits(std::size_t num_scenes, std::uint64_t seed) {
    std::vector<std::size_t> order(num_scenes);
    for (std::size_t i = 0; i < num_scenes; ++i) order[i] = i;
    Rng rng(derive_seed(seed, {0x5b117}));
    rng.shuffle(order.begin(), order.end());
    const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(num_scenes)));
    const auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(num_scenes)));
    std::vector<Split> split(num_scenes, Split::test);
    for (std::size_t i = 0; i < num_scenes; ++i)
        split[order[i]] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
    return split;
}

inline std::vector<std::size_t> videos_in_split(const CorpusSpec& spec, Split which) {
    const auto splits = assign_scene_splits(spec.videos_per_class, spec.seed);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < spec.num_videos(); ++i)
        if (splits[describe_video(spec, i).scene] == which) out.push_back(i);
    return out;
}

}  // namespace tall
