#pragma once

// Thumbnail layout transform: one mask rectangle per clip, applied to every
// frame, then per-frame downsampling and placement of the sub-frames into a
// grid. Masking happens before downsampling.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tall/clipgen.hpp"
#include "tall/error.hpp"
#include "tall/rng.hpp"
#include "tall/tensor.hpp"

namespace tall {

/// Square of side `size` with top-left corner (x, y); x is the column.
struct MaskSpec {
    std::size_t size = 0;
    std::size_t x = 0;
    std::size_t y = 0;

    bool covers(std::size_t row, std::size_t col) const {
        return size > 0 && row >= y && row < y + size && col >= x && col < x + size;
    }
    friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

/// Draws a mask position uniformly over the placements that keep the square in bounds.
inline MaskSpec draw_mask(Rng& rng, std::size_t height, std::size_t width, std::size_t size) {
    if (size > std::min(height, width))
        throw ConfigError("mask size " + std::to_string(size) + " exceeds frame " + std::to_string(height) + "x" +
                          std::to_string(width));
    MaskSpec m;
    m.size = size;
    m.x = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(width - size)));
    m.y = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(height - size)));
    return m;
}

/// Zeroes the mask square in every channel of a [C,H,W] frame.
template <Scalar T>
Tensor<T> apply_mask(const Tensor<T>& frame, const MaskSpec& mask) {
    if (frame.rank() != 3) throw ShapeError("apply_mask", frame.shape(), Shape{0, 0, 0});
    const std::size_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
    if (mask.size > 0 && (mask.y + mask.size > h || mask.x + mask.size > w))
        throw ShapeError("apply_mask", frame.shape(), Shape{mask.y + mask.size, mask.x + mask.size});
    Tensor<T> out = frame;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t r = mask.y; r < mask.y + mask.size; ++r)
            std::fill_n(out.raw() + (ch * h + r) * w + mask.x, mask.size, T{0});
    return out;
}

namespace detail {

inline bool is_integer_factor(double f) { return f >= 1.0 && std::floor(f) == f; }

inline std::size_t downsampled_extent(std::size_t n, double factor) {
    if (!(factor >= 1.0)) throw ConfigError("downsample factor must be >= 1, got " + std::to_string(factor));
    const auto out = static_cast<std::size_t>(std::floor(static_cast<double>(n) / factor + 1e-9));
    if (out < 1) throw ConfigError("downsample of extent " + std::to_string(n) + " by " + std::to_string(factor) +
                                   " leaves no pixels");
    return out;
}

}  // namespace detail

/// Integer factors: non-overlapping box average. Non-integer factors:
/// bilinear resampling at pixel centres.
template <Scalar T>
Tensor<T> downsample(const Tensor<T>& frame, double factor_h, double factor_w) {
    if (frame.rank() != 3) throw ShapeError("downsample", frame.shape(), Shape{0, 0, 0});
    const std::size_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
    const std::size_t oh = detail::downsampled_extent(h, factor_h), ow = detail::downsampled_extent(w, factor_w);
    if (factor_h == 1.0 && factor_w == 1.0) return frame;
    Tensor<T> out(Shape{c, oh, ow});
    if (detail::is_integer_factor(factor_h) && detail::is_integer_factor(factor_w)) {
        const auto kh = static_cast<std::size_t>(factor_h), kw = static_cast<std::size_t>(factor_w);
        const T n = static_cast<T>(kh * kw);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    T s = 0;
                    for (std::size_t dy = 0; dy < kh; ++dy)
                        for (std::size_t dx = 0; dx < kw; ++dx)
                            s += frame[(ch * h + oy * kh + dy) * w + ox * kw + dx];
                    out[(ch * oh + oy) * ow + ox] = s / n;
                }
        return out;
    }
    auto axis = [](std::size_t o, double f, std::size_t n) {
        double src = (static_cast<double>(o) + 0.5) * f - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(n - 1));
        const auto i0 = static_cast<std::size_t>(std::floor(src));
        const std::size_t i1 = std::min(i0 + 1, n - 1);
        return std::tuple{i0, i1, src - static_cast<double>(i0)};
    };
    for (std::size_t oy = 0; oy < oh; ++oy) {
        const auto [y0, y1, wy] = axis(oy, factor_h, h);
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const auto [x0, x1, wx] = axis(ox, factor_w, w);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T* p = frame.raw() + ch * h * w;
                const double v = (1 - wy) * ((1 - wx) * p[y0 * w + x0] + wx * p[y0 * w + x1]) +
                                 wy * ((1 - wx) * p[y1 * w + x0] + wx * p[y1 * w + x1]);
                out[(ch * oh + oy) * ow + ox] = static_cast<T>(v);
            }
        }
    }
    return out;
}

/// Grid of sub-frame slots, filled in the order given by `coords`.
struct LayoutSpec {
    std::size_t rows = 2;
    std::size_t cols = 2;
    std::vector<std::pair<std::size_t, std::size_t>> coords{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    double factor_h = 2.0;
    double factor_w = 2.0;
    std::string name = "2x2";

    std::size_t slots() const { return coords.size(); }

    /// Row-major fill (`column_major` fills down columns first).
    static LayoutSpec grid(std::size_t rows, std::size_t cols, double factor, bool column_major = false) {
        if (rows == 0 || cols == 0) throw ConfigError("layout grid must be non-empty");
        LayoutSpec l;
        l.rows = rows;
        l.cols = cols;
        l.coords.clear();
        if (column_major) {
            for (std::size_t c = 0; c < cols; ++c)
                for (std::size_t r = 0; r < rows; ++r) l.coords.emplace_back(r, c);
        } else {
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) l.coords.emplace_back(r, c);
        }
        l.factor_h = l.factor_w = factor;
        l.name = std::to_string(rows) + "x" + std::to_string(cols) + (column_major ? "-col" : "");
        return l;
    }

    /// "RxC" or "RxC-col".
    static LayoutSpec parse(const std::string& s, double factor) {
        const auto x = s.find('x');
        if (x == std::string::npos || x == 0) throw ConfigError("bad layout '" + s + "' (expected RxC or RxC-col)");
        std::string rest = s.substr(x + 1);
        bool col = false;
        if (rest.size() > 4 && rest.substr(rest.size() - 4) == "-col") {
            col = true;
            rest.resize(rest.size() - 4);
        }
        try {
            std::size_t used = 0;
            const auto r = std::stoul(s.substr(0, x), &used);
            if (used != x) throw std::invalid_argument(s);
            const auto c = std::stoul(rest, &used);
            if (used != rest.size()) throw std::invalid_argument(s);
            return grid(r, c, factor, col);
        } catch (const std::logic_error&) {
            throw ConfigError("bad layout '" + s + "' (expected RxC or RxC-col)");
        }
    }

    void validate() const {
        std::vector<bool> used(rows * cols, false);
        for (auto [r, c] : coords) {
            if (r >= rows || c >= cols || used[r * cols + c]) throw ConfigError("layout " + name + ": bad slot coordinates");
            used[r * cols + c] = true;
        }
    }
};

/// Which frame goes into each fill position.
struct OrderSpec {
    enum class Kind { forward, reverse, random, drop_last };
    Kind kind = Kind::forward;
    std::uint64_t seed = 0;
    std::size_t drop = 0;

    static OrderSpec forward() { return {}; }
    static OrderSpec reverse() { return {Kind::reverse, 0, 0}; }
    static OrderSpec random(std::uint64_t seed) { return {Kind::random, seed, 0}; }
    static OrderSpec drop_last(std::size_t k) { return {Kind::drop_last, 0, k}; }

    /// forward | reverse | random[:SEED] | drop-last-K
    static OrderSpec parse(const std::string& s) {
        if (s == "forward") return forward();
        if (s == "reverse") return reverse();
        if (s == "random") return random(0);
        try {
            if (s.rfind("random:", 0) == 0) return random(std::stoull(s.substr(7)));
            if (s.rfind("drop-last-", 0) == 0) return drop_last(std::stoul(s.substr(10)));
        } catch (const std::logic_error&) {
        }
        throw ConfigError("bad order '" + s + "' (forward, reverse, random[:SEED], drop-last-K)");
    }

    std::string name() const {
        switch (kind) {
            case Kind::forward: return "forward";
            case Kind::reverse: return "reverse";
            case Kind::random: return "random:" + std::to_string(seed);
            case Kind::drop_last: return "drop-last-" + std::to_string(drop);
        }
        return "?";
    }

    /// Frame index for each fill position, -1 where the slot stays empty.
    std::vector<int> slot_frames(std::size_t num_frames, std::size_t num_slots) const {
        if (num_frames > num_slots)
            throw ConfigError(std::to_string(num_frames) + " frames do not fit " + std::to_string(num_slots) + " slots");
        std::vector<int> out(num_slots, -1);
        std::vector<int> frames(num_frames);
        std::iota(frames.begin(), frames.end(), 0);
        switch (kind) {
            case Kind::forward: break;
            case Kind::reverse: std::reverse(frames.begin(), frames.end()); break;
            case Kind::random: {
                Rng rng(derive_seed(seed, {0x0bde7}));
                rng.shuffle(frames.begin(), frames.end());
                break;
            }
            case Kind::drop_last:
                if (drop >= num_frames) throw ConfigError("drop-last-" + std::to_string(drop) + " leaves no frames");
                frames.resize(num_frames - drop);
                break;
        }
        std::copy(frames.begin(), frames.end(), out.begin());
        return out;
    }

    friend bool operator==(const OrderSpec&, const OrderSpec&) = default;
};

struct Thumbnail {
    Tensor<float> image;  // [C, rows*sub_h, cols*sub_w]
    LayoutSpec layout;
    OrderSpec order;
    std::vector<int> frame_slot;  // fill position of each source frame, -1 if dropped
    std::size_t sub_h = 0, sub_w = 0;
    std::size_t clip_video = 0, clip_start = 0;
    MaskSpec mask;

    std::size_t height() const { return image.dim(1); }
    std::size_t width() const { return image.dim(2); }

    /// Fill position occupying thumbnail pixel (row, col), or -1 for an
    /// unused grid cell.
    int slot_at(std::size_t row, std::size_t col) const {
        const std::size_t r = row / sub_h, c = col / sub_w;
        for (std::size_t k = 0; k < layout.coords.size(); ++k)
            if (layout.coords[k] == std::pair{r, c}) return static_cast<int>(k);
        return -1;
    }
};

/// Places sub-frames (each [C,h,w]) into the layout grid in the given order.
inline Thumbnail rearrange(const std::vector<Tensor<float>>& subframes, const LayoutSpec& layout, const OrderSpec& order) {
    if (subframes.empty()) throw ConfigError("rearrange: no sub-frames");
    layout.validate();
    const Shape& s0 = subframes.front().shape();
    if (s0.size() != 3) throw ShapeError("rearrange", s0, Shape{0, 0, 0});
    for (const auto& sf : subframes)
        if (sf.shape() != s0) throw ShapeError("rearrange", s0, sf.shape());
    const std::size_t c = s0[0], h = s0[1], w = s0[2];
    const auto slot_frames = order.slot_frames(subframes.size(), layout.slots());

    Thumbnail th;
    th.layout = layout;
    th.order = order;
    th.sub_h = h;
    th.sub_w = w;
    th.image = Tensor<float>(Shape{c, layout.rows * h, layout.cols * w});
    th.frame_slot.assign(subframes.size(), -1);
    const std::size_t W = layout.cols * w, H = layout.rows * h;
    for (std::size_t k = 0; k < slot_frames.size(); ++k) {
        if (slot_frames[k] < 0) continue;
        const auto f = static_cast<std::size_t>(slot_frames[k]);
        th.frame_slot[f] = static_cast<int>(k);
        const auto [gr, gc] = layout.coords[k];
        const auto& src = subframes[f];
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                std::copy_n(src.raw() + (ch * h + y) * w, w, th.image.raw() + (ch * H + gr * h + y) * W + gc * w);
    }
    return th;
}

namespace detail {

/// Mask + box downsample + placement in one pass over the source frames.
/// Bit-identical to apply_mask -> downsample -> rearrange for integer factors.
inline void fused_box_transform(const Clip& clip, const MaskSpec& mask, const LayoutSpec& layout,
                                const std::vector<int>& slot_frames, std::size_t kh, std::size_t kw, Thumbnail& th) {
    const std::size_t c = clip.frames.dim(1), h = clip.height(), w = clip.width();
    const std::size_t oh = th.sub_h, ow = th.sub_w;
    const std::size_t W = layout.cols * ow, H = layout.rows * oh;
    const float n = static_cast<float>(kh * kw);
    for (std::size_t k = 0; k < slot_frames.size(); ++k) {
        if (slot_frames[k] < 0) continue;
        const auto f = static_cast<std::size_t>(slot_frames[k]);
        const auto [gr, gc] = layout.coords[k];
        const float* src = clip.frames.raw() + f * c * h * w;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const float* plane = src + ch * h * w;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                float* dst = th.image.raw() + (ch * H + gr * oh + oy) * W + gc * ow;
                const std::size_t r0 = oy * kh;
                const bool rows_hit = mask.size > 0 && r0 < mask.y + mask.size && r0 + kh > mask.y;
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const std::size_t c0 = ox * kw;
                    float s = 0;
                    if (rows_hit && c0 < mask.x + mask.size && c0 + kw > mask.x) {
                        for (std::size_t dy = 0; dy < kh; ++dy)
                            for (std::size_t dx = 0; dx < kw; ++dx)
                                s += mask.covers(r0 + dy, c0 + dx) ? 0.0f : plane[(r0 + dy) * w + c0 + dx];
                    } else {
                        for (std::size_t dy = 0; dy < kh; ++dy)
                            for (std::size_t dx = 0; dx < kw; ++dx) s += plane[(r0 + dy) * w + c0 + dx];
                    }
                    dst[ox] = s / n;
                }
            }
        }
    }
}

}  // namespace detail

/// Full transform of one clip. One mask is drawn per clip from `rng` and
/// applied to all of its frames.
inline Thumbnail tall_transform(const Clip& clip, std::size_t mask_size, const LayoutSpec& layout,
                                const OrderSpec& order, Rng& rng) {
    if (clip.frames.rank() != 4) throw ShapeError("tall_transform", clip.frames.shape(), Shape{0, 0, 0, 0});
    layout.validate();
    const std::size_t t = clip.num_frames(), c = clip.frames.dim(1), h = clip.height(), w = clip.width();
    if (t > layout.slots())
        throw ConfigError("clip of " + std::to_string(t) + " frames exceeds layout " + layout.name + " (" +
                          std::to_string(layout.slots()) + " slots)");
    const MaskSpec mask = draw_mask(rng, h, w, mask_size);
    if (detail::is_integer_factor(layout.factor_h) && detail::is_integer_factor(layout.factor_w)) {
        const auto kh = static_cast<std::size_t>(layout.factor_h), kw = static_cast<std::size_t>(layout.factor_w);
        Thumbnail th;
        th.layout = layout;
        th.order = order;
        th.sub_h = detail::downsampled_extent(h, layout.factor_h);
        th.sub_w = detail::downsampled_extent(w, layout.factor_w);
        th.image = Tensor<float>(Shape{c, layout.rows * th.sub_h, layout.cols * th.sub_w});
        const auto slot_frames = order.slot_frames(t, layout.slots());
        th.frame_slot.assign(t, -1);
        for (std::size_t k = 0; k < slot_frames.size(); ++k)
            if (slot_frames[k] >= 0) th.frame_slot[static_cast<std::size_t>(slot_frames[k])] = static_cast<int>(k);
        detail::fused_box_transform(clip, mask, layout, slot_frames, kh, kw, th);
        th.clip_video = clip.video;
        th.clip_start = clip.start;
        th.mask = mask;
        return th;
    }
    std::vector<Tensor<float>> subs;
    const std::size_t fsize = c * h * w;
    for (std::size_t f = 0; f < t; ++f) {
        Tensor<float> frame(Shape{c, h, w},
                            std::vector<float>(clip.frames.raw() + f * fsize, clip.frames.raw() + (f + 1) * fsize));
        subs.push_back(downsample(apply_mask(frame, mask), layout.factor_h, layout.factor_w));
    }
    Thumbnail th = rearrange(subs, layout, order);
    th.clip_video = clip.video;
    th.clip_start = clip.start;
    th.mask = mask;
    return th;
}

/// Source of one thumbnail pixel.
struct Provenance {
    std::size_t slot = 0;      // fill position
    std::optional<std::size_t> frame;  // empty for an unfilled slot
    std::size_t row0 = 0, col0 = 0;   // source footprint, top-left
    std::size_t rows = 0, cols = 0;   // footprint extent (the integer factor)
};

/// Maps a thumbnail pixel back to its slot, frame and source footprint.
/// Only defined for integer downsampling factors.
inline std::optional<Provenance> pixel_provenance(std::size_t row, std::size_t col, const LayoutSpec& layout,
                                                  std::size_t sub_h, std::size_t sub_w,
                                                  const OrderSpec& order = OrderSpec::forward(),
                                                  std::optional<std::size_t> num_frames = std::nullopt) {
    if (!detail::is_integer_factor(layout.factor_h) || !detail::is_integer_factor(layout.factor_w))
        throw ConfigError("pixel_provenance needs integer downsampling factors");
    if (row >= layout.rows * sub_h || col >= layout.cols * sub_w)
        throw ConfigError("pixel (" + std::to_string(row) + "," + std::to_string(col) + ") outside thumbnail " +
                          std::to_string(layout.rows * sub_h) + "x" + std::to_string(layout.cols * sub_w));
    const std::size_t gr = row / sub_h, gc = col / sub_w;
    std::optional<std::size_t> slot;
    for (std::size_t k = 0; k < layout.coords.size(); ++k)
        if (layout.coords[k] == std::pair{gr, gc}) slot = k;
    if (!slot) return std::nullopt;
    const auto frames = order.slot_frames(num_frames.value_or(layout.slots()), layout.slots());
    const auto kh = static_cast<std::size_t>(layout.factor_h), kw = static_cast<std::size_t>(layout.factor_w);
    Provenance p;
    p.slot = *slot;
    if (frames[*slot] >= 0) p.frame = static_cast<std::size_t>(frames[*slot]);
    p.row0 = (row - gr * sub_h) * kh;
    p.col0 = (col - gc * sub_w) * kw;
    p.rows = kh;
    p.cols = kw;
    return p;
}

/// Reconstructs clip frames [T,C,H,W] from a factor-1 thumbnail; dropped
/// frames come back as zeros.
inline Tensor<float> inverse_transform(const Thumbnail& th, std::size_t num_frames) {
    if (th.layout.factor_h != 1.0 || th.layout.factor_w != 1.0)
        throw ConfigError("inverse_transform is only defined for downsampling factor 1");
    const std::size_t c = th.image.dim(0), h = th.sub_h, w = th.sub_w, W = th.width(), H = th.height();
    Tensor<float> out(Shape{num_frames, c, h, w});
    for (std::size_t f = 0; f < num_frames && f < th.frame_slot.size(); ++f) {
        if (th.frame_slot[f] < 0) continue;
        const auto [gr, gc] = th.layout.coords[static_cast<std::size_t>(th.frame_slot[f])];
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y)
                std::copy_n(th.image.raw() + (ch * H + gr * h + y) * W + gc * w, w,
                            out.raw() + ((f * c + ch) * h + y) * w);
    }
    return out;
}

}  // namespace tall
